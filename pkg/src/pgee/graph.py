"""Graph and label containers plus file ingestion.

A :class:`Graph` stores a deduplicated edge list in canonical order together
with a compressed (CSR) neighbor structure. Both :class:`Graph` and
:class:`LabelVector` are immutable after construction and safe to share
across threads.

Edge-list text format: one edge per line, ``i j`` or ``i j w``, whitespace
separated, ``#`` starts a comment. Label file: one integer per line, or
two-column CSV ``vertex,label``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Malformed graph or label input."""


@dataclass(frozen=True)
class Graph:
    """Immutable sparse graph.

    ``src``/``dst`` hold the canonical deduplicated edge list (for undirected
    graphs each edge appears once with ``src < dst``, sorted). ``indptr`` and
    ``indices`` form the CSR neighbor structure: for undirected graphs the
    neighbor lists are symmetric; for directed graphs they are the
    out-neighborhoods.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    directed: bool
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray | None = None
    id_base: int = 0
    self_loops_dropped: int = 0
    duplicates_dropped: int = 0

    @property
    def s(self) -> int:
        """Number of distinct edges (undirected edges counted once)."""
        return int(self.src.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @classmethod
    def from_edges(
        cls,
        src,
        dst,
        *,
        n: int | None = None,
        directed: bool = False,
        weights=None,
        id_base: int = 0,
    ) -> "Graph":
        """Build a graph from raw endpoint arrays.

        Self-loops are dropped (counted), duplicates collapse to one edge,
        and undirected inputs are symmetrized. ``n`` defaults to
        ``max(id) + 1``.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise GraphFormatError("src and dst must have equal length")
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape != src.shape:
                raise GraphFormatError("weights must match edge count")

        if src.size and (src.min() < 0 or dst.min() < 0):
            raise GraphFormatError("negative vertex id")
        max_id = int(max(src.max(), dst.max())) if src.size else -1
        if n is None:
            n = max_id + 1
        elif max_id >= n:
            raise GraphFormatError(f"vertex id {max_id} out of range for n={n}")
        n = int(n)

        loops = src == dst
        n_loops = int(loops.sum())
        if n_loops:
            logger.warning("dropped %d self-loop(s)", n_loops)
            keep = ~loops
            src, dst = src[keep], dst[keep]
            if weights is not None:
                weights = weights[keep]

        if not directed:
            lo = np.minimum(src, dst)
            hi = np.maximum(src, dst)
            src, dst = lo, hi

        # Canonical order + dedup via a single integer key (n <= 3e9 keeps
        # the key within int64).
        key = src * np.int64(n) + dst
        uniq_key, first_idx = np.unique(key, return_index=True)
        n_dups = int(key.size - uniq_key.size)
        src = (uniq_key // n).astype(np.int64)
        dst = (uniq_key % n).astype(np.int64)
        if weights is not None:
            weights = weights[first_idx]

        indptr, indices = _build_csr(n, src, dst, directed)

        for arr in (src, dst, indptr, indices):
            arr.setflags(write=False)
        if weights is not None:
            weights.setflags(write=False)

        return cls(
            n=n,
            src=src,
            dst=dst,
            directed=directed,
            indptr=indptr,
            indices=indices,
            weights=weights,
            id_base=id_base,
            self_loops_dropped=n_loops,
            duplicates_dropped=n_dups,
        )


def _build_csr(n: int, src: np.ndarray, dst: np.ndarray, directed: bool):
    if directed:
        rows, cols = src, dst
    else:
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    counts = np.bincount(rows, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, cols.astype(np.int64)


@dataclass(frozen=True)
class LabelVector:
    """Per-vertex labels in {0, 1, ..., K}; 0 marks an unknown label.

    ``class_counts[k-1]`` is the number of vertices carrying label ``k``.
    Strict construction requires every class 1..K to be non-empty; relaxed
    construction (``allow_empty_classes``) permits empty classes, which the
    noisy-label pipeline produces.
    """

    labels: np.ndarray
    n_classes: int
    class_counts: np.ndarray

    @classmethod
    def from_array(
        cls, labels, *, n_classes: int | None = None, allow_empty_classes: bool = False
    ) -> "LabelVector":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1:
            raise GraphFormatError("labels must be one-dimensional")
        if labels.size and labels.min() < 0:
            raise GraphFormatError("negative label")
        observed_max = int(labels.max()) if labels.size else 0
        if n_classes is None:
            n_classes = observed_max
        elif observed_max > n_classes:
            raise GraphFormatError(
                f"label {observed_max} exceeds declared class count {n_classes}"
            )
        counts = np.bincount(labels, minlength=n_classes + 1)[1 : n_classes + 1]
        if not allow_empty_classes:
            empty = np.flatnonzero(counts == 0)
            if empty.size:
                raise GraphFormatError(
                    f"class {int(empty[0]) + 1} has no members; classes must be "
                    "contiguous 1..K (remap labels upstream)"
                )
        labels = labels.copy()
        counts = counts.astype(np.int64)
        labels.setflags(write=False)
        counts.setflags(write=False)
        return cls(labels=labels, n_classes=int(n_classes), class_counts=counts)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_known(self) -> int:
        return int((self.labels > 0).sum())

    def masked(self, test_mask: np.ndarray) -> "LabelVector":
        """Copy with labels under ``test_mask`` set to 0 (unknown)."""
        out = self.labels.copy()
        out[test_mask] = 0
        return LabelVector.from_array(
            out, n_classes=self.n_classes, allow_empty_classes=True
        )


def load_edge_list(path, directed: bool = False, *, n: int | None = None) -> Graph:
    """Parse a whitespace-separated edge list file.

    0- vs 1-based ids are auto-detected from the minimum id seen (minimum of
    1 or more means 1-based; ids are shifted down internally and the base is
    recorded on the graph).
    """
    src, dst, wts = [], [], []
    any_weights = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'i j' or 'i j w', got {raw.strip()!r}"
                )
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
            src.append(i)
            dst.append(j)
            wts.append(w)
            if len(parts) == 3:
                any_weights = True
    if not src:
        raise GraphFormatError(f"{path}: empty edge list")

    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    min_id = int(min(src.min(), dst.min()))
    if min_id < 0:
        raise GraphFormatError(f"{path}: negative vertex id {min_id}")
    id_base = 1 if min_id >= 1 else 0
    if id_base:
        src = src - 1
        dst = dst - 1
    return Graph.from_edges(
        src,
        dst,
        n=n,
        directed=directed,
        weights=np.array(wts) if any_weights else None,
        id_base=id_base,
    )


def write_edge_list(g: Graph, path) -> None:
    """Serialize in canonical order, shifting ids back to the input base."""
    base = g.id_base
    with open(path, "w", encoding="utf-8") as fh:
        if g.weights is None:
            for i, j in zip(g.src, g.dst):
                fh.write(f"{i + base} {j + base}\n")
        else:
            for i, j, w in zip(g.src, g.dst, g.weights):
                fh.write(f"{i + base} {j + base} {w:g}\n")


def load_labels(path, n: int, *, allow_empty_classes: bool = False) -> LabelVector:
    """Parse a label file: one integer per line or CSV ``vertex,label`` rows."""
    values: list[tuple[int | None, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                if "," in line:
                    v_str, l_str = line.split(",")
                    values.append((int(v_str), int(l_str)))
                else:
                    values.append((None, int(line)))
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from None
    if not values:
        raise GraphFormatError(f"{path}: empty label file")
    if len(values) != n:
        raise GraphFormatError(
            f"{path}: {len(values)} labels for {n} vertices (length mismatch)"
        )

    if values[0][0] is None:
        labels = np.array([l for _, l in values], dtype=np.int64)
    else:
        verts = np.array([v for v, _ in values], dtype=np.int64)
        base = 1 if verts.min() >= 1 else 0
        verts = verts - base
        if verts.min() < 0 or verts.max() >= n or np.unique(verts).size != n:
            raise GraphFormatError(f"{path}: vertex column is not a permutation of 0..n-1")
        labels = np.zeros(n, dtype=np.int64)
        labels[verts] = [l for _, l in values]
    if labels.min() < 0:
        raise GraphFormatError(f"{path}: negative label")
    return LabelVector.from_array(labels, allow_empty_classes=allow_empty_classes)


def write_labels(y: LabelVector, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for l in y.labels:
            fh.write(f"{l}\n")


def permute_vertices(g: Graph, y: LabelVector, perm) -> tuple[Graph, LabelVector]:
    """Relabel vertex ``i`` as ``perm[i]``; used by invariance tests."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (g.n,) or np.unique(perm).size != g.n or (
        perm.size and (perm.min() != 0 or perm.max() != g.n - 1)
    ):
        raise GraphFormatError("perm must be a bijection on [0, n)")
    new_g = Graph.from_edges(
        perm[g.src],
        perm[g.dst],
        n=g.n,
        directed=g.directed,
        weights=g.weights,
        id_base=g.id_base,
    )
    new_labels = np.empty(g.n, dtype=np.int64)
    new_labels[perm] = y.labels
    new_y = LabelVector.from_array(
        new_labels, n_classes=y.n_classes, allow_empty_classes=True
    )
    return new_g, new_y
