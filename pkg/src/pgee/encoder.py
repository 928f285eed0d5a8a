"""Label-encoded vertex embedding.

The embedding assigns each vertex a K-dimensional row whose k-th entry is
the fraction of community k's members adjacent to that vertex: column k of
the (conceptual) weight matrix carries 1/n_k for vertices labeled k, and the
embedding is the adjacency matrix times that weight matrix. Unknown-label
vertices (label 0) contribute nothing to the weights but still receive a row.

The edge pass is a scatter-add over integer counts followed by one division
per column, giving O(nK + s) time and exact results regardless of how the
edge array is partitioned across workers.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import Graph, LabelVector

_DENSE_ORACLE_MAX_N = 200


@dataclass(frozen=True)
class Embedding:
    """Dense n x d embedding with column metadata.

    ``column_labels[j]`` is the 1-based community id of column j. When
    ``normalized`` every row has unit L2 norm or is all-zero; otherwise all
    entries lie in [0, 1].
    """

    values: np.ndarray
    column_labels: np.ndarray
    normalized: bool

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])


def one_hot_row_weights(y: LabelVector) -> tuple[np.ndarray, np.ndarray]:
    """Sparse description of the per-vertex weight rows.

    Returns ``(column, weight)`` arrays of length n: vertex i with label k
    has weight 1/n_k in column k-1; unknown vertices get column -1 and
    weight 0. The dense n x K weight matrix is never materialized.
    """
    labels = y.labels
    col = labels - 1
    weight = np.zeros(y.n, dtype=np.float64)
    known = labels > 0
    counts = y.class_counts[col[known]]
    if np.any(counts == 0):
        raise ValueError("internal: label present but class count is zero")
    weight[known] = 1.0 / counts
    return col, weight


def _edge_label_counts(
    g: Graph, labels: np.ndarray, n_classes: int, n_threads: int = 1
) -> np.ndarray:
    """Integer neighbor-label counts, shape (n, K).

    Entry (i, k) counts neighbors of i (out-neighbors when directed) that
    carry label k+1. Partition-independent: per-chunk counts are summed in
    exact integer arithmetic.
    """
    n, K = g.n, n_classes
    if K == 0 or g.s == 0:
        return np.zeros((n, K), dtype=np.int64)

    def chunk_counts(lo: int, hi: int) -> np.ndarray:
        src, dst = g.src[lo:hi], g.dst[lo:hi]
        out = np.zeros(n * K, dtype=np.int64)
        cd = labels[dst] - 1
        m = cd >= 0
        if m.any():
            out += np.bincount(src[m] * K + cd[m], minlength=n * K)
        if not g.directed:
            cs = labels[src] - 1
            m = cs >= 0
            if m.any():
                out += np.bincount(dst[m] * K + cs[m], minlength=n * K)
        return out

    if n_threads <= 1 or g.s < 4 * n_threads:
        total = chunk_counts(0, g.s)
    else:
        bounds = np.linspace(0, g.s, n_threads + 1, dtype=np.int64)
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(lambda b: chunk_counts(*b), zip(bounds[:-1], bounds[1:])))
        total = np.zeros(n * K, dtype=np.int64)
        for p in parts:
            total += p
    return total.reshape(n, K)


def embed(g: Graph, y: LabelVector, *, n_threads: int = 1) -> Embedding:
    """Unnormalized embedding: entry (i, k) = #neighbors of i in class k / n_k.

    Edge presence is binary; stored weights are ignored. Columns whose class
    has no known members (possible only for relaxed label vectors) are zero.
    """
    if g.n != y.n:
        raise ValueError(f"graph has {g.n} vertices but labels have {y.n}")
    counts = _edge_label_counts(g, y.labels, y.n_classes, n_threads)
    denom = y.class_counts.astype(np.float64)
    values = np.zeros(counts.shape, dtype=np.float64)
    nonzero = denom > 0
    values[:, nonzero] = counts[:, nonzero] / denom[nonzero]
    return Embedding(
        values=values,
        column_labels=np.arange(1, y.n_classes + 1, dtype=np.int64),
        normalized=False,
    )


def normalize_rows(z: Embedding) -> Embedding:
    """Scale each nonzero row to unit L2 norm; zero rows stay zero."""
    norms = np.sqrt(np.einsum("ij,ij->i", z.values, z.values))
    values = z.values.copy()
    pos = norms > 0
    values[pos] /= norms[pos, None]
    return Embedding(values=values, column_labels=z.column_labels, normalized=True)


def embed_dense_oracle(g: Graph, y: LabelVector) -> Embedding:
    """Reference embedding via explicit dense matrices (test oracle).

    Materializes the dense adjacency and weight matrices and multiplies
    them; restricted to small graphs.
    """
    if g.n > _DENSE_ORACLE_MAX_N:
        raise ValueError(f"dense oracle limited to n <= {_DENSE_ORACLE_MAX_N}")
    A = np.zeros((g.n, g.n), dtype=np.float64)
    A[g.src, g.dst] = 1.0
    if not g.directed:
        A[g.dst, g.src] = 1.0
    K = y.n_classes
    W = np.zeros((g.n, K), dtype=np.float64)
    col, weight = one_hot_row_weights(y)
    known = col >= 0
    W[np.flatnonzero(known), col[known]] = weight[known]
    return Embedding(
        values=A @ W,
        column_labels=np.arange(1, K + 1, dtype=np.int64),
        normalized=False,
    )


def write_embedding_csv(emb: Embedding, y: LabelVector, path) -> None:
    """CSV with header ``vertex,z_1,...,z_d`` plus a JSON sidecar.

    The sidecar (same path with ``.json`` appended) records column labels,
    the normalized flag, and per-class counts.
    """
    d = emb.d
    header = "vertex," + ",".join(f"z_{j + 1}" for j in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(emb.n):
            row = ",".join(repr(float(v)) for v in emb.values[i])
            fh.write(f"{i},{row}\n")
    sidecar = {
        "column_labels": [int(c) for c in emb.column_labels],
        "normalized": bool(emb.normalized),
        "n_k": [int(c) for c in y.class_counts],
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def read_embedding_csv(path) -> np.ndarray:
    """Parse an embedding CSV back into a value matrix (schema check aid)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "vertex" or any(
            h != f"z_{j + 1}" for j, h in enumerate(header[1:])
        ):
            raise ValueError(f"{path}: unexpected embedding header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
