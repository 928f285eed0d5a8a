"""Community importance scoring and the principal embedding.

Each community's score is the spread of its embedding column's class means
divided by the largest within-class standard deviation of that column: a
column whose average connectivity is (near-)constant across classes carries
no label information and scores near zero. Communities scoring above an
adaptive threshold form the principal set; restricting the embedding to
those columns and re-normalizing rows yields the principal embedding.

The threshold is the larger of 0.7 and the value found by recursively
locating three change-point "elbows" in the descending score vector with a
two-group Gaussian profile likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import Embedding, embed, normalize_rows
from .graph import Graph, LabelVector

SCORE_FLOOR = 0.7
_VARIANCE_FLOOR = 1e-12
_ZERO_NUMERATOR_TOL = 1e-12


@dataclass
class CommunityScoreReport:
    """Per-community scores, the threshold, and the detected principal set.

    ``mu_hat[k-1, l-1]`` is the class-l mean of embedding column k;
    ``sigma_hat`` the matching within-class standard deviations (NaN for
    classes excluded from the statistics). ``lambda_hat[k-1]`` is community
    k's score, in [0, +inf]. Threshold fields are None until a threshold is
    applied. ``fallback_full_embedding`` flags that the principal set came
    out empty and the full embedding was returned instead.
    """

    lambda_hat: np.ndarray
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    epsilon_elbow: float | None = None
    epsilon: float | None = None
    principal_set: np.ndarray | None = None
    fallback_full_embedding: bool = False
    excluded_classes: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))

    @property
    def n_communities(self) -> int:
        return int(self.lambda_hat.shape[0])


class CommunityScoreError(ValueError):
    """Raised when score statistics are undefined for the given labels."""


def _class_moments(values: np.ndarray, labels: np.ndarray, n_classes: int):
    """Per-class sums and sums of squares of each column, shape (K, d)."""
    known = labels > 0
    rows = values[known]
    lab = labels[known] - 1
    d = values.shape[1]
    s1 = np.zeros((n_classes, d), dtype=np.float64)
    s2 = np.zeros((n_classes, d), dtype=np.float64)
    if rows.shape[0]:
        order = np.argsort(lab, kind="stable")
        lab_sorted = lab[order]
        rows_sorted = rows[order]
        boundaries = np.flatnonzero(np.diff(lab_sorted)) + 1
        starts = np.concatenate([[0], boundaries])
        present = lab_sorted[starts]
        s1[present] = np.add.reduceat(rows_sorted, starts, axis=0)
        s2[present] = np.add.reduceat(rows_sorted**2, starts, axis=0)
    return s1, s2


def community_scores(
    z: Embedding,
    y: LabelVector,
    *,
    allow_sparse_classes: bool = False,
    variance_mode: str = "printed",
) -> CommunityScoreReport:
    """Score every community from the normalized embedding.

    Only vertices with known labels enter the statistics. Each class needs
    at least two members; with ``allow_sparse_classes`` smaller classes are
    instead dropped from the statistics and their own columns score 0.

    ``variance_mode`` selects the within-class variance estimator:
    ``"printed"`` uses sum(z^2)/(n_l - 1) - mean^2 (the pipeline default);
    ``"unbiased"`` uses the textbook estimator, for sensitivity checks.
    """
    if not z.normalized:
        raise ValueError("community scores require a row-normalized embedding")
    if z.n != y.n:
        raise ValueError("embedding and labels disagree on vertex count")
    if variance_mode not in ("printed", "unbiased"):
        raise ValueError(f"unknown variance_mode {variance_mode!r}")
    K = y.n_classes
    counts = y.class_counts.astype(np.int64)
    small = counts < 2
    if small.any() and not allow_sparse_classes:
        k_bad = int(np.flatnonzero(small)[0]) + 1
        raise CommunityScoreError(
            f"class {k_bad} has {int(counts[k_bad - 1])} member(s); "
            "need >= 2 for within-class variance"
        )
    valid = ~small
    if not valid.any():
        lam = np.zeros(K)
        nan = np.full((K, K), np.nan)
        return CommunityScoreReport(
            lambda_hat=lam,
            mu_hat=nan,
            sigma_hat=nan.copy(),
            excluded_classes=np.flatnonzero(small) + 1,
        )

    s1, s2 = _class_moments(z.values, y.labels, K)
    n_l = counts.astype(np.float64)

    # (k, l) orientation: community k indexes rows, conditioning class l columns.
    mu = np.full((K, K), np.nan)
    sigma2 = np.full((K, K), np.nan)
    v = np.flatnonzero(valid)
    mu[:, v] = (s1[v] / n_l[v, None]).T
    if variance_mode == "printed":
        sigma2[:, v] = (s2[v] / (n_l[v, None] - 1.0)).T - mu[:, v] ** 2
    else:
        sigma2[:, v] = ((s2[v] - n_l[v, None] * (s1[v] / n_l[v, None]) ** 2) / (
            n_l[v, None] - 1.0
        )).T
    np.clip(sigma2, 0.0, None, out=sigma2)
    sigma = np.sqrt(sigma2)

    numer = np.nanmax(mu, axis=1) - np.nanmin(mu, axis=1)
    denom = np.nanmax(sigma, axis=1)
    lam = np.empty(K, dtype=np.float64)
    zero_den = denom == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam[~zero_den] = numer[~zero_den] / denom[~zero_den]
    lam[zero_den & (numer <= _ZERO_NUMERATOR_TOL)] = 0.0
    lam[zero_den & (numer > _ZERO_NUMERATOR_TOL)] = np.inf
    lam[small] = 0.0  # columns of dropped classes carry no usable statistics

    return CommunityScoreReport(
        lambda_hat=lam,
        mu_hat=mu,
        sigma_hat=sigma,
        excluded_classes=np.flatnonzero(small).astype(np.int64) + 1,
    )


def profile_likelihood_elbow(values) -> int:
    """Change point of a descending vector under a two-group Gaussian model.

    Splits the vector into a head group {1..q} and tail group {q+1..len},
    each with its own mean and a pooled maximum-likelihood variance
    (divisor len, floored at 1e-12), and returns the q in [1, len-1]
    maximizing the profile log-likelihood. Ties break to the smallest q.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two values to locate an elbow")
    if np.any(np.diff(x) > 0):
        raise ValueError("values must be sorted in descending order")
    m = x.size
    csum = np.cumsum(x)
    csq = np.cumsum(x**2)
    total_sum, total_sq = csum[-1], csq[-1]

    best_q, best_ll = 1, -math.inf
    for q in range(1, m):
        s1, s2 = csum[q - 1], csq[q - 1]
        mu1 = s1 / q
        mu2 = (total_sum - s1) / (m - q)
        # Sum of squared deviations around the two group means.
        ss = (s2 - q * mu1**2) + ((total_sq - s2) - (m - q) * mu2**2)
        var = max(ss / m, _VARIANCE_FLOOR)
        ll = -0.5 * m * math.log(2.0 * math.pi * var) - ss / (2.0 * var)
        if ll > best_ll:
            best_ll, best_q = ll, q
    return best_q


def third_elbow_threshold(
    lambda_hat, *, n_elbows: int = 3, floor: float = SCORE_FLOOR
) -> tuple[float, float]:
    """Adaptive score threshold: max of the recursive elbow value and 0.7.

    Sorts the scores descending and walks ``n_elbows`` successive elbows,
    each computed on the suffix past the previous one; the data-driven part
    of the threshold is the score ranked immediately after the deepest
    elbow reached (0 if none is computable). Infinite scores sit above any
    threshold and are ignored when locating elbows.
    """
    lam = np.asarray(lambda_hat, dtype=np.float64)
    finite = np.sort(lam[np.isfinite(lam)])[::-1]
    if finite.size < 2:
        return 0.0, floor
    cut = 0
    for _ in range(n_elbows):
        suffix = finite[cut:]
        if suffix.size < 2:
            break
        cut += profile_likelihood_elbow(suffix)
    epsilon_elbow = float(finite[cut]) if cut < finite.size else 0.0
    return epsilon_elbow, max(epsilon_elbow, floor)


def apply_threshold(
    report: CommunityScoreReport,
    *,
    epsilon_override: float | None = None,
    n_elbows: int = 3,
) -> CommunityScoreReport:
    """Fill the threshold fields and the principal set (strict inequality)."""
    epsilon_elbow, epsilon = third_elbow_threshold(report.lambda_hat, n_elbows=n_elbows)
    if epsilon_override is not None:
        epsilon = float(epsilon_override)
    principal = np.flatnonzero(report.lambda_hat > epsilon).astype(np.int64) + 1
    return replace(
        report,
        epsilon_elbow=epsilon_elbow,
        epsilon=epsilon,
        principal_set=principal,
    )


def principal_embedding(z: Embedding, report: CommunityScoreReport) -> Embedding:
    """Restrict columns to the principal set and re-normalize each row.

    All n rows are retained. An empty principal set falls back to the full
    embedding and sets ``fallback_full_embedding`` on the report.
    """
    if report.principal_set is None:
        raise ValueError("apply_threshold before extracting the principal embedding")
    if report.principal_set.size == 0:
        report.fallback_full_embedding = True
        return normalize_rows(z)
    col_index = {int(c): j for j, c in enumerate(z.column_labels)}
    keep = np.array([col_index[int(k)] for k in report.principal_set], dtype=np.int64)
    restricted = Embedding(
        values=z.values[:, keep],
        column_labels=z.column_labels[keep],
        normalized=False,
    )
    return normalize_rows(restricted)


def fit_transform(
    g: Graph,
    y: LabelVector,
    *,
    epsilon_override: float | None = None,
    n_elbows: int = 3,
    variance_mode: str = "printed",
    allow_sparse_classes: bool = False,
    n_threads: int = 1,
) -> tuple[Embedding, Embedding, CommunityScoreReport]:
    """Full pipeline: embed, normalize, score, threshold, restrict.

    Returns (full normalized embedding, principal embedding, score report).
    Deterministic in its inputs.
    """
    z = normalize_rows(embed(g, y, n_threads=n_threads))
    report = community_scores(
        z, y, allow_sparse_classes=allow_sparse_classes, variance_mode=variance_mode
    )
    report = apply_threshold(
        report, epsilon_override=epsilon_override, n_elbows=n_elbows
    )
    principal = principal_embedding(z, report)
    return z, principal, report


def write_scores_csv(report: CommunityScoreReport, path) -> None:
    """``community,lambda,principal`` rows with threshold header comments."""
    if report.epsilon is None or report.principal_set is None:
        raise ValueError("threshold not applied; nothing to write")
    principal = set(int(k) for k in report.principal_set)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# epsilon_elbow={report.epsilon_elbow!r}\n")
        fh.write(f"# epsilon={report.epsilon!r}\n")
        fh.write("community,lambda,principal\n")
        for k, lam in enumerate(report.lambda_hat, start=1):
            fh.write(f"{k},{'inf' if math.isinf(lam) else repr(float(lam))},{k in principal}\n")
