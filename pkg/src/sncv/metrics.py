"""ROC/AUC statistics: midrank AUC with retained placement components, variance
and covariance of correlated AUCs, two-tailed and non-inferiority z-tests, and
stratified bootstrap confidence intervals.

The AUC numerator is a sum of half-integers, exact in float64 up to the sizes
used here, and is divided by n_pos*n_neg in a single operation; this makes the
estimate match exhaustive pair counting bitwise and gives exact midrank
symmetry under score negation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


@dataclass(frozen=True)
class RocResult:
    auc: float
    n_positive: int
    n_negative: int
    # per-example structural components: positive placements average to auc,
    # negative placements average to 1 - auc
    pos_placements: np.ndarray
    neg_placements: np.ndarray


@dataclass(frozen=True)
class DelongComparison:
    auc_a: float
    auc_b: float
    delta: float
    variance_of_delta: float
    z: float
    p_two_tailed: float | None = None
    p_noninferiority: float | None = None
    margin: float | None = None
    non_inferior: bool | None = None


def _midrank(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    z = x[order]
    n = len(z)
    starts = np.flatnonzero(np.r_[True, z[1:] != z[:-1]])
    ends = np.r_[starts[1:], n]
    mids = 0.5 * (starts + ends - 1) + 1.0
    out = np.empty(n)
    out[order] = np.repeat(mids, ends - starts)
    return out


def _validate(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned 1-d arrays")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    uniq = set(np.unique(labels).tolist())
    if not uniq <= {0, 1}:
        raise ValueError(f"labels must be binary 0/1, got {sorted(uniq)}")
    if uniq != {0, 1}:
        raise ValueError("degenerate-labels: need at least one positive and one negative")
    return scores, labels.astype(int)


def roc_auc(scores, labels) -> RocResult:
    """Mann-Whitney midrank AUC with ties counted 1/2, O(n log n)."""
    scores, labels = _validate(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    m, n = len(pos), len(neg)
    tz = _midrank(np.concatenate([pos, neg]))
    tx = _midrank(pos)
    ty = _midrank(neg)
    pos_placements = (tz[:m] - tx) / n
    neg_placements = (tz[m:] - ty) / m
    numerator = float((tz[:m] - tx).sum())
    auc = numerator / (m * n)
    return RocResult(auc=auc, n_positive=m, n_negative=n,
                     pos_placements=pos_placements, neg_placements=neg_placements)


def _delta_variance(a: RocResult, b: RocResult) -> float:
    m, n = a.n_positive, a.n_negative
    s_pos = np.cov(np.stack([a.pos_placements, b.pos_placements]))
    s_neg = np.cov(np.stack([a.neg_placements, b.neg_placements]))
    s = s_pos / m + s_neg / n
    return float(s[0, 0] + s[1, 1] - 2.0 * s[0, 1])


def delong_two_tailed(scores_a, scores_b, labels) -> DelongComparison:
    """Two-tailed test of equal AUC for two score vectors on the same labels."""
    ra = roc_auc(scores_a, labels)
    rb = roc_auc(scores_b, labels)
    if ra.n_positive < 2 or ra.n_negative < 2:
        raise ValueError("degenerate-labels: need >= 2 positives and >= 2 negatives")
    var = _delta_variance(ra, rb)
    delta = ra.auc - rb.auc
    if var <= 0:
        if delta == 0:
            return DelongComparison(auc_a=ra.auc, auc_b=rb.auc, delta=0.0,
                                    variance_of_delta=0.0, z=0.0, p_two_tailed=1.0)
        raise ValueError("degenerate-variance: zero variance with nonzero AUC difference")
    z = delta / np.sqrt(var)
    p = float(2.0 * norm.sf(abs(z)))
    return DelongComparison(auc_a=ra.auc, auc_b=rb.auc, delta=delta,
                            variance_of_delta=var, z=float(z), p_two_tailed=p)


def delong_noninferiority(scores_candidate, scores_reference, labels,
                          margin: float, alpha: float = 0.05) -> DelongComparison:
    """One-sided test of H0: AUC_candidate <= AUC_reference - margin.

    Rejecting H0 (p < alpha) declares the candidate non-inferior. With zero
    variance the continuity limit applies: p = 0 when delta + margin > 0,
    p = 1/2 at the boundary, p = 1 below it.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    ra = roc_auc(scores_candidate, labels)
    rb = roc_auc(scores_reference, labels)
    if ra.n_positive < 2 or ra.n_negative < 2:
        raise ValueError("degenerate-labels: need >= 2 positives and >= 2 negatives")
    var = _delta_variance(ra, rb)
    delta = ra.auc - rb.auc
    if var <= 0:
        shifted = delta + margin
        p = 0.0 if shifted > 0 else (0.5 if shifted == 0 else 1.0)
        z = float("inf") if shifted > 0 else (0.0 if shifted == 0 else float("-inf"))
    else:
        z = float((delta + margin) / np.sqrt(var))
        p = float(norm.sf(z))
    return DelongComparison(auc_a=ra.auc, auc_b=rb.auc, delta=delta,
                            variance_of_delta=max(var, 0.0), z=z,
                            p_noninferiority=p, margin=margin, non_inferior=p < alpha)


def bootstrap_auc_ci(scores, labels, n_boot: int, seed: int,
                     level: float = 0.95) -> tuple[float, float]:
    """Percentile CI from seeded stratified resamples (class counts preserved)."""
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    scores, labels = _validate(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    m, n = len(pos), len(neg)
    reps = np.empty(n_boot)
    ones = np.ones(m, dtype=int)
    zeros = np.zeros(n, dtype=int)
    lab = np.concatenate([ones, zeros])
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        sample = np.concatenate([pos[rng.integers(0, m, size=m)],
                                 neg[rng.integers(0, n, size=n)]])
        reps[b] = roc_auc(sample, lab).auc
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [tail, 1.0 - tail])
    return float(lo), float(hi)


def confusion_matrix(labels_a, labels_b, scheme) -> np.ndarray:
    """2x2 counts of binarized labels_a (rows) against binarized labels_b (columns)."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label lists must have equal length")
    a_bin = scheme.positive_mask(a).astype(int)
    b_bin = scheme.positive_mask(b).astype(int)
    out = np.zeros((2, 2), dtype=int)
    for i in range(2):
        for j in range(2):
            out[i, j] = int(np.sum((a_bin == i) & (b_bin == j)))
    return out


def comparison_record(name_a: str, name_b: str, comp: DelongComparison) -> dict:
    """JSON-ready summary of one model-pair comparison."""
    record = {
        "model_a": name_a,
        "model_b": name_b,
        "auc_a": comp.auc_a,
        "auc_b": comp.auc_b,
        "delta": comp.delta,
        "variance_of_delta": comp.variance_of_delta,
        "z": comp.z,
    }
    if comp.p_two_tailed is not None:
        record["p_two_tailed"] = comp.p_two_tailed
    if comp.p_noninferiority is not None:
        record["p_noninferiority"] = comp.p_noninferiority
        record["margin"] = comp.margin
        record["decision"] = "non-inferior" if comp.non_inferior else "-"
    return record
