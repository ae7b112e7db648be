"""Quality-ranked sample selection and the full two-fold selection pipeline.

Stratified selection keeps the observed positive-label fraction tau: round
(half away from zero) tau*k positives and the remaining k - round(tau*k)
negatives, each taken from the top of the per-class quality ranking. When a
class runs short the shortfall is reported, never back-filled from the other
class. The plain agreement filter (quality score > 0, no stratification, no k)
is kept as the unstratified baseline.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, positive_rate
from .scoring import ScoredDataset, cross_fold_score, derive_seed
from .trainer import Hyperparams, Model, train


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[str, ...]
    n_positive_selected: int
    n_negative_selected: int
    tau_used: float | None
    k_requested: int | None
    positive_shortfall: int = 0
    negative_shortfall: int = 0
    mode: str = "stratified"

    def __post_init__(self):
        if self.n_positive_selected + self.n_negative_selected != len(self.selected_ids):
            raise ValueError("selection counts inconsistent with id list")


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def _ranked_class_ids(scored: ScoredDataset, lowest: bool) -> tuple[list, list]:
    pos, neg = [], []
    for ex in scored.dataset:
        bucket = pos if scored.scheme.is_positive(ex.label) else neg
        bucket.append((ex.quality_score, ex.id))
    key = (lambda t: (t[0], t[1])) if lowest else (lambda t: (-t[0], t[1]))
    pos.sort(key=key)
    neg.sort(key=key)
    return [i for _, i in pos], [i for _, i in neg]


def _select_by_rank(scored: ScoredDataset, k: int, lowest: bool) -> SelectionResult:
    n = len(scored)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    tau = positive_rate(scored.dataset)
    n_pos_req = _round_half_away(tau * k)
    n_neg_req = k - n_pos_req
    pos_ids, neg_ids = _ranked_class_ids(scored, lowest)
    take_pos = pos_ids[:n_pos_req]
    take_neg = neg_ids[:n_neg_req]
    return SelectionResult(
        selected_ids=tuple(take_pos + take_neg),
        n_positive_selected=len(take_pos),
        n_negative_selected=len(take_neg),
        tau_used=tau,
        k_requested=k,
        positive_shortfall=n_pos_req - len(take_pos),
        negative_shortfall=n_neg_req - len(take_neg),
        mode="lowest-stratified" if lowest else "stratified",
    )


def select_stratified(scored: ScoredDataset, k: int) -> SelectionResult:
    """Top round(tau*k) positives and k - round(tau*k) negatives by quality score."""
    return _select_by_rank(scored, k, lowest=False)


def select_lowest_stratified(scored: ScoredDataset, k: int) -> SelectionResult:
    """Same stratification but ranking ascending by quality score."""
    return _select_by_rank(scored, k, lowest=True)


def select_ncv(scored: ScoredDataset, match: str = "binary") -> SelectionResult:
    """Agreement filter: keep examples whose opposite-fold prediction matches the label.

    match="binary" keeps quality score > 0 (same side of the referability
    boundary); match="exact" requires the argmax class to equal the label.
    """
    if match not in ("binary", "exact"):
        raise ValueError("match must be 'binary' or 'exact'")
    ids, n_pos, n_neg = [], 0, 0
    argmax = scored.probs.argmax(axis=1)
    for i, ex in enumerate(scored.dataset):
        keep = ex.quality_score > 0 if match == "binary" else int(argmax[i]) == ex.label
        if keep:
            ids.append(ex.id)
            if scored.scheme.is_positive(ex.label):
                n_pos += 1
            else:
                n_neg += 1
    return SelectionResult(
        selected_ids=tuple(ids), n_positive_selected=n_pos, n_negative_selected=n_neg,
        tau_used=None, k_requested=None, mode=f"ncv-{match}",
    )


@dataclass
class PipelineResult:
    model: Model
    scored: ScoredDataset
    selection: SelectionResult
    fold_models: tuple[Model, Model]
    k_used: int
    k_grid_tune_auc: dict[int, float]


def run_sncv_pipeline(dataset: Dataset, tune_set: Dataset, k, hp: Hyperparams,
                      seed: int) -> PipelineResult:
    """Cross-fold score, stratified-select, train the final model on the kept set.

    k may be a single size or an iterable of candidate sizes; with several
    candidates the size whose final model scores best on the tune set wins.
    """
    scored, m1, m2 = cross_fold_score(dataset, tune_set, hp, seed)
    k_values = [int(k)] if np.isscalar(k) else [int(v) for v in k]
    if not k_values:
        raise ValueError("k grid is empty")
    best = None
    grid_auc = {}
    for j, k_val in enumerate(k_values):
        selection = select_stratified(scored, k_val)
        subset = dataset.subset(selection.selected_ids)
        model = train(subset, tune_set,
                      dataclasses.replace(hp, seed=derive_seed(seed, f"train-final-{j}")))
        grid_auc[k_val] = model.tune_auc_at_stop
        if best is None or model.tune_auc_at_stop > best[0].tune_auc_at_stop:
            best = (model, selection, k_val)
    model, selection, k_used = best
    return PipelineResult(model=model, scored=scored, selection=selection,
                          fold_models=(m1, m2), k_used=k_used, k_grid_tune_auc=grid_auc)


def selection_summary(result: SelectionResult) -> dict:
    return {
        "mode": result.mode,
        "k_requested": result.k_requested,
        "tau_used": result.tau_used,
        "n_selected": len(result.selected_ids),
        "n_positive_selected": result.n_positive_selected,
        "n_negative_selected": result.n_negative_selected,
        "positive_shortfall": result.positive_shortfall,
        "negative_shortfall": result.negative_shortfall,
    }
