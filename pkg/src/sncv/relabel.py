"""Simulated relabeling of low-quality-score examples and grader-background analysis.

A specialist oracle re-annotates the globally lowest-scored tranche; with a
zero error rate it reproduces the hidden true labels. Reports include the
binarized confusion of original versus oracle labels, four-class and binarized
relabel rates, and how often the oracle sides with the cross-fold model over
the original label on boundary disagreements.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .metrics import confusion_matrix
from .scoring import ScoredDataset
from .synth import GRADER_ROLES, GraderProfile


@dataclass(frozen=True)
class SpecialistOracle:
    error_rate: float = 0.0
    deviation_confusion: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.error_rate < 1:
            raise ValueError("error_rate must be in [0, 1)")
        if self.deviation_confusion is not None:
            conf = np.asarray(self.deviation_confusion, dtype=float)
            object.__setattr__(self, "deviation_confusion", conf)
            if (conf < 0).any() or np.abs(conf.sum(axis=1) - 1.0).max() > 1e-9:
                raise ValueError("deviation confusion rows must be stochastic")

    def label(self, example_id: str, true_label: int, n_classes: int) -> int:
        digest = hashlib.blake2s(f"{self.seed}:{example_id}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        if self.error_rate == 0 or rng.random() >= self.error_rate:
            return true_label
        if self.deviation_confusion is not None:
            row = self.deviation_confusion[true_label]
        else:
            row = np.full(n_classes, 1.0 / (n_classes - 1))
            row[true_label] = 0.0
        draw = int(np.searchsorted(np.cumsum(row), rng.random(), side="right"))
        return min(draw, n_classes - 1)


@dataclass(frozen=True)
class RelabelRow:
    id: str
    qs: float
    original_label: int
    oracle_label: int
    true_label: int
    model_side_win: bool


@dataclass
class RelabelReport:
    n_relabeled: int
    confusion: np.ndarray
    relabel_rate: float
    binarized_relabel_rate: float
    model_agreement_rate: float
    model_agreement_rate_all: float
    n_boundary_disagreements: int
    rows: list[RelabelRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_relabeled": self.n_relabeled,
            "confusion": self.confusion.tolist(),
            "relabel_rate": self.relabel_rate,
            "binarized_relabel_rate": self.binarized_relabel_rate,
            "model_agreement_rate": self.model_agreement_rate,
            "model_agreement_rate_all": self.model_agreement_rate_all,
            "n_boundary_disagreements": self.n_boundary_disagreements,
        }


def run_relabel_experiment(scored: ScoredDataset, n_lowest: int,
                           oracle: SpecialistOracle) -> RelabelReport:
    """Send the n_lowest globally lowest-scored examples to the oracle.

    The primary agreement rate is computed over tranche members whose quality
    score is negative (model and label disagree at the boundary); the
    unconditional rate over the whole tranche is also reported.
    """
    n = len(scored)
    if not 1 <= n_lowest <= n:
        raise ValueError(f"n_lowest must be in [1, {n}]")
    scheme = scored.scheme
    for ex in scored.dataset:
        if ex.true_label is None:
            raise ValueError("no-ground-truth: relabel experiment needs true labels")

    order = sorted(range(n), key=lambda i: (scored.dataset.examples[i].quality_score,
                                            scored.dataset.examples[i].id))
    tranche = order[:n_lowest]
    argmax = scored.probs.argmax(axis=1)

    rows = []
    originals, oracles = [], []
    n_boundary = 0
    n_model_wins = 0
    n_model_side_all = 0
    for i in tranche:
        ex = scored.dataset.examples[i]
        new_label = oracle.label(ex.id, ex.true_label, scheme.n_classes)
        model_side = scheme.is_positive(int(argmax[i]))
        oracle_side = scheme.is_positive(new_label)
        side_win = oracle_side == model_side
        if side_win:
            n_model_side_all += 1
        if ex.quality_score < 0:
            n_boundary += 1
            if side_win:
                n_model_wins += 1
        rows.append(RelabelRow(id=ex.id, qs=ex.quality_score, original_label=ex.label,
                               oracle_label=new_label, true_label=ex.true_label,
                               model_side_win=side_win))
        originals.append(ex.label)
        oracles.append(new_label)

    originals = np.array(originals)
    oracles = np.array(oracles)
    return RelabelReport(
        n_relabeled=n_lowest,
        confusion=confusion_matrix(originals, oracles, scheme),
        relabel_rate=float((originals != oracles).mean()),
        binarized_relabel_rate=float(
            (scheme.positive_mask(originals) != scheme.positive_mask(oracles)).mean()
        ),
        model_agreement_rate=(n_model_wins / n_boundary) if n_boundary else float("nan"),
        model_agreement_rate_all=n_model_side_all / n_lowest,
        n_boundary_disagreements=n_boundary,
        rows=rows,
    )


@dataclass(frozen=True)
class GraderStats:
    grader_id: str
    role: str | None
    n_examples: int
    mismatch_rate: float
    flagged: bool


@dataclass
class GraderReport:
    threshold: float
    graders: list[GraderStats]
    flagged_role_shares: dict[str, float]
    pool_role_shares: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "graders": [
                {
                    "grader_id": g.grader_id,
                    "role": g.role,
                    "n_examples": g.n_examples,
                    "mismatch_rate": g.mismatch_rate,
                    "flagged": g.flagged,
                }
                for g in self.graders
            ],
            "flagged_role_shares": self.flagged_role_shares,
            "pool_role_shares": self.pool_role_shares,
        }


def grader_mismatch_analysis(scored: ScoredDataset, pool: list[GraderProfile] | None = None,
                             threshold: float = 0.30) -> GraderReport:
    """Per-grader share of labels the cross-fold model disputed (quality score < 0).

    Graders above the threshold are flagged; role shares compare the flagged
    group's composition against the whole pool's (each grader counted once).
    """
    role_by_grader = {p.grader_id: p.role for p in pool} if pool else {}
    by_grader: dict[str, list[float]] = {}
    for ex in scored.dataset:
        if ex.grader_id is None:
            continue
        by_grader.setdefault(ex.grader_id, []).append(ex.quality_score)
    if not by_grader:
        raise ValueError("no grader ids present in scored dataset")

    stats = []
    for gid in sorted(by_grader):
        qs = np.array(by_grader[gid])
        rate = float((qs < 0).mean())
        stats.append(GraderStats(
            grader_id=gid, role=role_by_grader.get(gid), n_examples=len(qs),
            mismatch_rate=rate, flagged=rate > threshold,
        ))

    def role_shares(members: list[GraderStats]) -> dict[str, float]:
        if not members:
            return {role: 0.0 for role in GRADER_ROLES}
        counts = {role: 0 for role in GRADER_ROLES}
        for g in members:
            if g.role in counts:
                counts[g.role] += 1
        total = len(members)
        return {role: counts[role] / total for role in GRADER_ROLES}

    return GraderReport(
        threshold=threshold,
        graders=stats,
        flagged_role_shares=role_shares([g for g in stats if g.flagged]),
        pool_role_shares=role_shares(stats),
    )


def filter_by_grader_role(dataset: Dataset, pool: list[GraderProfile], roles) -> Dataset:
    """Subset of examples graded by any of the given roles."""
    roles = list(roles)
    for role in roles:
        if role not in GRADER_ROLES:
            raise ValueError(f"unknown grader role {role!r}")
    if not roles:
        warnings.warn("empty role list: returning an empty dataset")
    wanted = {p.grader_id for p in pool if p.role in set(roles)}
    kept = [ex for ex in dataset if ex.grader_id in wanted]
    return Dataset(scheme=dataset.scheme, examples=kept, feature_dim=dataset.feature_dim)
