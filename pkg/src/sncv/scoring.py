"""Quality scores from cross-fold predictions.

Each example's quality score is the opposite-fold model's maximum softmax
probability, signed positive when the predicted class and the observed label
fall on the same side of the referability boundary and negative otherwise.
For K classes the magnitude is therefore confined to [1/K, 1], leaving an
empty gap around zero.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Example, ClassScheme, split_random
from .trainer import Hyperparams, Model, predict_proba, train

MIN_FOLD_SIZE = 100


@dataclass
class ScoredDataset:
    """Dataset with fold + quality_score set, plus the cross-fold probability rows."""

    dataset: Dataset
    probs: np.ndarray

    def __post_init__(self):
        k = self.dataset.scheme.n_classes
        if self.probs.shape != (len(self.dataset), k):
            raise ValueError("probs must be (n_examples, n_classes)")
        for ex in self.dataset:
            if ex.quality_score is None or ex.fold is None:
                raise ValueError(f"example {ex.id!r} missing fold or quality_score")

    def __len__(self) -> int:
        return len(self.dataset)

    @property
    def scheme(self) -> ClassScheme:
        return self.dataset.scheme

    def quality_scores(self) -> np.ndarray:
        return np.array([ex.quality_score for ex in self.dataset], dtype=float)


def quality_score(probs, label: int, scheme: ClassScheme) -> float:
    """Signed max-probability confidence; sign set at the referability boundary.

    Argmax ties break toward the lowest class index.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (scheme.n_classes,):
        raise ValueError(f"probability vector must have length {scheme.n_classes}")
    if (p < 0).any():
        raise ValueError("invalid probability vector: negative entry")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"invalid probability vector: sum {p.sum()} != 1")
    if not 0 <= label < scheme.n_classes:
        raise ValueError("label out of range")
    i = int(np.argmax(p))
    top = float(p[i])
    same_side = scheme.is_positive(i) == scheme.is_positive(label)
    return top if same_side else -top


def quality_scores_batch(probs: np.ndarray, labels: np.ndarray, scheme: ClassScheme) -> np.ndarray:
    i = probs.argmax(axis=1)
    top = probs[np.arange(len(labels)), i]
    same = scheme.positive_mask(i) == scheme.positive_mask(labels)
    return np.where(same, top, -top)


def cross_fold_score(dataset: Dataset, tune_set: Dataset, hp: Hyperparams, seed: int,
                     min_fold_size: int = MIN_FOLD_SIZE) -> tuple[ScoredDataset, Model, Model]:
    """Split, train one model per fold, score every example with the opposite fold.

    No example is ever scored by a model that saw it in training. Returns the
    scored dataset plus both fold models for downstream comparability checks.
    """
    if len(dataset) < 2 * min_fold_size:
        raise ValueError(f"dataset too small for cross-fold scoring (< {2 * min_fold_size})")
    d1, d2 = split_random(dataset, seed=derive_seed(seed, "split"))
    try:
        m1 = train(d1, tune_set, dataclasses.replace(hp, seed=derive_seed(seed, "train-d1")))
    except ValueError as err:
        raise ValueError(f"fold-D1: {err}") from err
    try:
        m2 = train(d2, tune_set, dataclasses.replace(hp, seed=derive_seed(seed, "train-d2")))
    except ValueError as err:
        raise ValueError(f"fold-D2: {err}") from err

    fold_by_id = {ex.id: "D1" for ex in d1}
    fold_by_id.update({ex.id: "D2" for ex in d2})
    scorer_by_fold = {"D1": m2, "D2": m1}  # opposite-fold model

    n = len(dataset)
    k = dataset.scheme.n_classes
    probs = np.empty((n, k))
    X = dataset.features_matrix()
    idx_by_fold = {
        fold: [i for i, ex in enumerate(dataset) if fold_by_id[ex.id] == fold]
        for fold in ("D1", "D2")
    }
    for fold, idx in idx_by_fold.items():
        probs[idx] = predict_proba(scorer_by_fold[fold], X[idx])
    qs = quality_scores_batch(probs, dataset.labels_array(), dataset.scheme)

    scored_examples = [
        dataclasses.replace(ex, fold=fold_by_id[ex.id], quality_score=float(qs[i]))
        for i, ex in enumerate(dataset)
    ]
    scored = ScoredDataset(
        dataset=Dataset(scheme=dataset.scheme, examples=scored_examples,
                        feature_dim=dataset.feature_dim),
        probs=probs,
    )
    return scored, m1, m2


def derive_seed(seed: int, stage: str) -> int:
    """Stable sub-seed for a named pipeline stage."""
    digest = hashlib.blake2s(f"{seed}:{stage}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2**63)


def qs_histogram(scored: ScoredDataset, bin_width: float) -> list[tuple[float, float, int, int]]:
    """Binned counts over [-1, 1], split by the observed binarized label.

    Returns rows (bin_lo, bin_hi, count_nonreferable, count_referable).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    qs = scored.quality_scores()
    referable = scored.dataset.binary_labels().astype(bool)
    n_bins = int(np.ceil(2.0 / bin_width - 1e-9))
    edges = -1.0 + bin_width * np.arange(n_bins + 1)
    edges[-1] = max(edges[-1], 1.0)
    c_non, _ = np.histogram(qs[~referable], bins=edges)
    c_ref, _ = np.histogram(qs[referable], bins=edges)
    return [
        (float(edges[i]), float(edges[i + 1]), int(c_non[i]), int(c_ref[i]))
        for i in range(n_bins)
    ]


def write_scored_dataset(scored: ScoredDataset, path) -> None:
    """Dataset CSV plus fold, quality_score and the cross-fold probability columns."""
    d = scored.dataset.feature_dim
    k = scored.scheme.n_classes
    header = (["id", "label", "true_label", "grader_id"]
              + [f"f{i}" for i in range(d)]
              + ["fold", "quality_score"]
              + [f"p{i}" for i in range(k)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, ex in enumerate(scored.dataset):
            row = (
                [ex.id, str(ex.label),
                 "" if ex.true_label is None else str(ex.true_label),
                 "" if ex.grader_id is None else ex.grader_id]
                + [repr(float(v)) for v in ex.features]
                + [ex.fold, repr(float(ex.quality_score))]
                + [repr(float(v)) for v in scored.probs[i]]
            )
            w.writerow(row)


def read_scored_dataset(path, scheme: ClassScheme) -> ScoredDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        col = {name: i for i, name in enumerate(header)}
        for required in ("id", "label", "fold", "quality_score", "p0"):
            if required not in col:
                raise ValueError(f"scored dataset missing column {required!r}")
        d = sum(1 for c in header if c.startswith("f") and c[1:].isdigit() and c != "fold")
        k = scheme.n_classes
        examples = []
        prob_rows = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"row {row_no}: expected {len(header)} columns, got {len(row)}")
            label = int(row[col["label"]])
            if not 0 <= label < k:
                raise ValueError(f"row {row_no}: label-out-of-range")
            true_label = None
            if "true_label" in col and row[col["true_label"]] != "":
                true_label = int(row[col["true_label"]])
            grader_id = row[col["grader_id"]] or None if "grader_id" in col else None
            feats = np.array([float(row[col[f"f{i}"]]) for i in range(d)])
            examples.append(Example(
                id=row[col["id"]], features=feats, label=label, true_label=true_label,
                grader_id=grader_id, fold=row[col["fold"]],
                quality_score=float(row[col["quality_score"]]),
            ))
            prob_rows.append([float(row[col[f"p{i}"]]) for i in range(k)])
    return ScoredDataset(
        dataset=Dataset(scheme=scheme, examples=examples, feature_dim=d),
        probs=np.array(prob_rows),
    )
