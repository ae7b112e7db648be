"""Core data model: class schemes, labeled examples, deterministic splits, CSV I/O.

Labels are integer class indices; the class-name mapping and the referability
boundary (which classes count as positive) live in a ClassScheme sidecar. The
binarization rule defined here (label in positive set -> positive) is the
single source of truth used by every other module.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FOLD_NAMES = ("D1", "D2")


@dataclass(frozen=True)
class ClassScheme:
    """Ordered class names plus the subset of indices that trigger referral."""

    class_names: tuple[str, ...]
    positive_indices: frozenset[int]

    def __post_init__(self):
        names = tuple(self.class_names)
        pos = frozenset(int(i) for i in self.positive_indices)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "positive_indices", pos)
        if len(names) < 2:
            raise ValueError("class scheme needs at least 2 classes")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        if not pos:
            raise ValueError("positive class set must be non-empty")
        if not pos.issubset(range(len(names))):
            raise ValueError("positive index out of range")
        if pos == frozenset(range(len(names))):
            raise ValueError("positive class set must be a proper subset")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def is_positive(self, label: int) -> bool:
        return label in self.positive_indices

    def positive_mask(self, labels) -> np.ndarray:
        """Boolean mask of labels falling on the referable side."""
        return np.isin(np.asarray(labels), sorted(self.positive_indices))


def default_scheme() -> ClassScheme:
    """Four-tier risk scale with the top two tiers referable."""
    return ClassScheme(
        class_names=("non-glaucomatous", "low-risk", "high-risk", "likely-glaucoma"),
        positive_indices=frozenset({2, 3}),
    )


@dataclass(frozen=True)
class Example:
    id: str
    features: np.ndarray
    label: int
    true_label: int | None = None
    grader_id: str | None = None
    fold: str | None = None
    quality_score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        if self.fold is not None and self.fold not in FOLD_NAMES:
            raise ValueError(f"fold must be one of {FOLD_NAMES}, got {self.fold!r}")


@dataclass
class Dataset:
    """Immutable-by-convention collection of examples sharing one scheme."""

    scheme: ClassScheme
    examples: list[Example]
    feature_dim: int

    _matrix_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        k = self.scheme.n_classes
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise ValueError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)
            if ex.features.shape != (self.feature_dim,):
                raise ValueError(
                    f"example {ex.id!r}: feature length {ex.features.shape} != {self.feature_dim}"
                )
            if not 0 <= ex.label < k:
                raise ValueError(f"example {ex.id!r}: label-out-of-range ({ex.label} for {k} classes)")
            if ex.true_label is not None and not 0 <= ex.true_label < k:
                raise ValueError(f"example {ex.id!r}: true-label-out-of-range")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def features_matrix(self) -> np.ndarray:
        if "X" not in self._matrix_cache:
            self._matrix_cache["X"] = np.stack([ex.features for ex in self.examples]) if self.examples else np.zeros((0, self.feature_dim))
        return self._matrix_cache["X"]

    def labels_array(self) -> np.ndarray:
        if "y" not in self._matrix_cache:
            self._matrix_cache["y"] = np.array([ex.label for ex in self.examples], dtype=int)
        return self._matrix_cache["y"]

    def true_labels_array(self) -> np.ndarray | None:
        """Array of true labels, or None if any example lacks one."""
        if any(ex.true_label is None for ex in self.examples):
            return None
        return np.array([ex.true_label for ex in self.examples], dtype=int)

    def binary_labels(self) -> np.ndarray:
        """Observed labels binarized at the referability boundary (1 = refer)."""
        return self.scheme.positive_mask(self.labels_array()).astype(int)

    def subset(self, ids) -> "Dataset":
        wanted = set(ids)
        kept = [ex for ex in self.examples if ex.id in wanted]
        return Dataset(scheme=self.scheme, examples=kept, feature_dim=self.feature_dim)

    def with_fold_assignment(self, fold_by_id: dict[str, str]) -> "Dataset":
        new = [replace(ex, fold=fold_by_id.get(ex.id, ex.fold)) for ex in self.examples]
        return Dataset(scheme=self.scheme, examples=new, feature_dim=self.feature_dim)


def positive_rate(dataset: Dataset) -> float:
    """Fraction of observed labels on the referable side of the boundary."""
    if len(dataset) == 0:
        raise ValueError("empty-dataset")
    return float(dataset.binary_labels().mean())


def split_random(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Split into two disjoint halves, odd count putting the extra example in D1.

    Ids are sorted lexicographically before the seeded shuffle, so the
    partition depends only on (seed, id set), never on storage order.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("too-small-to-split")
    order = sorted(dataset.ids)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n1 = (n + 1) // 2
    d1_ids = {order[i] for i in perm[:n1]}
    fold_by_id = {i: ("D1" if i in d1_ids else "D2") for i in order}
    assigned = dataset.with_fold_assignment(fold_by_id)
    d1 = [ex for ex in assigned if ex.fold == "D1"]
    d2 = [ex for ex in assigned if ex.fold == "D2"]
    return (
        Dataset(scheme=dataset.scheme, examples=d1, feature_dim=dataset.feature_dim),
        Dataset(scheme=dataset.scheme, examples=d2, feature_dim=dataset.feature_dim),
    )


def write_scheme(scheme: ClassScheme, path) -> None:
    payload = {
        "classes": list(scheme.class_names),
        "positive": sorted(scheme.positive_indices),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_scheme(path) -> ClassScheme:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    classes = payload["classes"]
    positive = set()
    for p in payload["positive"]:
        if isinstance(p, str):
            if p not in classes:
                raise ValueError(f"unknown-class: {p!r} not in scheme classes")
            positive.add(classes.index(p))
        else:
            positive.add(int(p))
    return ClassScheme(class_names=tuple(classes), positive_indices=frozenset(positive))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: Dataset, path) -> None:
    """Write the UTF-8 CSV form: id,label,true_label,grader_id,f0..f{d-1}."""
    d = dataset.feature_dim
    header = ["id", "label", "true_label", "grader_id"] + [f"f{i}" for i in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for ex in dataset.examples:
            row = [
                ex.id,
                str(ex.label),
                "" if ex.true_label is None else str(ex.true_label),
                "" if ex.grader_id is None else ex.grader_id,
            ] + [_fmt(v) for v in ex.features]
            w.writerow(row)


def _parse_feature(value: str, row_no: int, col: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"row {row_no}: non-numeric feature in column {col}: {value!r}") from None


def read_dataset(path, scheme: ClassScheme) -> Dataset:
    """Read a dataset CSV; true_label and grader_id columns are optional."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty dataset file") from None
        feat_cols = [c for c in header if c.startswith("f") and c[1:].isdigit()]
        d = len(feat_cols)
        expected = [f"f{i}" for i in range(d)]
        if feat_cols != expected:
            raise ValueError(f"feature columns must be f0..f{d - 1} in order, got {feat_cols}")
        col = {name: i for i, name in enumerate(header)}
        for required in ("id", "label"):
            if required not in col:
                raise ValueError(f"missing required column {required!r}")
        k = scheme.n_classes
        examples = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"row {row_no}: expected {len(header)} columns, got {len(row)}")
            rid = row[col["id"]]
            try:
                label = int(row[col["label"]])
            except ValueError:
                raise ValueError(f"row {row_no}: non-integer label {row[col['label']]!r}") from None
            if not 0 <= label < k:
                raise ValueError(f"row {row_no}: label-out-of-range ({label} for {k} classes)")
            true_label = None
            if "true_label" in col and row[col["true_label"]] != "":
                true_label = int(row[col["true_label"]])
                if not 0 <= true_label < k:
                    raise ValueError(f"row {row_no}: label-out-of-range (true_label {true_label})")
            grader_id = None
            if "grader_id" in col and row[col["grader_id"]] != "":
                grader_id = row[col["grader_id"]]
            feats = [_parse_feature(row[col[c]], row_no, c) for c in expected]
            examples.append(
                Example(id=rid, features=np.array(feats), label=label,
                        true_label=true_label, grader_id=grader_id)
            )
    return Dataset(scheme=scheme, examples=examples, feature_dim=d)
