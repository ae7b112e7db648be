"""Synthetic populations with known true labels, plus grader pools that corrupt them.

The population is a mixture of isotropic Gaussian clusters per class. With
clusters_per_class=1 the class means sit on a line whose spacing shrinks as
ambiguity_overlap grows. With more clusters per class, cluster centres scatter
in a low-dimensional subspace (deterministic under structure_seed) so that the
classes interleave at a fine scale and the task rewards additional data; a
bulk/rare weight split lets some presentation types stay scarce.

Grader noise is class-conditional per grader: each profile carries a
row-stochastic confusion matrix (row = true class), and graders are assigned
per example in proportion to workload. Per-example randomness derives from
(seed, example id), so the output is independent of iteration order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import ClassScheme, Dataset, Example, default_scheme

GRADER_ROLES = (
    "glaucoma-specialist",
    "retina-specialist",
    "ophthalmologist",
    "trainee-fellow",
    "optometrist",
)


@dataclass(frozen=True)
class PopulationConfig:
    n: int
    feature_dim: int
    class_priors: tuple[float, ...]
    class_means: tuple | None = None
    class_spread: float = 1.0
    ambiguity_overlap: float = 0.0
    seed: int = 0
    # cluster extension: 1 cluster per class reproduces the plain line layout
    clusters_per_class: int = 1
    cluster_scatter: float = 0.0
    cluster_dims: int = 2
    cluster_bulk_shares: tuple[float, ...] | None = None
    cluster_region_offsets: tuple | None = None
    structure_seed: int = 0

    def __post_init__(self):
        priors = tuple(float(p) for p in self.class_priors)
        object.__setattr__(self, "class_priors", priors)
        if self.n <= 0:
            raise ValueError("population size must be positive")
        if self.feature_dim <= 0:
            raise ValueError("feature_dim must be positive")
        if any(p < 0 for p in priors):
            raise ValueError("class priors must be non-negative")
        if abs(sum(priors) - 1.0) > 1e-9:
            raise ValueError(f"class priors must sum to 1, got {sum(priors)}")
        if self.class_spread <= 0:
            raise ValueError("class_spread must be positive")
        if self.ambiguity_overlap < 0:
            raise ValueError("ambiguity_overlap must be >= 0")
        if self.clusters_per_class < 1:
            raise ValueError("clusters_per_class must be >= 1")
        if self.cluster_bulk_shares is not None:
            shares = tuple(float(s) for s in self.cluster_bulk_shares)
            object.__setattr__(self, "cluster_bulk_shares", shares)
            if len(shares) != len(priors):
                raise ValueError("cluster_bulk_shares needs one entry per class")
        if self.cluster_region_offsets is not None:
            offs = tuple(tuple(float(v) for v in row) for row in self.cluster_region_offsets)
            object.__setattr__(self, "cluster_region_offsets", offs)
            if len(offs) != len(priors):
                raise ValueError("cluster_region_offsets needs one entry per class")


@dataclass(frozen=True)
class GraderProfile:
    grader_id: str
    role: str
    confusion: np.ndarray
    workload_weight: float

    def __post_init__(self):
        if self.role not in GRADER_ROLES:
            raise ValueError(f"unknown grader role {self.role!r}")
        conf = np.asarray(self.confusion, dtype=float)
        object.__setattr__(self, "confusion", conf)
        if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (conf < 0).any():
            raise ValueError("confusion entries must be non-negative")
        if np.abs(conf.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("confusion rows must sum to 1")
        if self.workload_weight <= 0:
            raise ValueError("workload_weight must be positive")


def line_means(feature_dim: int, n_classes: int, ambiguity_overlap: float) -> np.ndarray:
    """Class means on the all-ones direction, spacing 2/(1+overlap)."""
    u = np.ones(feature_dim) / np.sqrt(feature_dim)
    delta = 2.0 / (1.0 + ambiguity_overlap)
    return np.stack([c * delta * u for c in range(n_classes)])


def cluster_centers(config: PopulationConfig) -> np.ndarray:
    """(n_classes, clusters_per_class, d) cluster centres, fixed by structure_seed."""
    k = len(config.class_priors)
    d = config.feature_dim
    if config.class_means is not None:
        base = np.asarray(config.class_means, dtype=float)
        if base.shape != (k, d):
            raise ValueError(f"class_means must have shape ({k}, {d})")
    else:
        base = line_means(d, k, config.ambiguity_overlap)
    j = config.clusters_per_class
    rng = np.random.default_rng(config.structure_seed)
    centers = np.zeros((k, j, d))
    m = min(config.cluster_dims, d)
    for c in range(k):
        offs = np.zeros((j, d))
        if j > 1 and config.cluster_scatter > 0:
            offs[:, :m] = config.cluster_scatter * rng.standard_normal((j, m))
        if config.cluster_region_offsets is not None:
            row = config.cluster_region_offsets[c]
            offs[:, : len(row)] += np.asarray(row)
        centers[c] = base[c] + offs
    return centers


def _cluster_weights(config: PopulationConfig, class_idx: int) -> np.ndarray:
    j = config.clusters_per_class
    if config.cluster_bulk_shares is None:
        return np.full(j, 1.0 / j)
    bulk = config.cluster_bulk_shares[class_idx]
    h = j // 2
    if h == 0 or j - h == 0:
        return np.full(j, 1.0 / j)
    w = np.empty(j)
    w[:h] = bulk / h
    w[h:] = (1.0 - bulk) / (j - h)
    return w


def generate_population(config: PopulationConfig, scheme: ClassScheme | None = None) -> Dataset:
    """Draw n examples; label starts equal to true_label (noiseless)."""
    scheme = scheme or default_scheme()
    if len(config.class_priors) != scheme.n_classes:
        raise ValueError("class_priors length must match scheme")
    centers = cluster_centers(config)
    rng = np.random.default_rng(config.seed)
    n, d = config.n, config.feature_dim
    y = rng.choice(scheme.n_classes, size=n, p=np.array(config.class_priors))
    j = np.empty(n, dtype=int)
    for c in range(scheme.n_classes):
        mask = y == c
        if mask.any():
            j[mask] = rng.choice(config.clusters_per_class, size=int(mask.sum()),
                                 p=_cluster_weights(config, c))
    X = centers[y, j] + config.class_spread * rng.standard_normal((n, d))
    width = max(6, len(str(n - 1)))
    examples = [
        Example(id=f"ex{i:0{width}d}", features=X[i], label=int(y[i]), true_label=int(y[i]))
        for i in range(n)
    ]
    return Dataset(scheme=scheme, examples=examples, feature_dim=d)


def _example_rng(seed: int, example_id: str) -> np.random.Generator:
    digest = hashlib.blake2s(f"{seed}:{example_id}".encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def apply_grader_noise(dataset: Dataset, pool: list[GraderProfile], seed: int) -> Dataset:
    """Assign one grader per example and redraw the label from their confusion row."""
    if not pool:
        raise ValueError("grader pool is empty")
    k = dataset.scheme.n_classes
    for p in pool:
        if p.confusion.shape != (k, k):
            raise ValueError(f"grader {p.grader_id!r}: confusion must be {k}x{k}")
    weights = np.array([p.workload_weight for p in pool], dtype=float)
    weights = weights / weights.sum()
    cum = np.cumsum(weights)
    graded = []
    for ex in dataset.examples:
        if ex.true_label is None:
            raise ValueError(f"example {ex.id!r} has no true_label")
        rng = _example_rng(seed, ex.id)
        g = int(np.searchsorted(cum, rng.random(), side="right"))
        g = min(g, len(pool) - 1)
        profile = pool[g]
        row = profile.confusion[ex.true_label]
        new_label = int(np.searchsorted(np.cumsum(row), rng.random(), side="right"))
        new_label = min(new_label, k - 1)
        graded.append(replace(ex, label=new_label, grader_id=profile.grader_id))
    return Dataset(scheme=dataset.scheme, examples=graded, feature_dim=dataset.feature_dim)


def confusion_from_flip_rates(flip_rates, scheme: ClassScheme,
                              cross_primary: float = 0.85,
                              within_rate: float = 0.04) -> np.ndarray:
    """Build a confusion matrix from per-class boundary-crossing flip rates.

    Crossing mass from a negative class goes mostly to the nearest positive
    class (and vice versa); a small within-side confusion is added between
    adjacent same-side classes.
    """
    k = scheme.n_classes
    pos = sorted(scheme.positive_indices)
    neg = sorted(set(range(k)) - scheme.positive_indices)
    conf = np.zeros((k, k))
    for c in range(k):
        f = float(flip_rates[c])
        if not 0 <= f < 1:
            raise ValueError("flip rate must be in [0, 1)")
        targets = pos if c in neg else neg
        primary = min(targets, key=lambda t: abs(t - c))
        rest = [t for t in targets if t != primary]
        conf[c, primary] += f * (cross_primary if rest else 1.0)
        for t in rest:
            conf[c, t] += f * (1.0 - cross_primary) / len(rest)
        same = [t for t in (neg if c in neg else pos) if t != c]
        w = min(within_rate, 1.0 - f)
        for t in same:
            conf[c, t] += w / len(same)
        conf[c, c] = 1.0 - f - w
    return conf


ROLE_SEVERITY = {
    "glaucoma-specialist": 0.28,
    "retina-specialist": 0.75,
    "ophthalmologist": 1.00,
    "trainee-fellow": 2.80,
    "optometrist": 1.30,
}

# per-true-class boundary-crossing rates of the pool as a whole
BASE_FLIP_RATES = (0.09, 0.09, 0.18, 0.40)

# grader counts and per-grader workload, shaped after a specialist-heavy pool
DEFAULT_POOL_SHAPE = (
    ("glaucoma-specialist", 5, 0.068),
    ("retina-specialist", 2, 0.080),
    ("ophthalmologist", 3, 0.060),
    ("trainee-fellow", 3, 0.080),
    ("optometrist", 1, 0.080),
)


def default_grader_pool(scheme: ClassScheme | None = None,
                        base_rates=BASE_FLIP_RATES) -> list[GraderProfile]:
    """Role-graded pool whose workload-weighted flip rates match base_rates."""
    scheme = scheme or default_scheme()
    norm = sum(count * w * ROLE_SEVERITY[role] for role, count, w in DEFAULT_POOL_SHAPE)
    pool = []
    idx = 0
    for role, count, weight in DEFAULT_POOL_SHAPE:
        mult = ROLE_SEVERITY[role] / norm
        rates = [min(0.95, r * mult) for r in base_rates]
        conf = confusion_from_flip_rates(rates, scheme)
        for _ in range(count):
            pool.append(GraderProfile(
                grader_id=f"g{idx:02d}-{role}", role=role,
                confusion=conf, workload_weight=weight,
            ))
            idx += 1
    return pool


def marginal_flip_rates(pool: list[GraderProfile], scheme: ClassScheme) -> np.ndarray:
    """Workload-weighted probability that each true class is labeled across the boundary."""
    k = scheme.n_classes
    weights = np.array([p.workload_weight for p in pool], dtype=float)
    weights = weights / weights.sum()
    out = np.zeros(k)
    for w, p in zip(weights, pool):
        for c in range(k):
            cross = [t for t in range(k) if scheme.is_positive(t) != scheme.is_positive(c)]
            out[c] += w * p.confusion[c, cross].sum()
    return out


def write_grader_pool(pool: list[GraderProfile], path) -> None:
    payload = [
        {
            "grader_id": p.grader_id,
            "role": p.role,
            "workload_weight": p.workload_weight,
            "confusion": [[float(v) for v in row] for row in p.confusion],
        }
        for p in pool
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_grader_pool(path, scheme: ClassScheme) -> list[GraderProfile]:
    """Load profiles; confusion may be explicit rows or {"flip_to_adjacent": p}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    pool = []
    for entry in payload:
        conf = entry["confusion"]
        if isinstance(conf, dict):
            p = float(conf["flip_to_adjacent"])
            conf = _adjacent_flip_matrix(scheme.n_classes, p)
        pool.append(GraderProfile(
            grader_id=entry["grader_id"],
            role=entry["role"],
            confusion=np.asarray(conf, dtype=float),
            workload_weight=float(entry["workload_weight"]),
        ))
    return pool


def _adjacent_flip_matrix(k: int, p: float) -> np.ndarray:
    """Shorthand expansion: flip to each adjacent class with total probability p."""
    conf = np.zeros((k, k))
    for c in range(k):
        neighbors = [t for t in (c - 1, c + 1) if 0 <= t < k]
        conf[c, c] = 1.0 - p
        for t in neighbors:
            conf[c, t] = p / len(neighbors)
    return conf
