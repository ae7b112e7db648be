"""Shared fixtures: small synthetic datasets plus the cached reference runs
used by the experiment-level tests and the acceptance suite."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from sncv import (
    Hyperparams,
    PopulationConfig,
    apply_grader_noise,
    cross_fold_score,
    default_grader_pool,
    default_scheme,
    generate_population,
    select_lowest_stratified,
    select_stratified,
    train,
)
from sncv.config import RunConfig
from sncv.scoring import derive_seed

REFERENCE_SEEDS = (0, 1, 2, 3, 4)


def reference_population_config(n: int, seed: int, cfg: RunConfig | None = None) -> PopulationConfig:
    cfg = cfg or RunConfig()
    return PopulationConfig(
        n=n,
        feature_dim=cfg.feature_dim,
        class_priors=cfg.class_priors,
        class_spread=cfg.class_spread,
        ambiguity_overlap=cfg.ambiguity_overlap,
        seed=seed,
        clusters_per_class=cfg.clusters_per_class,
        cluster_scatter=cfg.cluster_scatter,
        cluster_bulk_shares=cfg.cluster_bulk_shares,
        cluster_region_offsets=cfg.cluster_region_offsets,
        structure_seed=cfg.structure_seed,
    )


def make_reference_data(seed: int, n_train: int = 20000, n_tune: int = 2000,
                        n_test: int = 20000):
    """Noisy train set plus clean tune/test sets for one reference seed."""
    scheme = default_scheme()
    pool = default_grader_pool(scheme)
    population = generate_population(
        reference_population_config(n_train, derive_seed(seed, "gen-train")), scheme)
    noisy = apply_grader_noise(population, pool, derive_seed(seed, "gen-noise"))
    tune = generate_population(
        reference_population_config(n_tune, derive_seed(seed, "gen-tune")), scheme)
    test = generate_population(
        reference_population_config(n_test, derive_seed(seed, "gen-test")), scheme)
    return {"population": population, "train": noisy, "tune": tune, "test": test,
            "pool": pool, "scheme": scheme}


def reference_hyperparams(seed: int = 0) -> Hyperparams:
    return dataclasses.replace(RunConfig().hyperparams, seed=seed)


class ReferenceRuns:
    """Lazily computed, cached per-seed artifacts of the reference experiment."""

    def __init__(self):
        self._data = {}
        self._scored = {}
        self._models = {}

    def data(self, seed: int):
        if seed not in self._data:
            self._data[seed] = make_reference_data(seed)
        return self._data[seed]

    def scored(self, seed: int):
        if seed not in self._scored:
            d = self.data(seed)
            hp = reference_hyperparams()
            self._scored[seed] = cross_fold_score(
                d["train"], d["tune"], hp, derive_seed(seed, "score"))
        return self._scored[seed]

    def model(self, seed: int, which: str):
        key = (seed, which)
        if key not in self._models:
            d = self.data(seed)
            scored, _, _ = self.scored(seed)
            n = len(d["train"])
            if which == "all":
                subset = d["train"]
            elif which == "low15":
                sel = select_lowest_stratified(scored, int(round(0.15 * n)))
                subset = d["train"].subset(sel.selected_ids)
            elif which == "high45":
                sel = select_stratified(scored, int(round(0.45 * n)))
                subset = d["train"].subset(sel.selected_ids)
            else:
                raise KeyError(which)
            hp = dataclasses.replace(reference_hyperparams(),
                                     seed=derive_seed(seed, f"model-{which}"))
            self._models[key] = train(subset, d["tune"], hp)
        return self._models[key]


@pytest.fixture(scope="session")
def reference_runs() -> ReferenceRuns:
    return ReferenceRuns()


@pytest.fixture(scope="session")
def small_noisy_setup():
    """A 4000-example noisy set with tune data, for mid-cost integration tests."""
    scheme = default_scheme()
    pool = default_grader_pool(scheme)
    population = generate_population(reference_population_config(4000, seed=101), scheme)
    noisy = apply_grader_noise(population, pool, seed=102)
    tune = generate_population(reference_population_config(1200, seed=103), scheme)
    return {"population": population, "train": noisy, "tune": tune,
            "pool": pool, "scheme": scheme}


@pytest.fixture(scope="session")
def small_scored(small_noisy_setup):
    hp = dataclasses.replace(reference_hyperparams(7), max_epochs=40)
    scored, m1, m2 = cross_fold_score(
        small_noisy_setup["train"], small_noisy_setup["tune"], hp, seed=7)
    return {"scored": scored, "m1": m1, "m2": m2, **small_noisy_setup}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
