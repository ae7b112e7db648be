"""Command-line front end: dataset generation, training, scoring, selection,
and the experiment runners that produce the CSV/JSON reports.

Every command that takes --seed writes byte-identical artifacts across
repeated runs; each report embeds the fully resolved config for provenance.
Exit codes: 0 success, 1 computational failure, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics, relabel, scoring, selection, synth, trainer
from .config import RunConfig, load_config, require_paths
from .dataset import (
    Dataset,
    default_scheme,
    positive_rate,
    read_dataset,
    read_scheme,
    split_random,
    write_dataset,
    write_scheme,
)


class ConfigError(ValueError):
    """User-facing configuration or usage problem (exit code 2)."""


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _report(cfg: RunConfig, body: dict) -> dict:
    return {"config": cfg.to_dict(), "seed": cfg.seed, **body}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scheme(cfg: RunConfig):
    if cfg.scheme_path is None:
        return default_scheme()
    if not Path(cfg.scheme_path).exists():
        raise ConfigError(f"scheme file not found: {cfg.scheme_path}")
    return read_scheme(cfg.scheme_path)


def _load_pool(cfg: RunConfig, scheme):
    if cfg.pool_path is None:
        return synth.default_grader_pool(scheme)
    if not Path(cfg.pool_path).exists():
        raise ConfigError(f"grader pool file not found: {cfg.pool_path}")
    return synth.read_grader_pool(cfg.pool_path, scheme)


def _population_config(cfg: RunConfig, n: int, seed: int) -> synth.PopulationConfig:
    return synth.PopulationConfig(
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


def _resolve_k_grid(cfg: RunConfig, n: int) -> list[int]:
    if cfg.k is not None:
        return [cfg.k]
    return [int(round(f * n)) for f in cfg.k_grid]


def cmd_gen(cfg: RunConfig) -> int:
    """Write scheme, grader pool, noisy train set, clean tune and test sets."""
    out = _out_dir(cfg)
    scheme = _load_scheme(cfg)
    pool = _load_pool(cfg, scheme)

    population = synth.generate_population(
        _population_config(cfg, cfg.n_train, cfg.stage_seed("gen-train")), scheme)
    noisy = synth.apply_grader_noise(population, pool, cfg.stage_seed("gen-noise"))
    tune = synth.generate_population(
        _population_config(cfg, cfg.n_tune, cfg.stage_seed("gen-tune")), scheme)
    test = synth.generate_population(
        _population_config(cfg, cfg.n_test, cfg.stage_seed("gen-test")), scheme)

    write_scheme(scheme, out / "scheme.json")
    synth.write_grader_pool(pool, out / "pool.json")
    write_dataset(population, out / "population.csv")
    write_dataset(noisy, out / "train.csv")
    write_dataset(tune, out / "tune.csv")
    write_dataset(test, out / "test.csv")

    tau = positive_rate(noisy)
    true_labels = population.labels_array()
    noise_rate = float((noisy.labels_array() != true_labels).mean())
    _write_json(out / "gen_report.json", _report(cfg, {
        "tau": tau,
        "marginal_noise_rate": noise_rate,
        "marginal_flip_rates_by_class": synth.marginal_flip_rates(pool, scheme).tolist(),
        "files": ["scheme.json", "pool.json", "population.csv", "train.csv",
                  "tune.csv", "test.csv"],
    }))
    print(f"tau={tau:.4f} marginal_noise_rate={noise_rate:.4f}")
    return 0


def cmd_split(cfg: RunConfig) -> int:
    require_paths(cfg, "train")
    scheme = _load_scheme(cfg)
    dataset = read_dataset(cfg.train_path, scheme)
    d1, d2 = split_random(dataset, cfg.stage_seed("split"))
    out = _out_dir(cfg)
    write_dataset(d1, out / "d1.csv")
    write_dataset(d2, out / "d2.csv")
    print(f"|D1|={len(d1)} |D2|={len(d2)}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    require_paths(cfg, "train", "tune")
    scheme = _load_scheme(cfg)
    train_set = read_dataset(cfg.train_path, scheme)
    tune_set = read_dataset(cfg.tune_path, scheme)
    model = trainer.train(train_set, tune_set, cfg.hp_for_stage("train"))
    out = _out_dir(cfg)
    trainer.write_model(model, out / "model.json")
    _write_json(out / "train_report.json", _report(cfg, {
        "stopped_epoch": model.stopped_epoch,
        "epochs_run": model.epochs_run,
        "tune_auc_at_stop": model.tune_auc_at_stop,
    }))
    print(f"tune_auc={model.tune_auc_at_stop:.4f} stopped_epoch={model.stopped_epoch}")
    return 0


def cmd_score(cfg: RunConfig) -> int:
    require_paths(cfg, "train", "tune")
    scheme = _load_scheme(cfg)
    dataset = read_dataset(cfg.train_path, scheme)
    tune_set = read_dataset(cfg.tune_path, scheme)
    scored, m1, m2 = scoring.cross_fold_score(
        dataset, tune_set, cfg.hp_for_stage("score"), cfg.stage_seed("score"),
        min_fold_size=cfg.min_fold_size)
    out = _out_dir(cfg)
    scoring.write_scored_dataset(scored, out / "scored.csv")
    _write_json(out / "score_report.json", _report(cfg, {
        "tau": positive_rate(dataset),
        "fold_tune_auc": {"m1": m1.tune_auc_at_stop, "m2": m2.tune_auc_at_stop},
        "n_negative_qs": int((scored.quality_scores() < 0).sum()),
    }))
    print(f"scored {len(scored)} examples; m1={m1.tune_auc_at_stop:.4f} m2={m2.tune_auc_at_stop:.4f}")
    return 0


def _selection_for_mode(scored, mode: str, k: int | None):
    if mode == "stratified":
        if k is None:
            raise ConfigError("select: k required for stratified mode")
        return selection.select_stratified(scored, k)
    if mode == "lowest":
        if k is None:
            raise ConfigError("select: k required for lowest mode")
        return selection.select_lowest_stratified(scored, k)
    if mode == "ncv":
        return selection.select_ncv(scored)
    if mode == "ncv-exact":
        return selection.select_ncv(scored, match="exact")
    raise ConfigError(f"unknown select mode {mode!r}")


def cmd_select(cfg: RunConfig) -> int:
    require_paths(cfg, "train")
    scheme = _load_scheme(cfg)
    scored = scoring.read_scored_dataset(cfg.train_path, scheme)
    result = _selection_for_mode(scored, cfg.select_mode, cfg.k)
    out = _out_dir(cfg)
    with open(out / "selected_ids.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id"])
        for i in result.selected_ids:
            w.writerow([i])
    _write_json(out / "selection_summary.json",
                _report(cfg, selection.selection_summary(result)))
    print(f"selected {len(result.selected_ids)} "
          f"({result.n_positive_selected} positive / {result.n_negative_selected} negative)")
    return 0


def _write_histogram(scored, bin_width: float, path) -> None:
    rows = scoring.qs_histogram(scored, bin_width)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count_nonreferable", "count_referable"])
        for lo, hi, c_non, c_ref in rows:
            w.writerow([f"{lo:.10g}", f"{hi:.10g}", c_non, c_ref])


def cmd_pipeline(cfg: RunConfig) -> int:
    require_paths(cfg, "train", "tune")
    scheme = _load_scheme(cfg)
    dataset = read_dataset(cfg.train_path, scheme)
    tune_set = read_dataset(cfg.tune_path, scheme)
    k_values = _resolve_k_grid(cfg, len(dataset))
    result = selection.run_sncv_pipeline(
        dataset, tune_set, k_values, cfg.hyperparams, cfg.stage_seed("pipeline"))
    out = _out_dir(cfg)
    trainer.write_model(result.model, out / "model_final.json")
    scoring.write_scored_dataset(result.scored, out / "scored.csv")
    _write_histogram(result.scored, cfg.bin_width, out / "qs_histogram.csv")
    tune_scores = trainer.referable_scores(result.model, tune_set.features_matrix())
    tune_auc = metrics.roc_auc(tune_scores, tune_set.binary_labels())
    ci = metrics.bootstrap_auc_ci(tune_scores, tune_set.binary_labels(),
                                  cfg.n_boot, cfg.stage_seed("pipeline-ci"))
    _write_json(out / "pipeline_report.json", _report(cfg, {
        "k_used": result.k_used,
        "k_grid_tune_auc": {str(k): v for k, v in result.k_grid_tune_auc.items()},
        "selection": selection.selection_summary(result.selection),
        "fold_tune_auc": {"m1": result.fold_models[0].tune_auc_at_stop,
                          "m2": result.fold_models[1].tune_auc_at_stop},
        "final_tune_auc": tune_auc.auc,
        "final_tune_auc_ci95": list(ci),
    }))
    print(f"k={result.k_used} final_tune_auc={tune_auc.auc:.4f}")
    return 0


def cmd_bands(cfg: RunConfig) -> int:
    """Tune AUC of high-band and low-band selected models across band sizes,
    plus the class composition of unstratified top/bottom rankings."""
    require_paths(cfg, "train", "tune")
    scheme = _load_scheme(cfg)
    dataset = read_dataset(cfg.train_path, scheme)
    tune_set = read_dataset(cfg.tune_path, scheme)
    scored, _, _ = scoring.cross_fold_score(
        dataset, tune_set, cfg.hp_for_stage("bands-score"), cfg.stage_seed("bands-score"),
        min_fold_size=cfg.min_fold_size)
    n = len(dataset)
    out = _out_dir(cfg)

    band_rows = []
    for j, frac in enumerate(sorted(set(cfg.k_grid) | {1.0})):
        k = max(1, int(round(frac * n)))
        hi = selection.select_stratified(scored, k)
        lo = selection.select_lowest_stratified(scored, k)
        # paired design: both arms share the band's training seed, so
        # coinciding selections (the full band) yield identical models
        m_hi = trainer.train(dataset.subset(hi.selected_ids), tune_set,
                             cfg.hp_for_stage(f"bands-{j}"))
        m_lo = trainer.train(dataset.subset(lo.selected_ids), tune_set,
                             cfg.hp_for_stage(f"bands-{j}"))
        band_rows.append((k, m_hi.tune_auc_at_stop, m_lo.tune_auc_at_stop))

    with open(out / "bands_auc.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["band_size", "auc_high_qs", "auc_low_qs", "delta"])
        for k, a_hi, a_lo in band_rows:
            w.writerow([k, repr(a_hi), repr(a_lo), repr(a_hi - a_lo)])

    # unstratified composition: positive share of the top-k and bottom-k by QS
    order = np.argsort(-scored.quality_scores(), kind="stable")
    pos_mask = scored.dataset.binary_labels()[order]
    with open(out / "bands_composition.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["band_size", "pos_share_top", "pos_share_bottom"])
        for frac in sorted(set(cfg.k_grid) | {1.0}):
            k = max(1, int(round(frac * n)))
            top_share = float(pos_mask[:k].mean())
            bottom_share = float(pos_mask[-k:].mean())
            w.writerow([k, repr(top_share), repr(bottom_share)])

    _write_json(out / "bands_report.json", _report(cfg, {
        "bands": [{"band_size": k, "auc_high_qs": a_hi, "auc_low_qs": a_lo,
                   "delta": a_hi - a_lo} for k, a_hi, a_lo in band_rows],
    }))
    print("bands:", " ".join(f"{k}:{a_hi:.3f}/{a_lo:.3f}" for k, a_hi, a_lo in band_rows))
    return 0


def run_burden_study(full_train: Dataset, tune_set: Dataset, test_set: Dataset,
                     cfg: RunConfig) -> dict:
    """Train the four arms and run the labeling-burden hypothesis tests."""
    seed = cfg.stage_seed("burden")
    rng = np.random.default_rng(scoring.derive_seed(seed, "subsample"))
    ids = sorted(full_train.ids)
    n_sub = int(round(cfg.subsample_fraction * len(ids)))
    sub_ids = [ids[i] for i in rng.permutation(len(ids))[:n_sub]]
    sub_train = full_train.subset(sub_ids)

    full_model = trainer.train(full_train, tune_set, cfg.hp_for_stage("burden-full"))
    sub_model = trainer.train(sub_train, tune_set, cfg.hp_for_stage("burden-sub"))

    sncv_result = selection.run_sncv_pipeline(
        sub_train, tune_set, _resolve_k_grid(cfg, len(sub_train)),
        cfg.hyperparams, scoring.derive_seed(seed, "sncv"))
    sncv_model = sncv_result.model

    ncv_sel = selection.select_ncv(sncv_result.scored)
    ncv_model = trainer.train(sub_train.subset(ncv_sel.selected_ids), tune_set,
                              cfg.hp_for_stage("burden-ncv"))

    X_test = test_set.features_matrix()
    y_test = test_set.binary_labels()
    arm_scores = {
        "full_baseline": trainer.referable_scores(full_model, X_test),
        "subsample_baseline": trainer.referable_scores(sub_model, X_test),
        "subsample_sncv": trainer.referable_scores(sncv_model, X_test),
        "subsample_ncv": trainer.referable_scores(ncv_model, X_test),
    }
    arms = {}
    for name, s in arm_scores.items():
        ci = metrics.bootstrap_auc_ci(s, y_test, cfg.n_boot,
                                      scoring.derive_seed(seed, f"ci-{name}"))
        arms[name] = {"test_auc": metrics.roc_auc(s, y_test).auc, "test_auc_ci95": list(ci)}
    arms["full_baseline"]["tune_auc"] = full_model.tune_auc_at_stop
    arms["subsample_baseline"]["tune_auc"] = sub_model.tune_auc_at_stop
    arms["subsample_sncv"]["tune_auc"] = sncv_model.tune_auc_at_stop
    arms["subsample_sncv"]["k_used"] = sncv_result.k_used
    arms["subsample_ncv"]["tune_auc"] = ncv_model.tune_auc_at_stop
    arms["subsample_ncv"]["n_selected"] = len(ncv_sel.selected_ids)

    noninferiority = [
        metrics.comparison_record(a, b, metrics.delong_noninferiority(
            arm_scores[a], arm_scores[b], y_test, cfg.margin, cfg.alpha))
        for a, b in (
            ("subsample_baseline", "subsample_sncv"),
            ("subsample_sncv", "full_baseline"),
            ("subsample_baseline", "full_baseline"),
        )
    ]
    two_tailed = [
        metrics.comparison_record(a, b, metrics.delong_two_tailed(
            arm_scores[a], arm_scores[b], y_test))
        for a, b in (
            ("full_baseline", "subsample_baseline"),
            ("subsample_sncv", "subsample_baseline"),
            ("subsample_sncv", "subsample_ncv"),
        )
    ]
    return {
        "subsample_fraction": cfg.subsample_fraction,
        "n_subsample": n_sub,
        "arms": arms,
        "noninferiority_tests": noninferiority,
        "two_tailed_tests": two_tailed,
    }


def cmd_burden(cfg: RunConfig) -> int:
    require_paths(cfg, "train", "tune", "test")
    scheme = _load_scheme(cfg)
    full_train = read_dataset(cfg.train_path, scheme)
    tune_set = read_dataset(cfg.tune_path, scheme)
    test_set = read_dataset(cfg.test_path, scheme)
    body = run_burden_study(full_train, tune_set, test_set, cfg)
    out = _out_dir(cfg)
    _write_json(out / "burden_report.json", _report(cfg, body))
    for rec in body["two_tailed_tests"]:
        print(f"{rec['model_a']} vs {rec['model_b']}: "
              f"delta={rec['delta']:+.4f} p={rec['p_two_tailed']:.4f}")
    for rec in body["noninferiority_tests"]:
        print(f"{rec['model_a']} noninf. to {rec['model_b']} @ {rec['margin']}: "
              f"p={rec['p_noninferiority']:.4f} -> {rec['decision']}")
    return 0


def cmd_relabel(cfg: RunConfig) -> int:
    require_paths(cfg, "train")
    scheme = _load_scheme(cfg)
    scored = scoring.read_scored_dataset(cfg.train_path, scheme)
    oracle = relabel.SpecialistOracle(error_rate=cfg.oracle_error_rate,
                                      seed=cfg.stage_seed("relabel-oracle"))
    report = relabel.run_relabel_experiment(scored, cfg.n_lowest, oracle)
    out = _out_dir(cfg)
    _write_json(out / "relabel_report.json", _report(cfg, report.to_dict()))
    with open(out / "relabel_rows.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "qs", "original_label", "oracle_label", "true_label",
                    "model_side_win"])
        for row in report.rows:
            w.writerow([row.id, repr(row.qs), row.original_label, row.oracle_label,
                        row.true_label, int(row.model_side_win)])
    print(f"relabeled {report.n_relabeled}: relabel_rate={report.relabel_rate:.4f} "
          f"model_agreement={report.model_agreement_rate:.4f}")
    return 0


def cmd_graders(cfg: RunConfig) -> int:
    require_paths(cfg, "train")
    scheme = _load_scheme(cfg)
    scored = scoring.read_scored_dataset(cfg.train_path, scheme)
    pool = _load_pool(cfg, scheme)
    report = relabel.grader_mismatch_analysis(scored, pool, cfg.mismatch_threshold)
    out = _out_dir(cfg)
    _write_json(out / "grader_report.json", _report(cfg, report.to_dict()))
    flagged = [g.grader_id for g in report.graders if g.flagged]
    print(f"flagged {len(flagged)}/{len(report.graders)} graders: {flagged}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    """AUC + bootstrap CI for one model on a dataset; DeLong tests for two."""
    require_paths(cfg, "train")
    scheme = _load_scheme(cfg)
    dataset = read_dataset(cfg.train_path, scheme)
    if not cfg.model_paths:
        raise ConfigError("eval: at least one --model is required")
    X = dataset.features_matrix()
    y = dataset.binary_labels()
    records = {}
    score_vectors = {}
    for path in cfg.model_paths:
        if not Path(path).exists():
            raise ConfigError(f"model file not found: {path}")
        model = trainer.read_model(path)
        s = trainer.referable_scores(model, X)
        score_vectors[path] = s
        ci = metrics.bootstrap_auc_ci(s, y, cfg.n_boot, cfg.stage_seed(f"eval-{Path(path).name}"))
        records[path] = {"auc": metrics.roc_auc(s, y).auc, "auc_ci95": list(ci)}
    body: dict = {"models": records}
    if len(cfg.model_paths) == 2:
        a, b = cfg.model_paths
        body["two_tailed"] = metrics.comparison_record(
            a, b, metrics.delong_two_tailed(score_vectors[a], score_vectors[b], y))
        body["noninferiority"] = metrics.comparison_record(
            a, b, metrics.delong_noninferiority(score_vectors[a], score_vectors[b], y,
                                                cfg.margin, cfg.alpha))
    out = _out_dir(cfg)
    _write_json(out / "eval_report.json", _report(cfg, body))
    for path, rec in records.items():
        print(f"{path}: auc={rec['auc']:.4f} ci95=({rec['auc_ci95'][0]:.4f}, {rec['auc_ci95'][1]:.4f})")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "split": cmd_split,
    "train": cmd_train,
    "score": cmd_score,
    "select": cmd_select,
    "pipeline": cmd_pipeline,
    "bands": cmd_bands,
    "burden": cmd_burden,
    "relabel": cmd_relabel,
    "graders": cmd_graders,
    "eval": cmd_eval,
}

STOCHASTIC_COMMANDS = {"gen", "split", "train", "score", "pipeline", "bands",
                       "burden", "relabel", "eval"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sncv",
                                     description="Label-quality scoring and selection toolkit")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="pipeline seed (overrides config)")
    parser.add_argument("--out", help="output directory (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--train", help="dataset CSV (scored CSV for select/relabel/graders)")
        p.add_argument("--tune", help="tune dataset CSV")
        p.add_argument("--test", help="test dataset CSV")
        p.add_argument("--scheme", help="class scheme JSON")
        p.add_argument("--pool", help="grader pool JSON")
        p.add_argument("--k", type=int, help="selection size")
        p.add_argument("--k-grid", help="comma-separated k fractions")
        p.add_argument("--select-mode", choices=["stratified", "lowest", "ncv", "ncv-exact"])
        p.add_argument("--n-lowest", type=int, help="relabel tranche size")
        p.add_argument("--mismatch-threshold", type=float)
        p.add_argument("--margin", type=float)
        p.add_argument("--subsample-fraction", type=float)
        p.add_argument("--oracle-error-rate", type=float)
        if name == "eval":
            p.add_argument("--model", action="append", dest="models",
                           help="model JSON (repeat for a pair comparison)")
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    for attr, name in (("train_path", "train"), ("tune_path", "tune"),
                       ("test_path", "test"), ("scheme_path", "scheme"),
                       ("pool_path", "pool")):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "k_grid", None) is not None:
        cfg.k_grid = tuple(float(v) for v in args.k_grid.split(","))
        cfg.k = None
    if getattr(args, "select_mode", None) is not None:
        cfg.select_mode = args.select_mode
    if getattr(args, "n_lowest", None) is not None:
        cfg.n_lowest = args.n_lowest
    if getattr(args, "mismatch_threshold", None) is not None:
        cfg.mismatch_threshold = args.mismatch_threshold
    if getattr(args, "margin", None) is not None:
        cfg.margin = args.margin
    if getattr(args, "subsample_fraction", None) is not None:
        cfg.subsample_fraction = args.subsample_fraction
    if getattr(args, "oracle_error_rate", None) is not None:
        cfg.oracle_error_rate = args.oracle_error_rate
    cfg.model_paths = list(getattr(args, "models", None) or [])
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (FileNotFoundError, configparser.Error) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    cfg = _apply_overrides(cfg, args)
    if args.command in STOCHASTIC_COMMANDS and cfg.seed is None:
        print("error: seed required: pass --seed or set [experiment] seed", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        if str(err).startswith("config error"):
            print(f"error: {err}", file=sys.stderr)
            return 2
        print(f"failure: {err}", file=sys.stderr)
        return 1



if __name__ == "__main__":
    sys.exit(main())
