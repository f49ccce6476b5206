"""Command-line pipelines: network, classify, tune, synth, report.

Exit codes: 0 success, 1 usage/config, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import forest as forest_mod
from . import metrics as metrics_mod
from . import network as network_mod
from . import preprocess as preprocess_mod
from . import synth as synth_mod
from .config import RunConfig, parse_config
from .errors import DataError, NumericError
from .lasso import nodewise_regressions
from .output import svg_line_chart, write_csv, write_json, write_svg
from .panel import load_panel_csv, standardize, exclude_units


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dominet")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--threads", type=int, help="worker threads (env DOMINET_THREADS)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("network", help="panel -> dominance ranking and edge list")
    p.add_argument("panel_csv")
    common(p)

    p = sub.add_parser("classify", help="features -> filters, forest runs, importance")
    p.add_argument("features_csv")
    common(p)

    p = sub.add_parser("tune", help="grid-search mtry by repeated stratified CV")
    p.add_argument("features_csv")
    common(p)

    p = sub.add_parser("synth", help="generate synthetic panel or feature data")
    common(p)

    p = sub.add_parser("report", help="summarize a previous run's output directory")
    p.add_argument("run_dir")
    common(p)
    return parser


def _resolve(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    threads = args.threads
    if threads is None and os.environ.get("DOMINET_THREADS"):
        threads = int(os.environ["DOMINET_THREADS"])
    if threads is not None:
        cfg.threads = threads
    if args.out is not None:
        cfg.out_dir = args.out
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg


def cmd_network(panel_csv, cfg: RunConfig) -> None:
    panel, load_report = load_panel_csv(panel_csv, cfg.missing())
    if cfg.exclude_units:
        panel = exclude_units(panel, list(cfg.exclude_units))
    sp = standardize(panel)
    fits = nodewise_regressions(sp, cfg.lasso_config(), method=cfg.lasso_method,
                                threads=cfg.threads)
    cm = network_mod.stack_coefficients(fits, sp.unit_ids)
    km = network_mod.concentration(cm, np.array([f.residual_variance for f in fits]))
    norms = network_mod.column_norms(km)
    ranking = network_mod.dominant_count(norms, sp.unit_ids)

    record = ranking.to_record()
    record["dropped_units"] = load_report.dropped_units
    record["excluded_units"] = list(cfg.exclude_units)
    record["method"] = cfg.lasso_method
    record["seed"] = cfg.seed

    if cfg.norm_diagnostic:
        # cumulative incidence density per dominant unit, from the raw panel
        dominant = record["dominant_units"]
        if len(dominant) >= 3:
            dens = [panel.values[:, panel.unit_ids.index(u)].sum() for u in dominant]
            nrm = [float(ranking.norms[i]) for i in range(len(dominant))]
            d = network_mod.norm_density_diagnostic(nrm, dens)
            record["norm_density_diagnostic"] = dataclasses.asdict(d)
        else:
            record["norm_density_diagnostic"] = None

    out = cfg.out_dir
    write_json(os.path.join(out, "ranking.json"), record)
    write_csv(os.path.join(out, "ranking.csv"),
              ["rank", "unit", "norm", "growth_ratio"],
              [[i + 1, u, float(ranking.norms[i]),
                float(ranking.growth_ratios[i]) if i < len(ranking.growth_ratios) else ""]
               for i, u in enumerate(ranking.ordered_units)])
    edges = network_mod.edge_list(cm)
    write_csv(os.path.join(out, "edges.csv"), ["source", "target", "weight"],
              [list(e) for e in edges.edges])
    write_json(os.path.join(out, "fits.json"),
               {"fits": [f.to_record() for f in fits]})
    if cfg.svg:
        write_svg(os.path.join(out, "norms.svg"),
                  svg_line_chart(list(range(1, len(norms) + 1)),
                                 [float(v) for v in ranking.norms],
                                 "Sorted concentration column norms",
                                 x_label="rank", y_label="column norm"))


def _filtered_features(features_csv, cfg: RunConfig):
    fm = preprocess_mod.load_feature_csv(features_csv)
    fm, nzv_report = preprocess_mod.near_zero_variance_filter(
        fm, cfg.nzv_freq_ratio, cfg.nzv_unique_pct)
    fm, corr_report = preprocess_mod.correlation_prune(
        fm, cfg.corr_cutoff, keep=list(cfg.keep_features))
    combined = preprocess_mod.FilterReport(
        removed_nzv=nzv_report.removed_nzv,
        removed_corr=corr_report.removed_corr,
        surviving=corr_report.surviving,
        cutoff=cfg.corr_cutoff,
    )
    return fm, combined


def cmd_classify(features_csv, cfg: RunConfig) -> None:
    fm, filter_report = _filtered_features(features_csv, cfg)
    fcfg = cfg.forest_config()
    if cfg.tune_grid:
        best, _ = forest_mod.tune_mtry(fm, fcfg, list(cfg.tune_grid))
        fcfg = dataclasses.replace(fcfg, mtry=best)
    agg = forest_mod.multi_run(fm, fcfg, threads=cfg.threads)

    out = cfg.out_dir
    write_json(os.path.join(out, "filter_report.json"), filter_report.to_record())
    write_csv(os.path.join(out, "importance.csv"),
              ["feature", "mdi_mean", "mda_mean", "topk_frequency"],
              [[r["feature"], r["mdi_mean"], r["mda_mean"], r["topk_frequency"]]
               for r in agg.importance_rows()])

    mean_diffs = preprocess_mod.group_mean_differences(
        fm, order=[r["feature"] for r in sorted(
            agg.importance_rows(), key=lambda r: -r["mdi_mean"])])
    write_csv(os.path.join(out, "group_means.csv"),
              ["feature", "follower_mean", "dominant_mean"],
              [[r["feature"], r["follower_mean"], r["dominant_mean"]] for r in mean_diffs])

    write_json(os.path.join(out, "metrics.json"), {
        "n_runs": agg.n_runs,
        "mtry": fcfg.resolve_mtry(fm.n_features),
        "auc_mean": agg.auc_mean,
        "auc_se": agg.auc_se,
        "oob_error_mean": agg.oob_error_mean,
        "oob_error_se": agg.oob_error_se,
        "cutoff_mean": agg.cutoff_mean,
        "confusion_mean": dataclasses.asdict(agg.confusion_mean),
        "confusion_floored": dataclasses.asdict(agg.confusion_floored),
        "metrics_mean": agg.metrics_mean,
        "metrics_se": agg.metrics_se,
        "metrics_of_floored_counts": agg.metrics_floored.to_record(),
        "zero_coverage_runs": agg.zero_coverage_runs,
        "seed": cfg.seed,
    })

    # representative ROC curve from the first run's OOB scores
    model = forest_mod.fit_forest(fm, fcfg, run_seed=fcfg.seed)
    covered = model.covered
    auc, curve = metrics_mod.roc_auc(model.oob_probabilities[covered], model.labels[covered])
    thresholds = [""] + [float(t) for t in
                         np.unique(model.oob_probabilities[covered])[::-1]] + [""]
    rows = [[t, fpr, tpr] for t, (fpr, tpr) in zip(thresholds, curve)]
    write_csv(os.path.join(out, "roc.csv"), ["threshold", "fpr", "tpr"], rows)
    if cfg.svg:
        write_svg(os.path.join(out, "roc.svg"),
                  svg_line_chart([p[0] for p in curve], [p[1] for p in curve],
                                 f"OOB ROC (first run, AUC={auc:.3f})",
                                 x_label="false positive rate",
                                 y_label="true positive rate"))


def cmd_tune(features_csv, cfg: RunConfig) -> None:
    fm, _ = _filtered_features(features_csv, cfg)
    grid = list(cfg.tune_grid) or [cfg.forest_config().resolve_mtry(fm.n_features)]
    best, table = forest_mod.tune_mtry(fm, cfg.forest_config(), grid)
    write_json(os.path.join(cfg.out_dir, "tune.json"),
               {"best_mtry": best, "grid": table, "seed": cfg.seed})


def cmd_synth(cfg: RunConfig) -> None:
    out = cfg.out_dir
    if cfg.synth_kind == "panel":
        spec = synth_mod.SynthPanelSpec(
            n_units=cfg.synth_n_units, n_periods=cfg.synth_n_periods,
            n_dominant=cfg.synth_n_dominant,
            loading_range=(cfg.synth_loading_low, cfg.synth_loading_high),
            spatial_rho=cfg.synth_spatial_rho, noise_sd=cfg.synth_noise_sd,
            seed=cfg.seed)
        panel, truth = synth_mod.generate_dominant_panel(spec)
        rows = [[d, *[float(v) for v in row]] for d, row in zip(panel.time_index, panel.values)]
        write_csv(os.path.join(out, "panel.csv"), ["date", *panel.unit_ids], rows)
        write_json(os.path.join(out, "ground_truth.json"),
                   {"kind": "panel", "dominant_units": sorted(truth),
                    "spec": dataclasses.asdict(spec)})
    elif cfg.synth_kind == "features":
        spec = synth_mod.SynthClassSpec(
            n_units=cfg.synth_n_units, n_features=cfg.synth_n_features,
            n_informative=cfg.synth_n_informative, effect_size=cfg.synth_effect_size,
            class_ratio=cfg.synth_class_ratio, seed=cfg.seed)
        fm, truth = synth_mod.generate_classification_data(spec)
        preprocess_mod.write_feature_csv(os.path.join(out, "features.csv"), fm)
        write_json(os.path.join(out, "ground_truth.json"),
                   {"kind": "features", "informative_features": sorted(truth),
                    "spec": dataclasses.asdict(spec)})
    else:
        raise DataError(f"unknown synth_kind {cfg.synth_kind!r}")


def cmd_report(run_dir, cfg: RunConfig) -> None:
    found = False
    for name in ("ranking.json", "metrics.json", "tune.json", "ground_truth.json"):
        path = os.path.join(run_dir, name)
        if not os.path.exists(path):
            continue
        found = True
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
        print(f"== {name} ==")
        if name == "ranking.json":
            print(f"k = {record['k']} dominant unit(s): {record['dominant_units']}")
        elif name == "metrics.json":
            print(f"AUC {record['auc_mean']:.4f} +/- {record['auc_se']:.4f} "
                  f"over {record['n_runs']} run(s); "
                  f"OOB error {record['oob_error_mean']:.4f}")
        elif name == "tune.json":
            print(f"best mtry = {record['best_mtry']}")
        else:
            print(json.dumps({k: v for k, v in record.items() if k != "spec"}, indent=2))
    if not found:
        raise DataError(f"{run_dir}: no dominet reports found")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = _resolve(args)
    except (DataError, ValueError, OSError) as exc:
        print(f"dominet: bad configuration: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "network":
            cmd_network(args.panel_csv, cfg)
        elif args.command == "classify":
            cmd_classify(args.features_csv, cfg)
        elif args.command == "tune":
            cmd_tune(args.features_csv, cfg)
        elif args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "report":
            cmd_report(args.run_dir, cfg)
    except NumericError as exc:
        print(f"dominet: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"dominet: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dominet: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
