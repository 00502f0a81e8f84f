"""Command-line interface: dataset generation, preprocessing, training,
hyperparameter search, the quality/accuracy study, and report assembly.

Every subcommand takes --config <path>, --seed <u64>, --out <dir>; exit
codes are 0 on success, 2 on validation error, 1 on runtime error (with
partial outputs flagged under <out>/failed/).
"""

import argparse
import json
import os
import sys
import time
import traceback

from .analysis import quality_accuracy_study
from .config import ConfigError, RunLock, load_config, write_manifest
from .network import save_checkpoint
from .optimize import Acquisition, McmcConfig, SearchBounds, bo_loop, mcmc_search
from .pipeline import (
    PipelineObjective,
    generate_dataset,
    load_dataset,
    load_graph_cache,
    model_config_from,
    preprocess_dataset,
    split_metrics,
    toy_objective_from,
    train_config_from,
    train_on_bundle,
    write_graph_cache,
    write_history_csv,
    write_metrics_csv,
    write_study_csvs,
)
from .seeding import derive_seed


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meshsurrogate",
        description="Mesh-size search for graph-network surrogate models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, extra=None):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file (defaults used otherwise)")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--out", default=None, help="output directory override")
        if extra:
            extra(p)
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, "generate the synthetic wheel dataset with oracle labels")

    def preprocess_extra(p):
        p.add_argument("--k", type=int, default=None, help="subdivision count override")
        p.add_argument("--l", type=int, default=None, help="cluster count override")

    add("preprocess", cmd_preprocess, "re-mesh every shape and build the graph cache", preprocess_extra)
    add("train", cmd_train, "train the regressor on the graph cache")
    add("optimize", cmd_optimize, "search (k, l) with the surrogate-guided loop")
    add("mcmc", cmd_mcmc, "search (k, l) with the Metropolis baseline")
    add("study", cmd_study, "mesh-quality vs accuracy correlation study")

    def report_extra(p):
        p.add_argument("run_dir", nargs="?", default=None, help="run directory (defaults to --out)")

    add("report", cmd_report, "consolidate run outputs into summary tables", report_extra)
    return parser


def _setup(args):
    cfg = load_config(args.config, {"seed": args.seed, "out_dir": args.out})
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    args._out_dir = out_dir  # for the failure marker in main()
    return cfg, out_dir


def _dataset_manifest_path(cfg, out_dir):
    if cfg["dataset"]["manifest"]:
        return cfg["dataset"]["manifest"]
    return os.path.join(out_dir, "dataset", "manifest.json")


def cmd_gen_data(args):
    cfg, out_dir = _setup(args)
    with RunLock(out_dir):
        start = time.perf_counter()
        manifest = generate_dataset(cfg, out_dir)
        write_manifest(out_dir, "gen-data", cfg, {"dataset_manifest": manifest}, time.perf_counter() - start)
    print(f"wrote {cfg['dataset']['count']} meshes and {manifest}")
    return 0


def cmd_preprocess(args):
    cfg, out_dir = _setup(args)
    k = args.k if args.k is not None else cfg["mesh_size"]["k"]
    l = args.l if args.l is not None else cfg["mesh_size"]["l"]
    fractions = (cfg["split"]["train_fraction"], cfg["split"]["validation_fraction"])
    with RunLock(out_dir):
        start = time.perf_counter()
        meshes, labels = load_dataset(_dataset_manifest_path(cfg, out_dir))
        bundle = preprocess_dataset(meshes, labels, k, l, cfg["seed"], fractions)
        cache = write_graph_cache(bundle, out_dir)
        write_manifest(
            out_dir,
            "preprocess",
            cfg,
            {"graph_cache": cache},
            time.perf_counter() - start,
            extras={"mesh_size": {"k": k, "l": l}},
        )
    print(f"wrote graph cache for {len(meshes)} meshes at k={k}, l={l}: {cache}")
    return 0


def cmd_train(args):
    cfg, out_dir = _setup(args)
    kind = cfg["performance"]
    with RunLock(out_dir):
        start = time.perf_counter()
        bundle = load_graph_cache(os.path.join(out_dir, "graph_cache.json"))
        model = train_on_bundle(
            bundle,
            kind,
            model_config_from(cfg),
            train_config_from(cfg, derive_seed(cfg["seed"], "train")),
        )
        checkpoint = os.path.join(out_dir, "checkpoint.json")
        save_checkpoint(model, checkpoint)
        rows = [(kind, name, metrics) for name, metrics in split_metrics(model, bundle, kind)]
        metrics_path = os.path.join(out_dir, "metrics.csv")
        write_metrics_csv(metrics_path, rows)
        write_manifest(
            out_dir,
            "train",
            cfg,
            {"checkpoint": checkpoint, "metrics": metrics_path},
            time.perf_counter() - start,
            extras={
                "best_epoch": model.best_epoch,
                "stopped_epoch": model.stopped_epoch,
                "best_val_mse": model.best_val_mse,
            },
        )
    test = rows[-1][2]
    print(f"trained {kind}: best epoch {model.best_epoch}, test r2 {test.r2:.4f} -> {metrics_path}")
    return 0


def _make_objective(cfg, out_dir):
    if cfg["search"]["objective"] == "toy":
        return toy_objective_from(cfg), None
    meshes, labels = load_dataset(_dataset_manifest_path(cfg, out_dir))
    objective = PipelineObjective(
        meshes,
        labels,
        cfg["performance"],
        model_config_from(cfg),
        train_config_from(cfg, derive_seed(cfg["seed"], "train")),
        cfg["seed"],
        (cfg["split"]["train_fraction"], cfg["split"]["validation_fraction"]),
    )
    return objective, objective


def _finish_search(cfg, out_dir, strategy, records, best, artifacts, elapsed):
    history_path = os.path.join(out_dir, "history.csv")
    write_history_csv(history_path, [(strategy, cfg["seed"], records)])
    outputs = {"history": history_path}
    extras = {
        "strategy": strategy,
        "bounds": {"k": list(cfg["bounds"]["k"]), "l": list(cfg["bounds"]["l"])},
        "best": None if best is None else {"k": best.k, "l": best.l, "mse": best.mse},
    }
    if artifacts is not None and artifacts.best_artifacts is not None:
        k, l, bundle, model = artifacts.best_artifacts
        checkpoint = os.path.join(out_dir, "checkpoint.json")
        save_checkpoint(model, checkpoint)
        kind = cfg["performance"]
        rows = [(kind, name, m) for name, m in split_metrics(model, bundle, kind)]
        metrics_path = os.path.join(out_dir, "metrics.csv")
        write_metrics_csv(metrics_path, rows)
        outputs.update({"checkpoint": checkpoint, "metrics": metrics_path})
        extras["best_model"] = {"k": k, "l": l, "test_r2": rows[-1][2].r2}
    write_manifest(out_dir, strategy, cfg, outputs, elapsed, extras=extras)
    return extras


def cmd_optimize(args):
    cfg, out_dir = _setup(args)
    search = cfg["search"]
    strategy = search["strategy"]
    if strategy == "mcmc":
        return cmd_mcmc(args)
    with RunLock(out_dir):
        start = time.perf_counter()
        objective, artifacts = _make_objective(cfg, out_dir)
        bounds = SearchBounds(tuple(cfg["bounds"]["k"]), tuple(cfg["bounds"]["l"]))
        acquisition = Acquisition("ei") if strategy == "bo-ei" else Acquisition("ucb", search["ucb_kappa"])
        best, records = bo_loop(
            objective,
            bounds,
            search["t_max"],
            search["p_max"],
            acquisition,
            derive_seed(cfg["seed"], "search"),
            noise=search["noise"],
        )
        extras = _finish_search(cfg, out_dir, strategy, records, best, artifacts, time.perf_counter() - start)
    print(f"{strategy}: best {extras['best']} after {len(records)} evaluations")
    return 0


def cmd_mcmc(args):
    cfg, out_dir = _setup(args)
    search = cfg["search"]
    with RunLock(out_dir):
        start = time.perf_counter()
        objective, artifacts = _make_objective(cfg, out_dir)
        bounds = SearchBounds(tuple(cfg["bounds"]["k"]), tuple(cfg["bounds"]["l"]))
        mc = search["mcmc"]
        config = McmcConfig(
            temperature=mc["temperature"],
            sigma_l=mc["sigma_l"],
            k_step_prob=mc["k_step_prob"],
            chain_length=search["t_max"],
            seed=derive_seed(cfg["seed"], "search"),
        )
        result = mcmc_search(objective, bounds, config)
        extras = _finish_search(
            cfg, out_dir, "mcmc", result.records, result.best, artifacts, time.perf_counter() - start
        )
    print(f"mcmc: best {extras['best']} after {len(result.records)} evaluations")
    return 0


def cmd_study(args):
    cfg, out_dir = _setup(args)
    with RunLock(out_dir):
        start = time.perf_counter()
        meshes, labels = load_dataset(_dataset_manifest_path(cfg, out_dir))
        bounds = SearchBounds(tuple(cfg["bounds"]["k"]), tuple(cfg["bounds"]["l"]))
        include = cfg["study"]["include_optimum"]
        report = quality_accuracy_study(
            meshes,
            labels,
            bounds,
            cfg["study"]["samples"],
            cfg["seed"],
            model_config_from(cfg),
            train_config_from(cfg, 0),
            include_points=[tuple(include)] if include else (),
        )
        study_path, pearson_path = write_study_csvs(report, out_dir)
        write_manifest(
            out_dir,
            "study",
            cfg,
            {"study": study_path, "pearson": pearson_path},
            time.perf_counter() - start,
            extras={"rows": len(report.samples), "exclusions": report.exclusions},
        )
    print(f"study: {len(report.samples)} rows -> {study_path}")
    return 0


def cmd_report(args):
    cfg, out_dir = _setup(args)
    run_dir = args.run_dir or out_dir
    if not os.path.isdir(run_dir):
        raise ConfigError(f"run directory not found: {run_dir}")
    report_dir = os.path.join(run_dir, "report")
    os.makedirs(report_dir, exist_ok=True)
    lines = ["run summary", "==========="]
    optimal_rows = []
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("manifest_") and name.endswith(".json"):
            with open(os.path.join(run_dir, name), "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
            stage = manifest.get("stage", "?")
            lines.append(f"stage {stage}: elapsed {manifest.get('elapsed_seconds', 0):.1f}s")
            best = manifest.get("best")
            if best:
                perf = manifest.get("config", {}).get("performance", "?")
                row = (perf, stage, best["k"], best["l"], best["mse"])
                optimal_rows.append(row)
                lines.append(f"  best (k, l) for {perf}: ({best['k']}, {best['l']}), objective {best['mse']:.6g}")
            if manifest.get("best_model"):
                lines.append(f"  best model test r2: {manifest['best_model']['test_r2']:.4f}")
    if optimal_rows:
        with open(os.path.join(report_dir, "optimal.csv"), "w", encoding="utf-8") as fh:
            fh.write("performance,strategy,k,l,objective_mse\n")
            for perf, stage, k, l, mse in optimal_rows:
                fh.write(f"{perf},{stage},{k},{l},{mse:.9g}\n")
    for csv_name in ("metrics.csv", "history.csv", "study.csv", "pearson.csv"):
        src = os.path.join(run_dir, csv_name)
        if os.path.exists(src):
            with open(src, "r", encoding="utf-8") as fh:
                content = fh.read()
            with open(os.path.join(report_dir, csv_name), "w", encoding="utf-8") as fh:
                fh.write(content)
            lines.append(f"included {csv_name} ({len(content.splitlines()) - 1} rows)")
    summary = os.path.join(report_dir, "summary.txt")
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"report written to {report_dir}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: flag partial outputs
        target = getattr(args, "_out_dir", None) or getattr(args, "out", None) or "."
        try:
            failed_dir = os.path.join(target, "failed")
            os.makedirs(failed_dir, exist_ok=True)
            with open(os.path.join(failed_dir, "error.txt"), "w", encoding="utf-8") as fh:
                fh.write(traceback.format_exc())
        except OSError:
            pass
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
