"""Command-line driver: generate logs, build datasets, train, evaluate and benchmark."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import bench_latency, collect_inputs
from .call_log import write_log
from .experiments import (
    ExperimentSpec,
    _write_json,
    ablation_suite,
    compare_baseline,
    cross_region,
    importance_and_top10,
    load_benchmark,
    make_split,
    report_header,
    resample_seeds,
    run_experiment,
    write_csv,
    write_table,
)
from .features import FeatureSelector, Schema, encode_matrix, sample_rows
from .features.dataset import Dataset
from .models import make_model, save_model
from .synthgen import GeneratorConfig, generate_log, log_statistics


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


def spec_from_args(args) -> ExperimentSpec:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
        gen = dict(cfg.get("generator", {}))
        gen.setdefault("seed", args.seed)
        cfg["generator"] = gen
    if getattr(args, "log", None):
        cfg["log_dir"] = args.log
    if getattr(args, "models", None):
        known = cfg.get("models", {})
        cfg["models"] = {k: known.get(k, {}) for k in args.models.split(",")}
    if getattr(args, "selector", None):
        cfg["selector"] = args.selector
    return ExperimentSpec.from_dict(cfg)


def cmd_generate(args):
    cfg = load_config(args.config)
    cfg = cfg.get("generator", cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    config = GeneratorConfig.from_dict(cfg)
    log, labels = generate_log(config)
    out = Path(args.out)
    write_log(log, out, labels)
    _write_json(out / "generator.json", {"version": __version__, "config": config.to_dict()})
    _write_json(out / "stats.json", log_statistics(log, labels))
    return {"records": len(log), "out": str(out)}


def _dataset(split_table, schema, selector, seed, sampling="balanced"):
    rows = sample_rows(split_table, sampling, seed)
    return Dataset(encode_matrix(split_table.raw[rows], schema), split_table.label[rows].astype(int),
                   split_table.caller[rows], schema, rows, selector, sampling, seed)


def cmd_featurize(args):
    spec = spec_from_args(args)
    split = make_split(spec)
    selector = FeatureSelector.parse(spec.selector)
    schema = Schema.for_selector(selector)
    seeds = resample_seeds(spec.seed, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, table, seed in (("train", split.train, seeds["train_sample"]), ("test", split.test, seeds["test_sample"])):
        ds = _dataset(table, schema, selector, seed)
        ds.to_csv(out / f"{name}.csv")
        _write_json(out / f"{name}.manifest.json", {**report_header(spec), **ds.manifest()})
    return {"out": str(out), "schema_width": schema.width}


def cmd_train(args):
    spec = spec_from_args(args)
    split = make_split(spec)
    selector = FeatureSelector.parse(spec.selector)
    schema = Schema.for_selector(selector)
    seeds = resample_seeds(spec.seed, 0)
    ds = _dataset(split.train, schema, selector, seeds["train_sample"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind, params in spec.models.items():
        model = make_model(kind, **params)
        if "random_state" in model.get_params() and "random_state" not in params:
            model.set_params(random_state=seeds["model"])
        model.fit(ds.X, ds.y, schema=schema)
        save_model(model, out / f"{kind}.json")
    _write_json(out / "manifest.json", {**report_header(spec), "dataset": ds.manifest()})
    return {"out": str(out), "models": list(spec.models)}


def cmd_evaluate(args):
    spec = spec_from_args(args)
    out = Path(args.out)
    res = run_experiment(spec, out)
    summary = {k: v["mean"]["auc"] for k, v in res.report["models"].items()}
    if args.cross_region:
        table = cross_region(spec, out / "cross_region")
        summary = {"auc": summary, "cross_region": table["auc"]}
    return summary


def cmd_ablate(args):
    table = ablation_suite(spec_from_args(args), args.out)
    return table["auc"]


def cmd_importance(args):
    result = importance_and_top10(spec_from_args(args), args.out)
    return {"top10": result["top10"], "auc": result["auc"]}


def cmd_compare_baseline(args):
    Ms = [int(m) for m in args.M.split(",")] if args.M else None
    if args.report:
        report = json.loads(Path(args.report).read_text())
    else:
        spec = spec_from_args(args)
        if Ms:
            spec = replace(spec, eval=replace(spec.eval, Ms=tuple(sorted(set(spec.eval.Ms) | set(Ms)))))
        report = run_experiment(spec, Path(args.out) / "experiment").report
    return compare_baseline(report, Ms, args.out)["rows"]


def cmd_bench(args):
    spec = spec_from_args(args)
    bench = load_benchmark(spec)
    split = make_split(spec, bench)
    selector = FeatureSelector.parse(spec.selector)
    schema = Schema.for_selector(selector)
    seeds = resample_seeds(spec.seed, 0)
    ds = _dataset(split.train, schema, selector, seeds["train_sample"])
    models = {}
    for kind, params in spec.models.items():
        model = make_model(kind, **params)
        if "random_state" in model.get_params() and "random_state" not in params:
            model.set_params(random_state=seeds["model"])
        models[kind] = model.fit(ds.X, ds.y, schema=schema)
    inputs = collect_inputs(bench._source, n_inputs=1000)
    rows = bench_latency(models, schema, inputs, args.iterations, args.repetitions, seed=spec.seed)
    out = Path(args.out)
    write_table(rows, out / "bench")
    return [r for r in rows if r["history_len"] == "all"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="malcall", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, experiment=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="seed for sampling, model initialisation and (unless configured) the generator")
        p.add_argument("--out", required=True, help="output directory")
        if experiment:
            p.add_argument("--log", help="directory of a written log to use instead of generating one")
            p.add_argument("--models", help="comma-separated model kinds, e.g. forest,gbt")
            p.add_argument("--selector", help="feature subset: all, no_historic, no_crossref or basic")
        p.set_defaults(func=func)
        return p

    add("generate", cmd_generate, "generate a synthetic call log", experiment=False)
    add("featurize", cmd_featurize, "write the balanced train/test datasets as CSV")
    add("train", cmd_train, "train models on the first resample and save them")
    p = add("evaluate", cmd_evaluate, "run the resampled train/test experiment")
    p.add_argument("--cross-region", action="store_true", help="also train on a disjoint region and compare AUC")
    add("ablate", cmd_ablate, "AUC over the feature-subset ablations")
    add("importance", cmd_importance, "rank features by tree usage and re-run with the top ten")
    p = add("bench", cmd_bench, "per-prediction latency benchmark")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--repetitions", type=int, default=5)
    p = add("compare-baseline", cmd_compare_baseline, "model AFP against the blacklist baseline")
    p.add_argument("--M", help="comma-separated label thresholds")
    p.add_argument("--report", help="existing report.json to compare instead of running an experiment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except Exception as exc:  # reported as JSON for scripted callers
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
