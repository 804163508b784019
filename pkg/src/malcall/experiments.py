"""Seeded train/test experiments over a call log: accuracy, ablations, feature usage, baseline and regions.

A run streams the log once into an example table, splits it by day range
and caller province, and then for every resample:

* trains each model on a number-balanced sample of the training split,
* measures AUC on a number-balanced sample of the test split,
* calibrates ``tau`` on a random share of the test-period benign calls,
* scores every malicious test number's calls in time order for AFP and MR.

Reports hold only values derived from the data, the spec, the seed and the
package version, so repeated runs write identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .call_log import read_log
from .features import (
    ExampleTable,
    FeatureSelector,
    Schema,
    encode_matrix,
    extract_examples,
    sample_rows,
)
from .metrics import EvalConfig, evaluate_scores, reduction_rate
from .models import MODEL_KINDS, TREE_KINDS, feature_usage_histogram, make_model, serialize_model
from .synthgen import GeneratorConfig, generate_log

SECONDS_PER_DAY = 86400
ABLATION_SELECTORS = ("all", "no_historic", "no_crossref", "basic")
DEFAULT_KINDS = ("logistic", "svm", "mlp", "forest", "gbt")


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    generator: dict = field(default_factory=dict)  # overrides of GeneratorConfig defaults
    log_dir: str | None = None  # read this log instead of generating one
    train_days: tuple = (0, 21)
    test_days: tuple = (21, 30)
    train_provinces: list | None = None  # None means every province
    test_provinces: list | None = None
    models: dict = field(default_factory=lambda: {k: {} for k in DEFAULT_KINDS})
    selector: str | dict | list = "all"
    eval: EvalConfig = field(default_factory=EvalConfig)
    resamples: int = 5
    seed: int = 0
    continuous_stream: bool = True
    history_cap: int = 100
    tz_offset: int = 0

    def __post_init__(self):
        if isinstance(self.eval, dict):
            self.eval = EvalConfig.from_dict(self.eval)
        self.train_days = tuple(int(d) for d in self.train_days)
        self.test_days = tuple(int(d) for d in self.test_days)
        self.validate()

    def validate(self):
        if self.resamples < 1:
            raise ExperimentError("resamples must be >= 1")
        for name in ("train_days", "test_days"):
            lo, hi = getattr(self, name)
            if not 0 <= lo < hi:
                raise ExperimentError(f"{name} must be an increasing [start, end) day range, got {(lo, hi)}")
        if not self.models:
            raise ExperimentError("no models requested")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ExperimentError(f"unknown model kind {kind!r}")
        FeatureSelector.parse(self.selector)

    def to_dict(self) -> dict:
        return {
            "generator": dict(self.generator),
            "log_dir": self.log_dir,
            "train_days": list(self.train_days),
            "test_days": list(self.test_days),
            "train_provinces": None if self.train_provinces is None else list(self.train_provinces),
            "test_provinces": None if self.test_provinces is None else list(self.test_provinces),
            "models": {k: dict(v) for k, v in self.models.items()},
            "selector": FeatureSelector.parse(self.selector).to_dict(),
            "eval": self.eval.to_dict(),
            "resamples": self.resamples,
            "seed": self.seed,
            "continuous_stream": self.continuous_stream,
            "history_cap": self.history_cap,
            "tz_offset": self.tz_offset,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ExperimentError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**obj)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig.from_dict(dict(self.generator))

    def data_key(self) -> str:
        keys = ("generator", "log_dir", "history_cap", "tz_offset")
        d = self.to_dict()
        return json.dumps({k: d[k] for k in keys}, sort_keys=True)


# --- data preparation -----------------------------------------------------------


@dataclass
class Benchmark:
    """A log's example tables, streamed once and shared by every run on it."""

    table: ExampleTable
    provinces: list
    start: int
    n_records: int
    labels: dict
    _fresh: dict = field(default_factory=dict)
    _source: object = None

    def day(self, table: ExampleTable) -> np.ndarray:
        return (table.call_date - self.start) // SECONDS_PER_DAY

    def table_since(self, day: int, history_cap: int, tz_offset: int) -> ExampleTable:
        """Examples of a stream that starts at ``day`` with empty counters."""
        if day not in self._fresh:
            since = self.start + day * SECONDS_PER_DAY
            self._fresh[day] = extract_examples(self._source, self.labels, history_cap=history_cap, tz_offset=tz_offset, since=since)
        return self._fresh[day]


@lru_cache(maxsize=4)
def _load_benchmark(data_key: str) -> Benchmark:
    d = json.loads(data_key)
    if d["log_dir"] is not None:
        log, labels = read_log(d["log_dir"])
        if log.meta is None:
            raise ExperimentError(f"{d['log_dir']} has no meta.json")
    else:
        log, labels = generate_log(GeneratorConfig.from_dict(d["generator"]))
    table = extract_examples(log, labels, history_cap=d["history_cap"], tz_offset=d["tz_offset"])
    labels = labels if labels is not None else {}
    return Benchmark(table, list(log.meta.provinces), log.meta.start, len(log), labels, {}, log)


def load_benchmark(spec: ExperimentSpec) -> Benchmark:
    return _load_benchmark(spec.data_key())


@dataclass
class Split:
    train: ExampleTable
    test: ExampleTable
    train_provinces: list
    test_provinces: list


def _select(bench: Benchmark, table: ExampleTable, days, provinces) -> ExampleTable:
    day = bench.day(table)
    mask = (day >= days[0]) & (day < days[1]) & np.isin(table.caller_province, list(provinces))
    return table.subset(mask)


def make_split(spec: ExperimentSpec, bench: Benchmark | None = None) -> Split:
    bench = bench or load_benchmark(spec)
    for provs in (spec.train_provinces, spec.test_provinces):
        if provs is not None:
            missing = set(provs) - set(bench.provinces)
            if missing:
                raise ExperimentError(f"provinces not in the log: {sorted(missing)}")
    train_provs = list(spec.train_provinces) if spec.train_provinces is not None else bench.provinces
    test_provs = list(spec.test_provinces) if spec.test_provinces is not None else bench.provinces
    train = _select(bench, bench.table, spec.train_days, train_provs)
    if spec.continuous_stream:
        test_source = bench.table
    else:
        test_source = bench.table_since(spec.test_days[0], spec.history_cap, spec.tz_offset)
    test = _select(bench, test_source, spec.test_days, test_provs)
    for name, part in (("training", train), ("test", test)):
        if not part.label.any():
            raise ExperimentError(f"the {name} split has no malicious numbers")
        if part.label.all():
            raise ExperimentError(f"the {name} split has no benign numbers")
    if not set(train_provs) & set(test_provs):
        shared = set(train.caller) & set(test.caller)
        if shared:
            raise ExperimentError(f"{len(shared)} callers appear in both disjoint regions")
    return Split(train, test, train_provs, test_provs)


def resample_seeds(seed: int, resample: int) -> dict:
    state = np.random.SeedSequence([seed, resample]).generate_state(4)
    return {
        "train_sample": int(state[0]),
        "test_sample": int(state[1]),
        "calibration": int(state[2]),
        "model": int(state[3] % (2**31)),
    }


def calibration_rows(table: ExampleTable, fraction: float, seed: int) -> np.ndarray:
    benign = np.flatnonzero(table.label == 0)
    k = max(1, int(round(fraction * len(benign))))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(benign, size=k, replace=False))


def malicious_sequences(table: ExampleTable) -> list[np.ndarray]:
    """Row indexes of each malicious caller's calls in stream order, callers sorted."""
    rows = np.flatnonzero(table.label == 1)
    callers = table.caller[rows]
    order = np.lexsort((table.seq[rows], callers))
    rows, callers = rows[order], callers[order]
    cuts = np.flatnonzero(callers[1:] != callers[:-1]) + 1
    return np.split(rows, cuts)


def _model_params(kind: str, params: dict, seed: int) -> dict:
    params = dict(params)
    if "random_state" in make_model(kind).get_params() and "random_state" not in params:
        params["random_state"] = seed
    return params


# --- experiment runs ------------------------------------------------------------


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    report: dict
    models: dict  # kind -> list of fitted models, one per resample
    schema: Schema


def _mean(values):
    return float(np.mean(values))


def _average(reports: list[dict], Ms) -> dict:
    afp = {str(m): _mean([r["afp"][str(m)] for r in reports]) for m in Ms}
    return {
        "auc": _mean([r["auc"] for r in reports]),
        "afp": afp,
        "reduction": {str(m): reduction_rate(afp[str(m)], m) for m in Ms},
        "baseline_afp": {str(m): float(m + 1) for m in Ms},
        "mr": [float(v) for v in np.mean([r["mr"] for r in reports], axis=0)],
    }


def run_experiment(spec: ExperimentSpec, out: str | Path | None = None, bench: Benchmark | None = None) -> ExperimentResult:
    bench = bench or load_benchmark(spec)
    split = make_split(spec, bench)
    selector = FeatureSelector.parse(spec.selector)
    schema = Schema.for_selector(selector)
    X_test = encode_matrix(split.test.raw, schema)
    y_test = split.test.label.astype(np.int64)
    sequences = malicious_sequences(split.test)
    per_model: dict[str, list] = {k: [] for k in spec.models}
    fitted: dict[str, list] = {k: [] for k in spec.models}
    resample_meta = []
    out = Path(out) if out is not None else None

    for r in range(spec.resamples):
        seeds = resample_seeds(spec.seed, r)
        train_rows = sample_rows(split.train, "balanced", seeds["train_sample"])
        auc_rows = sample_rows(split.test, "balanced", seeds["test_sample"])
        calib = calibration_rows(split.test, spec.eval.calibration_fraction, seeds["calibration"])
        X = encode_matrix(split.train.raw[train_rows], schema)
        y = split.train.label[train_rows].astype(np.int64)
        meta = {
            "resample": r,
            "seeds": seeds,
            "train_rows": int(len(train_rows)),
            "train_malicious_rows": int(y.sum()),
            "train_numbers": int(len(np.unique(split.train.caller[train_rows]))),
            "auc_rows": int(len(auc_rows)),
            "calibration_rows": int(len(calib)),
        }
        resample_meta.append(meta)
        rdir = None
        if out is not None:
            rdir = out / f"resample_{r}"
            (rdir / "models").mkdir(parents=True, exist_ok=True)
            _write_json(rdir / "manifest.json", {"seed": spec.seed, **meta, "schema_fingerprint": schema.fingerprint})
        for kind, params in spec.models.items():
            model = make_model(kind, **_model_params(kind, params, seeds["model"]))
            model.fit(X, y, schema=schema)
            scores = model.predict_score(X_test)
            report = evaluate_scores(
                scores[auc_rows], y_test[auc_rows], scores[calib], [scores[s] for s in sequences], spec.eval
            ).to_dict()
            per_model[kind].append(report)
            fitted[kind].append(model)
            if rdir is not None:
                (rdir / "models" / f"{kind}.json").write_bytes(serialize_model(model))

    report = {
        **report_header(spec),
        "selector": selector.to_dict(),
        "schema_width": schema.width,
        "schema_fingerprint": schema.fingerprint,
        "data": {
            "records": bench.n_records,
            "train_examples": int(len(split.train)),
            "test_examples": int(len(split.test)),
            "train_provinces": list(split.train_provinces),
            "test_provinces": list(split.test_provinces),
            "test_malicious_numbers": len(sequences),
        },
        "resamples": resample_meta,
        "models": {
            kind: {"mean": _average(reps, spec.eval.Ms), "per_resample": reps} for kind, reps in per_model.items()
        },
    }
    if out is not None:
        _write_json(out / "report.json", report)
        rows = [
            {"model": kind, "auc": m["mean"]["auc"], **{f"afp@{k}": v for k, v in m["mean"]["afp"].items()},
             **{f"reduction@{k}": v for k, v in m["mean"]["reduction"].items()}}
            for kind, m in report["models"].items()
        ]
        write_table(rows, out / "summary")
    return ExperimentResult(spec, report, fitted, schema)


def report_header(spec: ExperimentSpec) -> dict:
    return {"package": "malcall", "version": __version__, "seed": spec.seed, "spec": spec.to_dict()}


def ablation_suite(spec: ExperimentSpec, out: str | Path | None = None, selectors=ABLATION_SELECTORS) -> dict:
    """AUC of every model kind under each feature subset."""
    rows, widths = [], {}
    for name in selectors:
        sub_out = Path(out) / name if out is not None else None
        res = run_experiment(replace(spec, selector=name), sub_out)
        widths[name] = res.schema.width
        rows.append({"selector": name, **{k: v["mean"]["auc"] for k, v in res.report["models"].items()}})
    table = {**report_header(spec), "widths": widths, "auc": rows}
    if out is not None:
        _write_json(Path(out) / "ablation.json", table)
        write_csv(rows, Path(out) / "ablation.csv")
    return table


def feature_ranking(models, schema: Schema) -> list[dict]:
    """Internal-node counts per raw feature over the given tree models, most used first.

    One-hot columns count towards their feature; the auxiliary history length
    column is left out. Ties keep the canonical feature order.
    """
    names = schema.column_features()
    total: dict[str, int] = {}
    levels: dict[str, dict[int, int]] = {}
    for model in models:
        usage = feature_usage_histogram(model).named(names)
        for feat, count in usage.total.items():
            total[feat] = total.get(feat, 0) + count
        for level, counter in usage.by_level.items():
            for feat, count in counter.items():
                levels.setdefault(feat, {}).setdefault(level, 0)
                levels[feat][level] += count
    order = [e.feature for e in schema.entries if e.feature != "history_len"]
    ranked = sorted(order, key=lambda f: (-total.get(f, 0), order.index(f)))
    return [
        {"feature": f, "total": total.get(f, 0), **{f"level{l}": levels.get(f, {}).get(l, 0) for l in (1, 2, 3)}}
        for f in ranked
    ]


def importance_and_top10(spec: ExperimentSpec, out: str | Path | None = None, kind: str | None = None) -> dict:
    """Rank features by tree usage in the all-features run and re-run on the ten most used."""
    all_spec = replace(spec, selector="all")
    if kind is None:
        kind = next((k for k in ("forest", "gbt") if k in spec.models), None)
    if kind not in TREE_KINDS:
        raise ExperimentError("feature usage needs a forest or gbt model in the spec")
    models = dict(spec.models)
    models.setdefault(kind, {})
    all_spec = replace(all_spec, models=models)
    base = run_experiment(all_spec, Path(out) / "all" if out is not None else None)
    ranking = feature_ranking(base.models[kind], base.schema)
    top10 = [row["feature"] for row in ranking[:10]]
    top = run_experiment(replace(all_spec, selector=FeatureSelector.top10(top10).to_dict()),
                         Path(out) / "top10" if out is not None else None)
    rows = [
        {"selector": "all", **{k: v["mean"]["auc"] for k, v in base.report["models"].items()}},
        {"selector": "top10", **{k: v["mean"]["auc"] for k, v in top.report["models"].items()}},
    ]
    result = {**report_header(spec), "ranked_by": kind, "ranking": ranking, "top10": top10, "auc": rows}
    if out is not None:
        _write_json(Path(out) / "importance.json", result)
        write_csv(ranking, Path(out) / "importance.csv")
        write_csv(rows, Path(out) / "top10.csv")
    return result


def compare_baseline(result: ExperimentResult | dict, Ms=None, out: str | Path | None = None) -> dict:
    """Model AFP against the blacklist's ``M + 1`` for every model and M."""
    report = result.report if isinstance(result, ExperimentResult) else result
    Ms = Ms or report["spec"]["eval"]["Ms"]
    rows = []
    for kind, m in report["models"].items():
        per = m["per_resample"]
        for M in Ms:
            key = str(M)
            if key not in per[0]["afp"]:
                raise ExperimentError(f"the report has no AFP at M={M}")
            afp = _mean([r["afp"][key] for r in per])
            rows.append({
                "model": kind,
                "M": int(M),
                "model_afp": afp,
                "baseline_afp": float(M + 1),
                "reduction": reduction_rate(afp, int(M)),
                "baseline_reduction": reduction_rate(float(M + 1), int(M)),
            })
    table = {"package": report["package"], "version": report["version"], "seed": report["seed"],
             "spec": report["spec"], "rows": rows}
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(out) / "baseline.json", table)
        write_csv(rows, Path(out) / "baseline.csv")
    return table


def default_regions(provinces: list) -> tuple[list, list]:
    half = len(provinces) // 2
    if half == 0:
        raise ExperimentError("cross-region runs need at least two provinces")
    return list(provinces[:half]), list(provinces[half:])


def cross_region(spec: ExperimentSpec, out: str | Path | None = None) -> dict:
    """Same test region, trained once on that region and once on a disjoint one."""
    bench = load_benchmark(spec)
    other, target = default_regions(bench.provinces)
    if spec.test_provinces is not None:
        target = list(spec.test_provinces)
        other = [p for p in bench.provinces if p not in target]
    if spec.train_provinces is not None:
        other = list(spec.train_provinces)
    if set(other) & set(target):
        raise ExperimentError("cross-region training provinces overlap the test region")
    same = run_experiment(replace(spec, train_provinces=target, test_provinces=target),
                          Path(out) / "same" if out is not None else None, bench)
    cross_spec = replace(spec, train_provinces=other, test_provinces=target)
    split = make_split(cross_spec, bench)
    shared = set(split.train.caller) & set(split.test.caller)
    if shared:
        raise ExperimentError(f"{len(shared)} callers appear in both regions")
    cross = run_experiment(cross_spec, Path(out) / "cross" if out is not None else None, bench)
    rows = []
    for kind in spec.models:
        a = same.report["models"][kind]["mean"]["auc"]
        b = cross.report["models"][kind]["mean"]["auc"]
        rows.append({"model": kind, "same_region_auc": a, "cross_region_auc": b, "difference": b - a})
    table = {
        **report_header(spec),
        "test_region": target,
        "cross_train_region": other,
        "disjoint_callers": True,
        "shared_callers": 0,
        "train_callers": int(len(set(split.train.caller))),
        "test_callers": int(len(set(split.test.caller))),
        "auc": rows,
    }
    if out is not None:
        _write_json(Path(out) / "cross_region.json", table)
        write_csv(rows, Path(out) / "cross_region.csv")
    return table


# --- output helpers -------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_csv(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_table(rows: list[dict], base: Path) -> None:
    """Write ``rows`` as ``base.json`` and ``base.csv``."""
    base = Path(base)
    _write_json(base.with_suffix(".json"), rows)
    write_csv(rows, base.with_suffix(".csv"))
