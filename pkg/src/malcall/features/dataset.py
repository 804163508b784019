"""Labelled datasets assembled from extracted examples."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..call_log import CallLog
from .encoding import FeatureSelector, Schema, encode_matrix
from .extract import ExampleTable, extract_examples

SAMPLING_MODES = ("balanced", "all", "all_benign")


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray  # caller number of every row
    schema: Schema
    rows: np.ndarray  # row indexes into the source ExampleTable
    selector: FeatureSelector
    sampling: str
    seed: int | None = None

    def __post_init__(self):
        if not (len(self.X) == len(self.y) == len(self.groups) == len(self.rows)):
            raise DatasetError("X, y, groups and rows must be aligned")

    def __len__(self) -> int:
        return len(self.y)

    def manifest(self) -> dict:
        numbers = np.unique(self.groups) if len(self.groups) else np.array([], dtype=object)
        mal_numbers = np.unique(self.groups[self.y == 1]) if len(self.groups) else numbers
        return {
            "selector": self.selector.to_dict(),
            "sampling": self.sampling,
            "seed": self.seed,
            "schema": self.schema.to_list(),
            "schema_fingerprint": self.schema.fingerprint,
            "rows": int(len(self.y)),
            "malicious_rows": int(self.y.sum()),
            "numbers": int(len(numbers)),
            "malicious_numbers": int(len(mal_numbers)),
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.schema.columns + ["label", "caller"])
            for x, label, caller in zip(self.X, self.y, self.groups):
                writer.writerow([repr(float(v)) for v in x] + [int(label), caller])

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=1, sort_keys=True))


def sample_rows(table: ExampleTable, sampling: str, seed: int | None = None) -> np.ndarray:
    """Row indexes selected by a sampling mode.

    ``balanced`` keeps every malicious number and an equally sized random
    subset of benign numbers, with all of their rows; ``all`` keeps every
    row; ``all_benign`` keeps every benign row.
    """
    if sampling not in SAMPLING_MODES:
        raise DatasetError(f"unknown sampling mode {sampling!r}")
    idx = np.arange(len(table))
    if sampling == "all":
        return idx
    benign_mask = table.label == 0
    if sampling == "all_benign":
        return idx[benign_mask]
    mal_numbers = np.unique(table.caller[~benign_mask]) if (~benign_mask).any() else []
    if len(mal_numbers) == 0:
        raise DatasetError("balanced sampling needs at least one malicious number")
    benign_numbers = np.unique(table.caller[benign_mask])
    rng = np.random.default_rng(seed)
    k = min(len(mal_numbers), len(benign_numbers))
    chosen = benign_numbers[np.sort(rng.choice(len(benign_numbers), size=k, replace=False))]
    keep = ~benign_mask | np.isin(table.caller, chosen)
    return idx[keep]


def build_dataset(
    source: ExampleTable | CallLog,
    selector: FeatureSelector | str = "all",
    sampling: str = "balanced",
    seed: int | None = 0,
    labels: dict[str, bool] | None = None,
) -> Dataset:
    """Encode the selected rows of an example table (or of a freshly streamed log)."""
    table = extract_examples(source, labels) if isinstance(source, CallLog) else source
    selector = FeatureSelector.parse(selector)
    rows = sample_rows(table, sampling, seed)
    schema = Schema.for_selector(selector)
    X = encode_matrix(table.raw[rows], schema) if len(rows) else np.zeros((0, schema.width))
    return Dataset(
        X=X,
        y=table.label[rows].astype(np.int64),
        groups=table.caller[rows],
        schema=schema,
        rows=rows,
        selector=selector,
        sampling=sampling,
        seed=seed,
    )
