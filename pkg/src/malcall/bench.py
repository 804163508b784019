"""Per-prediction latency of feature assembly, encoding and scoring."""

from __future__ import annotations

import time

import numpy as np

from .call_log import CallLog
from .features import RAW_COLUMNS, Schema, StreamingExtractor, encode_matrix, historic_block

N_CURRENT = 13


def collect_inputs(log: CallLog, n_inputs: int = 1000, max_history: int = 5) -> list[tuple]:
    """Capture ``(current_values, history, call_date)`` for calls whose caller has ``max_history`` prior records.

    Streaming stops as soon as ``n_inputs`` instances are collected, so the
    inputs come from the start of the log.
    """
    ext = StreamingExtractor(log.touchpal_users, history_cap=max_history)
    inputs = []
    for record in log:
        history = ext.history(record.other_phone) if record.incoming else []
        row = ext.process(record)
        if row is not None and len(history) >= max_history:
            inputs.append((tuple(row[:N_CURRENT]), history[-max_history:], record.call_date))
            if len(inputs) == n_inputs:
                break
    if not inputs:
        raise ValueError(f"no caller in the log has {max_history} prior records")
    return inputs


def predict_one(model, schema: Schema, current, history, call_date) -> float:
    """Assemble the raw row from the current values and history, encode it and score it."""
    row = np.empty(len(RAW_COLUMNS))
    row[:N_CURRENT] = current
    row[N_CURRENT:-1] = historic_block(history, call_date)
    row[-1] = len(history)
    return float(model.predict_score(encode_matrix(row, schema))[0])


def bench_latency(models: dict, schema: Schema, inputs, iterations: int = 10_000, repetitions: int = 5,
                  history_lengths=(1, 2, 3, 4, 5), seed: int = 0) -> list[dict]:
    """Wall time per prediction in milliseconds, per model and history length.

    Each repetition runs ``iterations`` predictions, cycling through the
    history lengths; inputs are drawn from the preloaded ``inputs``. The
    statistics pool all repetitions.
    """
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(inputs), size=iterations)
    lengths = np.resize(np.asarray(history_lengths), iterations)
    rows = []
    for kind, model in models.items():
        times = np.empty((repetitions, iterations))
        for rep in range(repetitions):
            for i in range(iterations):
                current, history, date = inputs[picks[i]]
                t0 = time.perf_counter()
                predict_one(model, schema, current, history[-lengths[i]:], date)
                times[rep, i] = time.perf_counter() - t0
        times *= 1e3
        for n in (None, *history_lengths):
            sample = times if n is None else times[:, lengths == n]
            rows.append({
                "model": kind,
                "history_len": "all" if n is None else int(n),
                "mean_ms": float(sample.mean()),
                "p50_ms": float(np.percentile(sample, 50)),
                "p99_ms": float(np.percentile(sample, 99)),
                "predictions": int(sample.size),
            })
    return rows
