"""Per-call feature extraction over a streaming call log.

Every prediction instance is an incoming call to a TouchPal user from a
non-TouchPal number. It is described by 13 *current* features of the call
itself and 16 *historic* features, each the mean of a per-record value over
the caller's earlier records (most recent ``history_cap`` of them).
"""

from __future__ import annotations

from collections import deque
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from ..call_log import CallLog, CallRecord, Direction, labels_from_tags
from .counters import CounterState

COUNTER_NAMES = (
    "caller_outs",
    "caller_ins",
    "caller_outdegree",
    "caller_indegree",
    "callee_outs",
    "callee_ins",
    "callee_outdegree",
    "callee_indegree",
)
CURRENT_FEATURES = ("is_in_contact", "weekday", "hour", "same_location") + COUNTER_NAMES + ("n_call",)
# per-record values that are averaged over the caller's history, in vector order
RECORD_VALUES = (
    ("is_in_contact", "call_type", "duration", "weekday", "hour", "same_location")
    + COUNTER_NAMES
    + ("is_redial",)
)
HISTORIC_FEATURES = tuple("hist_" + name for name in RECORD_VALUES + ("gap_to_next",))
FEATURE_NAMES = CURRENT_FEATURES + HISTORIC_FEATURES
RAW_COLUMNS = FEATURE_NAMES + ("history_len",)

N_RECORD_VALUES = len(RECORD_VALUES)
DEFAULT_HISTORY_CAP = 100

assert len(CURRENT_FEATURES) == 13 and len(HISTORIC_FEATURES) == 16


class NotAPredictionInstance(ValueError):
    """The record is not an incoming call from a non-TouchPal number."""


@dataclass(frozen=True)
class RawFeatures:
    """The 29 named feature values of one prediction instance plus history length."""

    is_in_contact: int
    weekday: int
    hour: int
    same_location: int
    caller_outs: int
    caller_ins: int
    caller_outdegree: int
    caller_indegree: int
    callee_outs: int
    callee_ins: int
    callee_outdegree: int
    callee_indegree: int
    n_call: int
    hist_is_in_contact: float = 0.0
    hist_call_type: float = 0.0
    hist_duration: float = 0.0
    hist_weekday: float = 0.0
    hist_hour: float = 0.0
    hist_same_location: float = 0.0
    hist_caller_outs: float = 0.0
    hist_caller_ins: float = 0.0
    hist_caller_outdegree: float = 0.0
    hist_caller_indegree: float = 0.0
    hist_callee_outs: float = 0.0
    hist_callee_ins: float = 0.0
    hist_callee_outdegree: float = 0.0
    hist_callee_indegree: float = 0.0
    hist_is_redial: float = 0.0
    hist_gap_to_next: float = 0.0
    history_len: int = 0

    def to_array(self) -> np.ndarray:
        return np.asarray(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, row: Sequence[float]) -> "RawFeatures":
        values = []
        for f, v in zip(fields(cls), row):
            values.append(int(v) if f.type in ("int", int) else float(v))
        return cls(*values)


assert tuple(f.name for f in fields(RawFeatures)) == RAW_COLUMNS


def calendar(ts: int, tz_offset: int = 0) -> tuple[int, int]:
    """``(weekday, hour)`` of a Unix timestamp; Monday is 0."""
    local = ts + tz_offset
    days = local // 86400
    return (days + 3) % 7, (local % 86400) // 3600


def record_vector(state: CounterState, record: CallRecord, tz_offset: int = 0) -> tuple:
    """Per-record values (``RECORD_VALUES`` order) using counters strictly before ``record``."""
    caller, callee = record.caller, record.callee
    weekday, hour = calendar(record.call_date, tz_offset)
    return (
        int(record.call_contact),
        int(record.call_type is Direction.OUTGOING),
        record.call_duration,
        weekday,
        hour,
        int(record.other_province == record.user_province),
        *state.snapshot(caller),
        *state.snapshot(callee),
        int(state.last_counterpart(caller) == callee),
    )


@dataclass(frozen=True)
class HistoryItem:
    call_date: int
    values: tuple


def extract_example(
    state: CounterState,
    record: CallRecord,
    history: Sequence[HistoryItem],
    tz_offset: int = 0,
) -> RawFeatures:
    """Features of ``record`` given counters and caller history that precede it.

    ``history`` holds the caller's earlier records in time order, each with
    its per-record values captured before that record was counted.
    """
    if record.call_type is not Direction.INCOMING or record.other_phone in state.touchpal_users:
        raise NotAPredictionInstance(f"record seq={record.seq} is not an incoming call from a non-TouchPal number")
    caller, callee = record.other_phone, record.user_id
    weekday, hour = calendar(record.call_date, tz_offset)
    current = (
        int(record.call_contact),
        weekday,
        hour,
        int(record.other_province == record.user_province),
        *state.snapshot(caller),
        *state.snapshot(callee),
        state.pair_count(caller, callee) + 1,
    )
    if not history:
        return RawFeatures(*current)
    return RawFeatures(*current, *historic_block(history, record.call_date), len(history))


def historic_block(history: Sequence[HistoryItem], call_date: int) -> list[float]:
    """Means of the per-record values over ``history`` plus the mean gap to the next call.

    The last history item's gap runs to the current call at ``call_date``.
    """
    n = len(history)
    sums = np.sum([item.values for item in history], axis=0, dtype=float)
    gaps = [history[i + 1].call_date - history[i].call_date for i in range(n - 1)]
    gaps.append(call_date - history[-1].call_date)
    return [s / n for s in sums] + [sum(gaps) / n]


class StreamingExtractor:
    """Feeds records in order and emits a raw feature row per prediction instance.

    Historic means are kept as running sums over a bounded window per
    non-TouchPal number; all summed values are integers, so the means are
    exact regardless of window churn.
    """

    def __init__(self, touchpal_users=frozenset(), history_cap: int = DEFAULT_HISTORY_CAP, tz_offset: int = 0):
        if history_cap < 1:
            raise ValueError("history_cap must be >= 1")
        self.state = CounterState(touchpal_users)
        self.history_cap = history_cap
        self.tz_offset = tz_offset
        self._windows: dict[str, deque] = {}
        self._sums: dict[str, list] = {}

    def history(self, phone: str) -> list[HistoryItem]:
        return [HistoryItem(d, v) for d, v in self._windows.get(phone, ())]

    def _remember(self, phone: str, date: int, values: tuple) -> None:
        window = self._windows.get(phone)
        if window is None:
            self._windows[phone] = deque([(date, values)])
            self._sums[phone] = list(values)
            return
        sums = self._sums[phone]
        if len(window) == self.history_cap:
            _, old = window.popleft()
            for i in range(N_RECORD_VALUES):
                sums[i] -= old[i]
        window.append((date, values))
        for i in range(N_RECORD_VALUES):
            sums[i] += values[i]

    def process(self, record: CallRecord) -> list | None:
        """Consume one record; return its raw row if it is a prediction instance."""
        state = self.state
        registry = state.touchpal_users
        values = record_vector(state, record, self.tz_offset)
        row = None
        other = record.other_phone
        if record.call_type is Direction.INCOMING and other not in registry:
            caller, callee = other, record.user_id
            row = [
                values[0], values[3], values[4], values[5],
                *values[6:14],
                state.pair_count(caller, callee) + 1,
            ]
            window = self._windows.get(caller)
            if window:
                n = len(window)
                row.extend(s / n for s in self._sums[caller])
                row.append((record.call_date - window[0][0]) / n)
                row.append(n)
            else:
                row.extend([0.0] * (N_RECORD_VALUES + 1))
                row.append(0)
        state.update(record)
        if other not in registry:
            self._remember(other, record.call_date, values)
        if record.user_id not in registry:
            self._remember(record.user_id, record.call_date, values)
        return row


@dataclass
class ExampleTable:
    """All prediction instances of a log: raw feature rows plus row metadata."""

    raw: np.ndarray  # (n, len(RAW_COLUMNS))
    caller: np.ndarray  # str
    callee: np.ndarray  # str
    label: np.ndarray  # int8
    call_date: np.ndarray  # int64
    seq: np.ndarray  # int64
    caller_province: np.ndarray  # str
    callee_province: np.ndarray  # str

    def __len__(self) -> int:
        return len(self.label)

    def subset(self, mask) -> "ExampleTable":
        return ExampleTable(*(getattr(self, f.name)[mask] for f in fields(self)))

    def raw_features(self, i: int) -> RawFeatures:
        return RawFeatures.from_array(self.raw[i])


def extract_examples(
    log: CallLog | Iterable[CallRecord],
    labels: dict[str, bool] | None = None,
    touchpal_users=None,
    history_cap: int = DEFAULT_HISTORY_CAP,
    tz_offset: int = 0,
    since: int | None = None,
) -> ExampleTable:
    """Stream a whole log and collect every prediction instance.

    Records dated before ``since`` are dropped before streaming, i.e. the
    counters and histories start fresh at ``since``.
    """
    records = log.records if isinstance(log, CallLog) else list(log)
    if touchpal_users is None:
        touchpal_users = log.touchpal_users if isinstance(log, CallLog) else frozenset()
    if labels is None:
        labels = labels_from_tags(records)
    ext = StreamingExtractor(touchpal_users, history_cap, tz_offset)
    rows, callers, callees, dates, seqs, cprov, uprov = [], [], [], [], [], [], []
    for rec in records:
        if since is not None and rec.call_date < since:
            continue
        row = ext.process(rec)
        if row is not None:
            rows.append(row)
            callers.append(rec.other_phone)
            callees.append(rec.user_id)
            dates.append(rec.call_date)
            seqs.append(rec.seq)
            cprov.append(rec.other_province)
            uprov.append(rec.user_province)
    raw = np.asarray(rows, dtype=float).reshape(len(rows), len(RAW_COLUMNS))
    caller_arr = np.asarray(callers, dtype=object)
    label = np.fromiter((labels.get(c, False) for c in callers), dtype=np.int8, count=len(callers))
    return ExampleTable(
        raw=raw,
        caller=caller_arr,
        callee=np.asarray(callees, dtype=object),
        label=label,
        call_date=np.asarray(dates, dtype=np.int64),
        seq=np.asarray(seqs, dtype=np.int64),
        caller_province=np.asarray(cprov, dtype=object),
        callee_province=np.asarray(uprov, dtype=object),
    )
