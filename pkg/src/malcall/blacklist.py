"""Counting blacklist: a number is blocked once its malicious-label count reaches its threshold."""

from __future__ import annotations

import json
from collections import defaultdict

import numpy as np

from .call_log import CallTag


class BlacklistState:
    """Per-number malicious-label counts with a global threshold and optional overrides.

    Labels keep accruing after a number is blocked.
    """

    def __init__(self, M: int = 10, overrides: dict | None = None):
        if M < 1:
            raise ValueError(f"threshold must be >= 1, got {M}")
        self.M = int(M)
        self.overrides = {}
        for phone, m in (overrides or {}).items():
            self.set_threshold(phone, m)
        self.counts: dict[str, int] = defaultdict(int)

    def set_threshold(self, phone: str, M: int) -> None:
        if M < 1:
            raise ValueError(f"threshold must be >= 1, got {M}")
        self.overrides[phone] = int(M)

    def threshold(self, phone: str) -> int:
        return self.overrides.get(phone, self.M)

    def process_label(self, phone: str, tag) -> "BlacklistState":
        if CallTag(tag).malicious:
            self.counts[phone] += 1
        return self

    def count(self, phone: str) -> int:
        return self.counts.get(phone, 0)

    def blocked(self, phone: str) -> bool:
        return self.count(phone) >= self.threshold(phone)

    def snapshot(self) -> dict:
        phones = sorted(set(self.counts) | set(self.overrides))
        return {
            "M": self.M,
            "numbers": {
                p: {"count": self.count(p), "threshold": self.threshold(p), "blocked": self.blocked(p)}
                for p in phones
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, indent=2)

    @classmethod
    def from_snapshot(cls, snap: dict) -> "BlacklistState":
        state = cls(snap["M"])
        for phone, entry in snap["numbers"].items():
            if entry["threshold"] != state.M:
                state.set_threshold(phone, entry["threshold"])
            if entry["count"]:
                state.counts[phone] = int(entry["count"])
        return state


def process_label(state: BlacklistState, phone: str, tag) -> BlacklistState:
    return state.process_label(phone, tag)


def baseline_fp(records, M: int) -> int:
    """Blacklist analogue of ``fp_at`` when every malicious call gets labelled: ``M + 1``."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if len(records) == 0:
        raise ValueError("number has no calls")
    return M + 1


def baseline_afp(sequences, M: int) -> float:
    return float(np.mean([baseline_fp(s, M) for s in sequences])) if len(sequences) else _empty()


def _empty():
    raise ValueError("no malicious numbers")


def replay_block_index(tags, M: int) -> int:
    """1-based index of the first call arriving after the M-th malicious label.

    Returns ``len(tags) + 1`` when the count never reaches ``M``. Unlike
    ``baseline_fp`` this is not capped, so missing labels show up directly.
    """
    state = BlacklistState(M)
    for i, tag in enumerate(tags, start=1):
        state.process_label("x", tag)
        if state.blocked("x"):
            return i + 1
    return len(tags) + 1


def drop_labels(tags, q: float, uniforms) -> list[CallTag]:
    """Replace a malicious tag by NONE wherever ``uniforms[i] < q``.

    Sharing ``uniforms`` across values of ``q`` couples the drops so that a
    larger ``q`` drops a superset of labels.
    """
    return [CallTag.NONE if CallTag(t).malicious and u < q else CallTag(t) for t, u in zip(tags, uniforms)]
