"""Incremental per-number call counters with "before the record" snapshots."""

from __future__ import annotations

from ..call_log import CallRecord, Direction


class OrderingError(ValueError):
    """A record arrived out of (call_date, seq) order."""


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


class CounterState:
    """Streaming counters over a call log.

    Tracks, per number, outgoing/incoming call counts and the distinct
    counterparts on each side; per unordered pair, the number of calls; and
    per number, the counterpart of its most recent call.

    A call between two TouchPal users is logged twice. Only the callee-side
    (incoming) record updates the counters so the call is counted once; the
    outgoing twin is order-checked and otherwise ignored.
    """

    def __init__(self, touchpal_users=frozenset()):
        self.touchpal_users = frozenset(touchpal_users)
        self.outs: dict[str, int] = {}
        self.ins: dict[str, int] = {}
        self.out_peers: dict[str, set[str]] = {}
        self.in_peers: dict[str, set[str]] = {}
        self.pair_calls: dict[tuple[str, str], int] = {}
        self.last_peer: dict[str, str] = {}
        self.last_seq: dict[str, int] = {}
        self.position: tuple[int, int] | None = None

    def counts(self, record: CallRecord) -> bool:
        """Whether ``record`` contributes to the counters (i.e. is not a mirror twin)."""
        return not (record.call_type is Direction.OUTGOING and record.other_phone in self.touchpal_users)

    def update(self, record: CallRecord) -> "CounterState":
        key = (record.call_date, record.seq)
        if self.position is not None and key <= self.position:
            raise OrderingError(f"record seq={record.seq} at {record.call_date} is not after {self.position}")
        self.position = key
        if not self.counts(record):
            return self
        caller, callee = record.caller, record.callee
        self.outs[caller] = self.outs.get(caller, 0) + 1
        self.ins[callee] = self.ins.get(callee, 0) + 1
        peers = self.out_peers.get(caller)
        if peers is None:
            self.out_peers[caller] = {callee}
        else:
            peers.add(callee)
        peers = self.in_peers.get(callee)
        if peers is None:
            self.in_peers[callee] = {caller}
        else:
            peers.add(caller)
        pk = pair_key(caller, callee)
        self.pair_calls[pk] = self.pair_calls.get(pk, 0) + 1
        self.last_peer[caller] = callee
        self.last_peer[callee] = caller
        self.last_seq[caller] = record.seq
        self.last_seq[callee] = record.seq
        return self

    def snapshot(self, phone: str) -> tuple[int, int, int, int]:
        """``(outs, ins, outdegree, indegree)`` of ``phone``; zeros if unseen."""
        out_peers = self.out_peers.get(phone)
        in_peers = self.in_peers.get(phone)
        return (
            self.outs.get(phone, 0),
            self.ins.get(phone, 0),
            len(out_peers) if out_peers else 0,
            len(in_peers) if in_peers else 0,
        )

    def pair_count(self, a: str, b: str) -> int:
        return self.pair_calls.get(pair_key(a, b), 0)

    def last_counterpart(self, phone: str) -> str | None:
        return self.last_peer.get(phone)


def update_counters(state: CounterState, record: CallRecord) -> CounterState:
    return state.update(record)


def snapshot_counters(state: CounterState, phone: str) -> tuple[int, int, int, int]:
    return state.snapshot(phone)
