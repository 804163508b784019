"""Slow, independent reference implementations used to check the fast code paths."""

from __future__ import annotations

from bisect import bisect_left

import numpy as np

from malcall.call_log import CallLog, Direction


class RescanOracle:
    """Recomputes every feature of a record by scanning the log prefix before it.

    Shares no state with the streaming extractor: each query recounts the
    counted records that precede the one in question, located through
    per-number position lists of the whole log.
    """

    def __init__(self, log: CallLog, history_cap: int = 100):
        self.records = list(log.records)
        registry = log.touchpal_users
        self.registry = registry
        self.history_cap = history_cap
        ids: dict[str, int] = {}

        def code(p):
            return ids.setdefault(p, len(ids))

        self.caller = np.array([code(r.caller) for r in self.records])
        self.callee = np.array([code(r.callee) for r in self.records])
        self.other = np.array([code(r.other_phone) for r in self.records])
        self.user = np.array([code(r.user_id) for r in self.records])
        # the outgoing copy of a call between two registered users is a duplicate
        self.counted = np.array(
            [not (r.call_type is Direction.OUTGOING and r.other_phone in registry) for r in self.records]
        )
        self.dates = np.array([r.call_date for r in self.records])
        self._values = np.zeros((len(self.records), 15))
        self._known = np.zeros(len(self.records), dtype=bool)
        # counted records in order; the log prefix before j holds the first n_before[j] of them
        self.c_caller = self.caller[self.counted]
        self.c_callee = self.callee[self.counted]
        self.n_before = np.concatenate([[0], np.cumsum(self.counted)])
        self.c_caller_list = self.c_caller.tolist()
        self.c_callee_list = self.c_callee.tolist()
        self.by_caller = {k: v.tolist() for k, v in _positions_by_value(self.c_caller).items()}
        self.by_callee = {k: v.tolist() for k, v in _positions_by_value(self.c_callee).items()}
        self.by_party = {}
        for phone, pos in _positions_by_value(self.other).items():
            self.by_party[phone] = pos
        for phone, pos in _positions_by_value(self.user).items():
            self.by_party[phone] = np.union1d(self.by_party.get(phone, pos), pos)

    def _positions(self, index, phone, j) -> list:
        pos = index.get(phone, ())
        return pos[: bisect_left(pos, self.n_before[j])]

    def counters(self, phone: int, j: int) -> tuple[int, int, int, int]:
        as_caller = self._positions(self.by_caller, phone, j)
        as_callee = self._positions(self.by_callee, phone, j)
        callee, caller = self.c_callee_list, self.c_caller_list
        return (
            len(as_caller),
            len(as_callee),
            len({callee[k] for k in as_caller}),
            len({caller[k] for k in as_callee}),
        )

    def pair_calls(self, a: int, b: int, j: int) -> int:
        callee, caller = self.c_callee_list, self.c_caller_list
        return sum(callee[k] == b for k in self._positions(self.by_caller, a, j)) + sum(
            caller[k] == b for k in self._positions(self.by_callee, a, j)
        )

    def last_counterpart(self, phone: int, j: int):
        best = None
        for index, other in ((self.by_caller, self.c_callee_list), (self.by_callee, self.c_caller_list)):
            pos = self._positions(index, phone, j)
            if pos and (best is None or pos[-1] > best[0]):
                best = (pos[-1], other[pos[-1]])
        return None if best is None else best[1]

    @staticmethod
    def calendar(ts):
        return (ts // 86400 + 3) % 7, (ts % 86400) // 3600

    def record_values(self, j: int) -> np.ndarray:
        """Per-record values of record ``j`` as seen just before it."""
        if not self._known[j]:
            r = self.records[j]
            a, b = self.caller[j], self.callee[j]
            weekday, hour = self.calendar(r.call_date)
            self._values[j] = (
                int(r.call_contact),
                int(r.call_type is Direction.OUTGOING),
                r.call_duration,
                weekday,
                hour,
                int(r.other_province == r.user_province),
                *self.counters(a, j),
                *self.counters(b, j),
                int(self.last_counterpart(a, j) == b),
            )
            self._known[j] = True
        return self._values[j]

    def features(self, i: int) -> dict:
        """All raw feature values of record ``i``, keyed by name."""
        r = self.records[i]
        assert r.call_type is Direction.INCOMING and r.other_phone not in self.registry
        caller, callee = self.other[i], self.user[i]
        weekday, hour = self.calendar(r.call_date)
        out = {
            "is_in_contact": int(r.call_contact),
            "weekday": weekday,
            "hour": hour,
            "same_location": int(r.other_province == r.user_province),
        }
        for side, phone in (("caller", caller), ("callee", callee)):
            for name, v in zip(("outs", "ins", "outdegree", "indegree"), self.counters(phone, i)):
                out[f"{side}_{name}"] = v
        out["n_call"] = self.pair_calls(caller, callee, i) + 1
        involved = self.by_party[caller]
        involved = involved[: np.searchsorted(involved, i)]
        history = involved[-self.history_cap :]
        names = (
            "is_in_contact", "call_type", "duration", "weekday", "hour", "same_location",
            "caller_outs", "caller_ins", "caller_outdegree", "caller_indegree",
            "callee_outs", "callee_ins", "callee_outdegree", "callee_indegree", "is_redial",
        )
        n = len(history)
        if n:
            for j in history[~self._known[history]]:
                self.record_values(j)
            means = self._values[history].mean(axis=0)
            for k, name in enumerate(names):
                out["hist_" + name] = means[k]
            dates = np.append(self.dates[history], r.call_date)
            out["hist_gap_to_next"] = np.diff(dates).mean()
        else:
            for name in names + ("gap_to_next",):
                out["hist_" + name] = 0.0
        out["history_len"] = n
        return out


def _positions_by_value(values: np.ndarray) -> dict:
    order = np.argsort(values, kind="stable")
    uniq, starts = np.unique(values[order], return_index=True)
    return {int(v): pos for v, pos in zip(uniq, np.split(order, starts[1:]))}


def pairwise_auc(scores, labels) -> float:
    """AUC by comparing every positive with every negative; ties count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    wins = np.count_nonzero(pos > neg) + 0.5 * np.count_nonzero(pos == neg)
    return wins / (pos.size * neg.size)


def finite_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        hi = f(x)
        x[idx] = orig - eps
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * eps)
    return grad


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def oracle_mismatches(log: CallLog, table, rtol: float = 1e-9) -> tuple[int, list]:
    """Compare every row of an extracted example table with the rescan oracle.

    Integer-valued columns must match exactly and means within ``rtol``.
    Returns the number of rows checked and the mismatching ``(row, column)`` pairs.
    """
    from malcall.features import RAW_COLUMNS

    oracle = RescanOracle(log)
    position = {r.seq: i for i, r in enumerate(log.records)}
    exact = np.array([not c.startswith("hist_") for c in RAW_COLUMNS])
    bad = []
    for k in range(len(table)):
        f = oracle.features(position[int(table.seq[k])])
        expected = np.array([f[c] for c in RAW_COLUMNS], dtype=float)
        got = table.raw[k]
        ok = np.where(exact, got == expected, np.abs(got - expected) <= rtol * np.abs(expected))
        bad.extend((k, RAW_COLUMNS[c]) for c in np.flatnonzero(~ok))
    return len(table), bad


def _vector_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def logistic_gradient_errors(n_probes: int = 20, seed: int = 0) -> list[float]:
    """Relative error between analytic and central-difference logistic gradients at random probes."""
    from malcall.models.linear import logistic_loss_grad

    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_probes):
        n, d = rng.integers(5, 40), rng.integers(1, 12)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        alpha = rng.uniform(0, 0.1)
        theta = rng.normal(size=d + 1)
        _, gw, gb = logistic_loss_grad(theta[:d], theta[d], X, y, alpha)
        numeric = finite_difference(lambda t: logistic_loss_grad(t[:d], t[d], X, y, alpha)[0], theta)
        errors.append(_vector_rel_error(np.append(gw, gb), numeric))
    return errors


def mlp_gradient_errors(n_probes: int = 20, seed: int = 0) -> list[float]:
    """Relative error between analytic and central-difference MLP gradients at random probes."""
    from malcall.models.mlp import MLPClassifier, mlp_loss_grad

    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_probes):
        n, d, hidden = rng.integers(5, 30), rng.integers(1, 10), rng.integers(2, 21)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        params = MLPClassifier(hidden=hidden).init_params(d, rng)
        params = {k: v + rng.normal(scale=0.1, size=v.shape) for k, v in params.items()}
        _, grads = mlp_loss_grad(params, X, y)
        keys = sorted(params)
        flat = np.concatenate([params[k].ravel() for k in keys])
        shapes = [params[k].shape for k in keys]

        def loss(v):
            out, i = {}, 0
            for k, s in zip(keys, shapes):
                size = int(np.prod(s))
                out[k] = v[i : i + size].reshape(s)
                i += size
            return mlp_loss_grad(out, X, y)[0]

        analytic = np.concatenate([grads[k].ravel() for k in keys])
        errors.append(_vector_rel_error(analytic, finite_difference(loss, flat)))
    return errors
