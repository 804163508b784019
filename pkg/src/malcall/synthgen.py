"""Seeded synthetic call-log generator.

Population sizes, temporal profiles and volume tails are config driven. The
defaults are tuned so that a 30-day log reproduces the coarse shape of a
real deployment: under 1% of records are malicious, malicious numbers place
~91 tagged calls each, concentrate on working hours and weekdays, spray many
distinct callees and are long-lived more often than benign numbers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .call_log import CallLog, CallRecord, CallTag, Direction, LogMeta

SECONDS_PER_DAY = 86400
# 2016-10-03 00:00:00 UTC, a Monday
DEFAULT_START = 1475452800

DEFAULT_PROVINCES = [
    ("BJ", 0.20),
    ("GD", 0.17),
    ("ZJ", 0.14),
    ("SH", 0.12),
    ("SC", 0.12),
    ("AH", 0.09),
    ("GZ", 0.08),
    ("JL", 0.08),
]

BENIGN_HOURS = [
    0.5, 0.3, 0.2, 0.2, 0.2, 0.4, 1.0, 2.2, 3.6, 4.6, 5.0, 5.0,
    4.6, 4.6, 4.8, 4.8, 4.8, 5.0, 5.0, 5.2, 5.0, 4.2, 2.8, 1.4,
]
MALICIOUS_HOURS = [
    0.1, 0.05, 0.05, 0.05, 0.05, 0.1, 0.3, 1.0, 3.0, 7.0, 8.0, 8.0,
    4.0, 7.0, 8.0, 8.0, 7.0, 4.0, 1.5, 0.8, 0.5, 0.3, 0.2, 0.1,
]


class ConfigError(ValueError):
    """The generator configuration is invalid or cannot meet its targets."""


@dataclass
class ClassProfile:
    """Behavioural knobs for one population (benign or malicious numbers)."""

    hours: list[float]
    weekend_multiplier: float
    tail_exponent: float
    min_budget: int
    budget_cap: int
    pool_fraction: float
    repeat_affinity: float
    full_span_prob: float
    duration_median: float
    duration_sigma: float = 1.0

    def hour_weights(self) -> np.ndarray:
        w = np.asarray(self.hours, dtype=float)
        return w / w.sum()


def default_benign_profile() -> ClassProfile:
    return ClassProfile(
        hours=list(BENIGN_HOURS),
        weekend_multiplier=0.9,
        tail_exponent=2.0,
        min_budget=1,
        budget_cap=3000,
        pool_fraction=0.15,
        repeat_affinity=0.9,
        full_span_prob=0.35,
        duration_median=60.0,
    )


def default_malicious_profile() -> ClassProfile:
    return ClassProfile(
        hours=list(MALICIOUS_HOURS),
        weekend_multiplier=0.3,
        tail_exponent=1.6,
        min_budget=5,
        budget_cap=3000,
        pool_fraction=1.0,
        repeat_affinity=0.05,
        full_span_prob=0.55,
        duration_median=20.0,
    )


@dataclass
class GeneratorConfig:
    seed: int = 0
    days: int = 30
    start: int = DEFAULT_START
    provinces: list[tuple[str, float]] = field(default_factory=lambda: list(DEFAULT_PROVINCES))
    n_touchpal_users: int = 2000
    n_benign_others: int = 12000
    n_malicious: int = 40
    malicious_calls_per_number_mean: float = 91.0
    malicious_record_fraction_target: float = 0.008
    # only used when there are no malicious numbers to anchor the volume
    benign_calls_per_number_mean: float = 30.0
    contact_rate_malicious: float = 0.1356
    contact_rate_benign: float = 0.65
    contact_rate_business: float = 0.2
    business_fraction: float = 0.08
    business_duration_median: float = 90.0
    same_province_affinity: float = 0.8
    redial_prob: float = 0.25
    redial_gap_mean: float = 90.0
    touchpal_call_share: float = 0.15
    callback_rate: float = 0.03
    tag_drop_prob: float = 0.0
    benign_tag_rate: float = 0.01
    duration_cap: int = 3600
    benign: ClassProfile = field(default_factory=default_benign_profile)
    malicious: ClassProfile = field(default_factory=default_malicious_profile)

    def validate(self) -> None:
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if self.n_touchpal_users < 2:
            raise ConfigError("n_touchpal_users must be >= 2")
        if self.n_benign_others < 1:
            raise ConfigError("n_benign_others must be >= 1")
        if self.n_malicious < 0:
            raise ConfigError("n_malicious must be >= 0")
        if not self.provinces:
            raise ConfigError("at least one province is required")
        if any(w < 0 for _, w in self.provinces) or sum(w for _, w in self.provinces) <= 0:
            raise ConfigError("province weights must be >= 0 with a positive sum")
        for name in (
            "malicious_record_fraction_target",
            "contact_rate_malicious",
            "contact_rate_benign",
            "contact_rate_business",
            "business_fraction",
            "same_province_affinity",
            "redial_prob",
            "touchpal_call_share",
            "callback_rate",
            "tag_drop_prob",
            "benign_tag_rate",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.touchpal_call_share >= 1.0:
            raise ConfigError("touchpal_call_share must be < 1")
        for label, prof in (("benign", self.benign), ("malicious", self.malicious)):
            if len(prof.hours) != 24 or any(h < 0 for h in prof.hours) or sum(prof.hours) <= 0:
                raise ConfigError(f"{label}.hours must be 24 non-negative weights with a positive sum")
            if prof.weekend_multiplier < 0:
                raise ConfigError(f"{label}.weekend_multiplier must be >= 0")
            if prof.min_budget < 1 or prof.budget_cap < 1:
                raise ConfigError(f"{label} budgets must be >= 1")
            if not 0.0 <= prof.repeat_affinity <= 1.0 or not 0.0 <= prof.full_span_prob <= 1.0:
                raise ConfigError(f"{label} probabilities must be in [0, 1]")
            if not 0.0 < prof.pool_fraction <= 1.0:
                raise ConfigError(f"{label}.pool_fraction must be in (0, 1]")
        if self.n_malicious > 0:
            f = self.malicious_record_fraction_target
            if not 0.0 < f < 1.0:
                raise ConfigError("malicious_record_fraction_target must be in (0, 1) when n_malicious > 0")
            if self.malicious_calls_per_number_mean < 1:
                raise ConfigError("malicious_calls_per_number_mean must be >= 1")
        per_number = self._benign_calls_per_number()
        if per_number < 1.0:
            raise ConfigError(
                f"malicious_record_fraction_target={self.malicious_record_fraction_target} is unreachable: "
                f"it leaves {per_number:.2f} calls per benign number (need >= 1)"
            )
        if per_number > self.benign.budget_cap:
            raise ConfigError(
                f"malicious_record_fraction_target={self.malicious_record_fraction_target} is unreachable: "
                f"benign numbers would need {per_number:.0f} calls each (cap {self.benign.budget_cap})"
            )

    def _benign_calls_per_number(self) -> float:
        if self.n_malicious == 0:
            return self.benign_calls_per_number_mean
        mal = self.n_malicious * self.malicious_calls_per_number_mean
        benign_total = mal * (1.0 - self.malicious_record_fraction_target) / self.malicious_record_fraction_target
        benign_total -= mal * self.callback_rate
        return benign_total * (1.0 - self.touchpal_call_share) / self.n_benign_others

    def to_dict(self) -> dict:
        d = asdict(self)
        d["provinces"] = [[code, w] for code, w in self.provinces]
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "GeneratorConfig":
        obj = dict(obj)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
        for key, factory in (("benign", default_benign_profile), ("malicious", default_malicious_profile)):
            if key in obj:
                base = asdict(factory())
                base.update(obj[key])
                obj[key] = ClassProfile(**base)
        if "provinces" in obj:
            obj["provinces"] = [(str(code), float(w)) for code, w in obj["provinces"]]
        return cls(**obj)

    @classmethod
    def from_json(cls, path: str | Path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ActorProfile:
    id: str
    kind: str  # "benign", "business", "malicious" or "touchpal"
    province: str
    budget: int
    span: tuple[int, int]
    pool: list[int] = field(default_factory=list)


def phone_id(seed: int, kind: str, index: int) -> str:
    return hashlib.md5(f"{seed}:{kind}:{index}".encode()).hexdigest()


# --- samplers --------------------------------------------------------------


@lru_cache(maxsize=64)
def _power_law_cdf(lo: int, hi: int, exponent: float) -> np.ndarray:
    support = np.arange(lo, hi + 1, dtype=float)
    pmf = support ** (-exponent)
    cdf = np.cumsum(pmf)
    return cdf / cdf[-1]


def sample_degree_profile(profile: ClassProfile, rng: np.random.Generator, size: int | None = None):
    """Draw out-call budgets and counterpart-pool sizes.

    Budgets follow a discrete power law ``P(k) ~ k**-tail_exponent`` on
    ``[min_budget, budget_cap]``; the pool size is the budget scaled by the
    profile's ``pool_fraction`` (at least one counterpart).
    """
    hi = profile.budget_cap
    lo = min(profile.min_budget, hi)
    cdf = _power_law_cdf(lo, hi, float(profile.tail_exponent))
    n = 1 if size is None else size
    u = rng.random(n)
    budgets = lo + np.searchsorted(cdf, u, side="right")
    budgets = np.minimum(budgets, hi)
    pools = np.clip(np.round(budgets * profile.pool_fraction), 1, budgets).astype(np.int64)
    if size is None:
        return int(budgets[0]), int(pools[0])
    return budgets.astype(np.int64), pools


def day_weights(profile: ClassProfile, start: int, days: int) -> np.ndarray:
    """Per-day relative volume: weekdays weigh 1, weekends ``weekend_multiplier``."""
    day_index = (start // SECONDS_PER_DAY + np.arange(days) + 3) % 7  # 0 = Monday
    return np.where(day_index >= 5, profile.weekend_multiplier, 1.0)


def sample_timestamp(profile: ClassProfile, day: int, start: int, rng: np.random.Generator, size: int | None = None):
    """Timestamp within ``day`` whose hour follows the profile's 24-bin histogram."""
    hours = rng.choice(24, size=size, p=profile.hour_weights())
    offset = rng.integers(0, 3600, size=size)
    return start + np.asarray(day) * SECONDS_PER_DAY + hours * 3600 + offset


def _sample_days(profile: ClassProfile, span: tuple[int, int], weights: np.ndarray, n: int, rng) -> np.ndarray:
    lo, hi = span
    w = weights[lo : hi + 1]
    if w.sum() <= 0:
        w = np.ones_like(w)
    return lo + rng.choice(hi - lo + 1, size=n, p=w / w.sum())


def _sample_span(profile: ClassProfile, days: int, rng) -> tuple[int, int]:
    # horseshoe: a share of numbers live for the whole window, the rest are short-lived
    if days == 1 or rng.random() < profile.full_span_prob:
        return (0, days - 1)
    length = 1 + int(rng.exponential(days / 6.0))
    start = int(rng.integers(0, days))
    return (start, min(days - 1, start + length))


def _durations(median: float, sigma: float, cap: int, n: int, rng) -> np.ndarray:
    d = np.exp(np.log(median) + sigma * rng.standard_normal(n))
    return np.minimum(np.floor(d), cap).astype(np.int64)


def _rescale_budgets(raw: np.ndarray, total: float) -> np.ndarray:
    scaled = np.maximum(1, np.round(raw * (total / raw.sum()))).astype(np.int64)
    return scaled


# --- generation ------------------------------------------------------------

# raw call tuple layout: (call_date, order, caller_idx, callee_idx, duration, contact_caller_side, contact_callee_side, tag)
# phone indexes address a shared table; touchpal users come first.


def generate_log(config: GeneratorConfig) -> tuple[CallLog, dict[str, bool]]:
    """Generate a labelled call log. Identical configs give identical logs."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    days, start = config.days, config.start
    codes = [code for code, _ in config.provinces]
    pw = np.asarray([w for _, w in config.provinces], dtype=float)
    pw = pw / pw.sum()

    n_tp = config.n_touchpal_users
    n_ben = config.n_benign_others
    n_mal = config.n_malicious
    phones = (
        [phone_id(config.seed, "touchpal", i) for i in range(n_tp)]
        + [phone_id(config.seed, "benign", i) for i in range(n_ben)]
        + [phone_id(config.seed, "malicious", i) for i in range(n_mal)]
    )
    province = rng.choice(len(codes), size=len(phones), p=pw)
    tp_by_province = [np.flatnonzero(province[:n_tp] == p) for p in range(len(codes))]
    tp_activity = rng.lognormal(0.0, 0.8, size=n_tp)
    tp_activity /= tp_activity.sum()

    ben_weights = day_weights(config.benign, start, days)
    mal_weights = day_weights(config.malicious, start, days)
    calls: list[tuple] = []
    order = 0

    def add(date, caller, callee, duration, contact, tag):
        nonlocal order
        calls.append((int(date), order, caller, callee, int(duration), bool(contact), tag))
        order += 1

    # malicious numbers: spray many TouchPal users with short, tagged calls
    mal_total = 0
    if n_mal:
        raw, _ = sample_degree_profile(config.malicious, rng, size=n_mal)
        budgets = _rescale_budgets(raw.astype(float), n_mal * config.malicious_calls_per_number_mean)
        for j in range(n_mal):
            idx = n_tp + n_ben + j
            b = int(budgets[j])
            mal_total += b
            span = _sample_span(config.malicious, days, rng)
            call_days = np.sort(_sample_days(config.malicious, span, mal_weights, b, rng))
            dates = np.sort(sample_timestamp(config.malicious, call_days, start, rng))
            targets = rng.choice(n_tp, size=b, p=tp_activity)
            repeat = rng.random(b) < config.malicious.repeat_affinity
            for k in range(1, b):
                if repeat[k]:
                    targets[k] = targets[rng.integers(0, k)]
            durations = _durations(config.malicious.duration_median, config.malicious.duration_sigma, config.duration_cap, b, rng)
            contact = rng.random(b) < config.contact_rate_malicious
            fraud = rng.random(b) < 0.4
            dropped = rng.random(b) < config.tag_drop_prob
            callback = rng.random(b) < config.callback_rate
            delays = rng.exponential(3600.0, size=b)
            for k in range(b):
                tag = CallTag.NONE if dropped[k] else (CallTag.FRAUD if fraud[k] else CallTag.HARASSMENT)
                add(dates[k], idx, int(targets[k]), durations[k], contact[k], tag)
                if callback[k]:
                    add(dates[k] + durations[k] + 1 + int(delays[k]), int(targets[k]), idx, min(durations[k], 30), contact[k], CallTag.NONE)

    # benign non-TouchPal numbers: small, mostly same-province circles with redials
    per_number = config._benign_calls_per_number()
    raw, pools = sample_degree_profile(config.benign, rng, size=n_ben)
    budgets = _rescale_budgets(raw.astype(float), per_number * n_ben)
    business = rng.random(n_ben) < config.business_fraction
    benign_tags = [CallTag.DELIVERY, CallTag.REAL_ESTATE, CallTag.SALES]
    for j in range(n_ben):
        idx = n_tp + j
        b = int(budgets[j])
        is_biz = bool(business[j])
        pool_size = max(1, int(round(b * 0.8))) if is_biz else int(max(1, min(pools[j], b)))
        own = tp_by_province[province[idx]]
        local = rng.random(pool_size) < config.same_province_affinity
        pool = rng.choice(n_tp, size=pool_size, p=tp_activity)
        if len(own):
            neighbours = own[rng.integers(0, len(own), size=pool_size)]
            pool = np.where(local, neighbours, pool)
        contact_rate = config.contact_rate_business if is_biz else config.contact_rate_benign
        pool_contact = rng.random(pool_size) < contact_rate
        pool_rank_w = 1.0 / np.arange(1, pool_size + 1)
        pool_rank_w /= pool_rank_w.sum()
        span = _sample_span(config.benign, days, rng)
        repeat = config.benign.repeat_affinity if not is_biz else 0.3
        profile = config.malicious if is_biz else config.benign
        weights = ben_weights if not is_biz else mal_weights
        median = config.business_duration_median if is_biz else config.benign.duration_median
        p_in = 0.8 if is_biz else 0.5

        sessions = max(1, b)
        call_days = _sample_days(profile, span, weights, sessions, rng)
        dates = sample_timestamp(profile, call_days, start, rng)
        from_pool = rng.random(sessions) < repeat
        members = rng.choice(pool_size, size=sessions, p=pool_rank_w)
        strangers = rng.choice(n_tp, size=sessions, p=tp_activity)
        incoming = rng.random(2 * sessions) < p_in
        redial = rng.random(sessions) < config.redial_prob
        gaps = rng.exponential(config.redial_gap_mean, size=sessions)
        durs = _durations(median, config.benign.duration_sigma, config.duration_cap, 2 * sessions, rng)
        tagged = rng.random(2 * sessions) < config.benign_tag_rate
        tag_pick = rng.integers(0, len(benign_tags), size=2 * sessions)
        stranger_contact = rng.random(sessions) < 0.05
        made = 0
        s = 0
        while made < b:
            if from_pool[s]:
                tp, contact = int(pool[members[s]]), bool(pool_contact[members[s]])
            else:
                tp, contact = int(strangers[s]), bool(stranger_contact[s])
            date = int(dates[s])
            n_calls = 2 if (redial[s] and made + 1 < b) else 1
            for c in range(n_calls):
                k = 2 * s + c
                tag = benign_tags[tag_pick[k]] if tagged[k] else CallTag.NONE
                if incoming[k]:
                    add(date, idx, tp, durs[k], contact, tag)
                else:
                    add(date, tp, idx, durs[k], contact, CallTag.NONE)
                date += int(durs[k]) + 1 + int(gaps[s])
            made += n_calls
            s += 1

    # TouchPal-to-TouchPal calls: logged twice, once per side
    benign_other_total = int(budgets.sum())
    share = config.touchpal_call_share
    n_tp_calls = int(round(benign_other_total * share / (1.0 - share) / 2.0))
    friends = 5
    friend_table = rng.choice(n_tp, size=(n_tp, friends), p=tp_activity)
    tp_callers = rng.choice(n_tp, size=n_tp_calls, p=tp_activity)
    tp_days = _sample_days(config.benign, (0, days - 1), ben_weights, n_tp_calls, rng)
    tp_dates = sample_timestamp(config.benign, tp_days, start, rng)
    tp_friend = rng.integers(0, friends, size=n_tp_calls)
    tp_durs = _durations(config.benign.duration_median, config.benign.duration_sigma, config.duration_cap, n_tp_calls, rng)
    tp_contact = rng.random(n_tp_calls) < 0.9
    for k in range(n_tp_calls):
        a = int(tp_callers[k])
        b = int(friend_table[a, tp_friend[k]])
        if a == b:
            b = (a + 1) % n_tp
        add(tp_dates[k], a, b, tp_durs[k], tp_contact[k], CallTag.NONE)

    records = _materialize(calls, phones, province, codes, n_tp)
    registry = frozenset(phones[:n_tp])
    meta = LogMeta(provinces=codes, seed=config.seed, start=start, days=days, touchpal_users=registry)
    labels = {p: False for p in phones[:n_tp + n_ben]}
    labels.update({p: True for p in phones[n_tp + n_ben:]})
    return CallLog(records, meta), labels


def _materialize(calls, phones, province, codes, n_tp) -> list[CallRecord]:
    calls.sort(key=lambda c: (c[0], c[1]))
    records: list[CallRecord] = []
    seq = 0
    incoming, outgoing = Direction.INCOMING, Direction.OUTGOING
    for date, _, caller, callee, duration, contact, tag in calls:
        caller_tp = caller < n_tp
        callee_tp = callee < n_tp
        if callee_tp:
            records.append(
                CallRecord(phones[callee], incoming, phones[caller], codes[province[caller]],
                           codes[province[callee]], date, duration, contact, tag, seq)
            )
            seq += 1
        if caller_tp:
            records.append(
                CallRecord(phones[caller], outgoing, phones[callee], codes[province[callee]],
                           codes[province[caller]], date, duration, contact, CallTag.NONE if callee_tp else tag, seq)
            )
            seq += 1
    return records


def log_statistics(log: CallLog, labels: dict[str, bool]) -> dict:
    """Coarse counts used to check the generator against its calibration targets."""
    n = len(log)
    mal_records = sum(1 for r in log if r.call_tag.malicious)
    malicious_numbers = [p for p, m in labels.items() if m]
    mal_contact = sum(1 for r in log if r.call_tag.malicious and r.call_contact)
    return {
        "records": n,
        "malicious_records": mal_records,
        "malicious_record_fraction": mal_records / n if n else 0.0,
        "malicious_numbers": len(malicious_numbers),
        "malicious_calls_per_number": mal_records / len(malicious_numbers) if malicious_numbers else 0.0,
        "malicious_contact_rate": mal_contact / mal_records if mal_records else 0.0,
        "distinct_callers": len({r.caller for r in log}),
        "distinct_callees": len({r.callee for r in log}),
    }
