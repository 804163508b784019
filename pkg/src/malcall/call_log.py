"""Call-detail records, ordered call logs and their JSONL/JSON on-disk form."""

from __future__ import annotations

import json
import re
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

PHONE_RE = re.compile(r"^[0-9a-f]{32}$")

FIELDS = (
    "user_id",
    "call_type",
    "other_phone",
    "other_province",
    "user_province",
    "call_date",
    "call_duration",
    "call_contact",
    "call_tag",
    "seq",
)


class CallTag(str, Enum):
    NONE = "none"
    REAL_ESTATE = "real_estate"
    HARASSMENT = "harassment"
    DELIVERY = "delivery"
    FRAUD = "fraud"
    SALES = "sales"

    @property
    def malicious(self) -> bool:
        return self in (CallTag.HARASSMENT, CallTag.FRAUD)


class Direction(str, Enum):
    INCOMING = "incoming"
    OUTGOING = "outgoing"


class LogParseError(ValueError):
    """A log line could not be turned into a :class:`CallRecord`."""

    def __init__(self, message: str, field: str | None = None, line_no: int | None = None):
        self.field = field
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        what = f"field {field!r}: " if field else ""
        super().__init__(f"{where}{what}{message}")


def is_phone_id(value) -> bool:
    return isinstance(value, str) and PHONE_RE.match(value) is not None


@dataclass(frozen=True, slots=True)
class CallRecord:
    """One row of the call log, seen from the TouchPal user's side.

    ``call_type`` is the direction from ``user_id``'s perspective, so an
    incoming record means ``other_phone`` called ``user_id``.
    """

    user_id: str
    call_type: Direction
    other_phone: str
    other_province: str
    user_province: str
    call_date: int
    call_duration: int
    call_contact: bool
    call_tag: CallTag
    seq: int

    @property
    def incoming(self) -> bool:
        return self.call_type is Direction.INCOMING

    @property
    def caller(self) -> str:
        return self.other_phone if self.call_type is Direction.INCOMING else self.user_id

    @property
    def callee(self) -> str:
        return self.user_id if self.call_type is Direction.INCOMING else self.other_phone

    @property
    def key(self) -> tuple[int, int]:
        return (self.call_date, self.seq)

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "call_type": self.call_type.value,
            "other_phone": self.other_phone,
            "other_province": self.other_province,
            "user_province": self.user_province,
            "call_date": self.call_date,
            "call_duration": self.call_duration,
            "call_contact": self.call_contact,
            "call_tag": self.call_tag.value,
            "seq": self.seq,
        }


def _require_int(obj: dict, name: str, line_no, minimum: int | None = 0) -> int:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise LogParseError(f"expected integer, got {value!r}", name, line_no)
    if minimum is not None and value < minimum:
        raise LogParseError(f"must be >= {minimum}, got {value}", name, line_no)
    return value


def _require_phone(obj: dict, name: str, line_no) -> str:
    value = obj[name]
    if not is_phone_id(value):
        raise LogParseError(f"expected 32 lowercase hex characters, got {value!r}", name, line_no)
    return value


def _require_province(obj: dict, name: str, line_no) -> str:
    value = obj[name]
    if not isinstance(value, str) or not value:
        raise LogParseError(f"expected non-empty string, got {value!r}", name, line_no)
    return value


def record_from_dict(obj: dict, line_no: int | None = None) -> CallRecord:
    if not isinstance(obj, dict):
        raise LogParseError("expected a JSON object", None, line_no)
    for name in FIELDS:
        if name not in obj:
            raise LogParseError("missing", name, line_no)
    try:
        call_type = Direction(obj["call_type"])
    except ValueError:
        raise LogParseError(f"invalid direction {obj['call_type']!r}", "call_type", line_no) from None
    try:
        tag = CallTag(obj["call_tag"])
    except ValueError:
        raise LogParseError(f"invalid tag {obj['call_tag']!r}", "call_tag", line_no) from None
    contact = obj["call_contact"]
    if not isinstance(contact, bool):
        raise LogParseError(f"expected boolean, got {contact!r}", "call_contact", line_no)
    user_id = _require_phone(obj, "user_id", line_no)
    other = _require_phone(obj, "other_phone", line_no)
    if user_id == other:
        raise LogParseError("user_id and other_phone must differ", "other_phone", line_no)
    return CallRecord(
        user_id=user_id,
        call_type=call_type,
        other_phone=other,
        other_province=_require_province(obj, "other_province", line_no),
        user_province=_require_province(obj, "user_province", line_no),
        call_date=_require_int(obj, "call_date", line_no),
        call_duration=_require_int(obj, "call_duration", line_no),
        call_contact=contact,
        call_tag=tag,
        seq=_require_int(obj, "seq", line_no, minimum=None),
    )


def parse_record(line: str, line_no: int | None = None) -> CallRecord:
    """Parse one JSONL line. Errors carry the offending field and line number."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogParseError(f"malformed JSON ({exc.msg})", None, line_no) from None
    return record_from_dict(obj, line_no)


def serialize_record(record: CallRecord) -> str:
    return json.dumps(record.to_dict(), separators=(",", ":"))


def canonical_line(line: str) -> str:
    """Field-ordered, whitespace-free rendering of a raw JSONL line."""
    obj = json.loads(line)
    return json.dumps({k: obj[k] for k in FIELDS}, separators=(",", ":"))


@dataclass
class LogMeta:
    provinces: list[str] = field(default_factory=list)
    seed: int | None = None
    start: int = 0
    days: int = 0
    touchpal_users: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "provinces": list(self.provinces),
            "seed": self.seed,
            "start": self.start,
            "days": self.days,
            "touchpal_users": sorted(self.touchpal_users),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LogMeta":
        return cls(
            provinces=list(obj.get("provinces", [])),
            seed=obj.get("seed"),
            start=int(obj.get("start", 0)),
            days=int(obj.get("days", 0)),
            touchpal_users=frozenset(obj.get("touchpal_users", [])),
        )


class CallLog:
    """Immutable, time-ordered sequence of call records plus log metadata.

    Party and pair indexes are built lazily on first query.
    """

    def __init__(self, records: Iterable[CallRecord], meta: LogMeta | None = None):
        self.records: tuple[CallRecord, ...] = tuple(records)
        self.meta = meta if meta is not None else LogMeta()
        self._party_index: dict[str, list[int]] | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CallRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def touchpal_users(self) -> frozenset[str]:
        return self.meta.touchpal_users

    def is_touchpal(self, phone: str) -> bool:
        return phone in self.meta.touchpal_users

    def _index(self) -> dict[str, list[int]]:
        if self._party_index is None:
            index: dict[str, list[int]] = defaultdict(list)
            for i, rec in enumerate(self.records):
                index[rec.user_id].append(i)
                index[rec.other_phone].append(i)
            self._party_index = dict(index)
        return self._party_index

    def _positions_before(self, phone: str, before: int) -> list[int]:
        positions = self._index().get(phone, [])
        seqs = [self.records[i].seq for i in positions]
        return positions[: bisect_left(seqs, before)]

    def party_history(self, phone: str, before: int) -> list[CallRecord]:
        """All records involving ``phone`` with ``seq < before``, in log order."""
        return [self.records[i] for i in self._positions_before(phone, before)]

    def pair_history(self, a: str, b: str, before: int) -> list[CallRecord]:
        """Records whose two parties are exactly ``{a, b}`` with ``seq < before``."""
        out = []
        for i in self._positions_before(a, before):
            rec = self.records[i]
            if rec.other_phone == b or rec.user_id == b:
                out.append(rec)
        return out


def pair_history(log: CallLog, a: str, b: str, before: int) -> list[CallRecord]:
    return log.pair_history(a, b, before)


def party_history(log: CallLog, phone: str, before: int) -> list[CallRecord]:
    return log.party_history(phone, before)


@dataclass(frozen=True)
class Violation:
    index: int
    seq: int
    reason: str


def validate_log(log: CallLog) -> list[Violation]:
    """Check the ordering, uniqueness and per-record invariants of a log."""
    violations: list[Violation] = []
    seen: set[int] = set()
    provinces = set(log.meta.provinces)
    registry = log.meta.touchpal_users
    prev: CallRecord | None = None
    for i, rec in enumerate(log.records):
        if rec.seq in seen:
            violations.append(Violation(i, rec.seq, "duplicate seq"))
        elif prev is not None and (rec.call_date < prev.call_date or rec.seq <= prev.seq):
            violations.append(Violation(i, rec.seq, "ordering"))
        seen.add(rec.seq)
        if rec.call_duration < 0:
            violations.append(Violation(i, rec.seq, "negative duration"))
        if rec.call_date < 0:
            violations.append(Violation(i, rec.seq, "negative timestamp"))
        if rec.user_id == rec.other_phone:
            violations.append(Violation(i, rec.seq, "self call"))
        if not (is_phone_id(rec.user_id) and is_phone_id(rec.other_phone)):
            violations.append(Violation(i, rec.seq, "malformed phone id"))
        if provinces and (rec.user_province not in provinces or rec.other_province not in provinces):
            violations.append(Violation(i, rec.seq, "unknown province"))
        if registry and rec.user_id not in registry:
            violations.append(Violation(i, rec.seq, "user_id not a TouchPal user"))
        prev = rec

    # a call between two TouchPal users must be logged on both sides
    if registry:
        sides: dict[tuple, int] = defaultdict(int)
        for rec in log.records:
            if rec.other_phone in registry:
                sides[(rec.caller, rec.callee, rec.call_date, rec.call_type)] += 1
        for i, rec in enumerate(log.records):
            if rec.other_phone not in registry:
                continue
            mirror_type = Direction.OUTGOING if rec.incoming else Direction.INCOMING
            if sides.get((rec.caller, rec.callee, rec.call_date, mirror_type), 0) == 0:
                violations.append(Violation(i, rec.seq, "unpaired TouchPal-to-TouchPal record"))
    return violations


# --- files -----------------------------------------------------------------

LOG_FILE = "log.jsonl"
META_FILE = "meta.json"
LABELS_FILE = "labels.json"


def iter_jsonl(path: str | Path) -> Iterator[CallRecord]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                yield parse_record(line, line_no)


def write_jsonl(records: Iterable[CallRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(serialize_record(rec))
            fh.write("\n")


def write_log(log: CallLog, directory: str | Path, labels: dict[str, bool] | None = None) -> Path:
    """Write ``log.jsonl`` + ``meta.json`` (+ ``labels.json``) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(log.records, directory / LOG_FILE)
    (directory / META_FILE).write_text(json.dumps(log.meta.to_dict(), indent=1, sort_keys=True))
    if labels is not None:
        ordered = {k: bool(labels[k]) for k in sorted(labels)}
        (directory / LABELS_FILE).write_text(json.dumps(ordered, indent=0))
    return directory


def read_log(directory: str | Path) -> tuple[CallLog, dict[str, bool] | None]:
    directory = Path(directory)
    meta_path = directory / META_FILE
    meta = LogMeta.from_dict(json.loads(meta_path.read_text())) if meta_path.exists() else LogMeta()
    log = CallLog(iter_jsonl(directory / LOG_FILE), meta)
    labels_path = directory / LABELS_FILE
    labels = json.loads(labels_path.read_text()) if labels_path.exists() else None
    return log, labels


def labels_from_tags(records: Sequence[CallRecord]) -> dict[str, bool]:
    """Caller-level labels: a number is malicious iff it placed a tagged malicious call."""
    labels: dict[str, bool] = {}
    for rec in records:
        caller = rec.caller
        labels[caller] = labels.get(caller, False) or rec.call_tag.malicious
    return labels
