import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malcall.call_log import (
    FIELDS,
    CallLog,
    CallRecord,
    CallTag,
    Direction,
    LogMeta,
    LogParseError,
    canonical_line,
    labels_from_tags,
    pair_history,
    parse_record,
    party_history,
    read_log,
    serialize_record,
    validate_log,
    write_log,
)

A, B, C, D = ("a" * 32, "b" * 32, "c" * 32, "d" * 32)


def rec(user, direction, other, date, seq, tag=CallTag.NONE, duration=10, contact=False):
    return CallRecord(user, Direction(direction), other, "BJ", "BJ", date, duration, contact, tag, seq)


def line(**overrides):
    obj = rec(A, "incoming", B, 100, 1).to_dict()
    obj.update(overrides)
    return json.dumps(obj)


def test_parse_zero_duration_incoming():
    r = parse_record(line(call_duration=0))
    assert r.call_duration == 0
    assert r.call_type is Direction.INCOMING
    assert r.incoming and r.caller == B and r.callee == A


def test_parse_missing_tag_names_field():
    obj = json.loads(line())
    del obj["call_tag"]
    with pytest.raises(LogParseError) as err:
        parse_record(json.dumps(obj), line_no=7)
    assert err.value.field == "call_tag"
    assert err.value.line_no == 7
    assert "call_tag" in str(err.value)


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"call_type": "sideways"}, "call_type"),
        ({"call_tag": "spam"}, "call_tag"),
        ({"user_id": "A" * 32}, "user_id"),
        ({"other_phone": "abc"}, "other_phone"),
        ({"other_phone": A}, "other_phone"),
        ({"call_duration": -1}, "call_duration"),
        ({"call_date": -5}, "call_date"),
        ({"call_date": 1.5}, "call_date"),
        ({"call_contact": 1}, "call_contact"),
        ({"user_province": ""}, "user_province"),
    ],
)
def test_parse_rejects_bad_fields(overrides, field):
    with pytest.raises(LogParseError) as err:
        parse_record(line(**overrides))
    assert err.value.field == field


def test_parse_malformed_json():
    with pytest.raises(LogParseError):
        parse_record("{not json")


def test_round_trip_on_generated_lines(log_and_labels):
    log, _ = log_and_labels
    for r in log.records[:1000]:
        text = serialize_record(r)
        assert serialize_record(parse_record(text)) == canonical_line(text)
        assert parse_record(text) == r


def test_canonical_line_orders_fields():
    obj = json.loads(line())
    shuffled = json.dumps(dict(reversed(list(obj.items()))), indent=2)
    assert list(json.loads(canonical_line(shuffled))) == list(FIELDS)
    assert canonical_line(shuffled) == serialize_record(parse_record(shuffled))


def test_validate_empty_log():
    assert validate_log(CallLog([])) == []


def test_validate_duplicate_seq():
    log = CallLog([rec(A, "incoming", B, 10, 1), rec(A, "incoming", C, 11, 1)])
    out = validate_log(log)
    assert [v.reason for v in out] == ["duplicate seq"]


def test_validate_swapped_records(log_and_labels):
    log, _ = log_and_labels
    records = list(log.records)
    # find a neighbouring pair with distinct timestamps
    i = next(k for k in range(100, len(records) - 1) if records[k].call_date < records[k + 1].call_date)
    records[i], records[i + 1] = records[i + 1], records[i]
    out = validate_log(CallLog(records, log.meta))
    assert [(v.index, v.reason) for v in out] == [(i + 1, "ordering")]


def test_validate_other_violations():
    meta = LogMeta(provinces=["BJ"], touchpal_users=frozenset({A, C}))
    records = [
        rec(A, "incoming", B, 10, 1, duration=-3),
        CallRecord(B, Direction.INCOMING, D, "BJ", "XX", 11, 1, False, CallTag.NONE, 2),
        rec(A, "incoming", C, 12, 3),
    ]
    reasons = sorted(v.reason for v in validate_log(CallLog(records, meta)))
    assert reasons == [
        "negative duration",
        "unknown province",
        "unpaired TouchPal-to-TouchPal record",
        "user_id not a TouchPal user",
    ]


def test_generated_log_is_valid(log_and_labels):
    log, _ = log_and_labels
    assert validate_log(log) == []


def test_pair_history_hand_built():
    records = [
        rec(A, "incoming", B, 10, 1),
        rec(A, "incoming", C, 11, 2),
        rec(A, "outgoing", B, 12, 3),
        rec(C, "incoming", B, 13, 4),
        rec(A, "incoming", B, 14, 5),
    ]
    log = CallLog(records)
    assert [r.seq for r in pair_history(log, A, B, before=5)] == [1, 3]
    assert [r.seq for r in pair_history(log, B, A, before=5)] == [1, 3]
    assert pair_history(log, A, D, before=10) == []
    assert pair_history(log, A, B, before=0) == []
    assert [r.seq for r in party_history(log, B, before=5)] == [1, 3, 4]


def test_party_history_partitions_into_pairs(mini_log_and_labels):
    log, _ = mini_log_and_labels
    before = log.records[-1].seq + 1
    phones = sorted({r.other_phone for r in log.records[:300]})[:20]
    for x in phones:
        party = party_history(log, x, before)
        counterparts = {r.user_id if r.other_phone == x else r.other_phone for r in party}
        union = set()
        for y in counterparts:
            union |= {r.seq for r in pair_history(log, x, y, before)}
        assert union == {r.seq for r in party}


def test_pair_history_matches_linear_scan(mini_log_and_labels):
    log, _ = mini_log_and_labels
    for r in log.records[::37]:
        a, b = r.other_phone, r.user_id
        expected = [x.seq for x in log.records if x.seq < r.seq and {x.user_id, x.other_phone} == {a, b}]
        assert [x.seq for x in pair_history(log, a, b, r.seq)] == expected


def test_write_read_round_trip(tmp_path, mini_log_and_labels):
    log, labels = mini_log_and_labels
    write_log(log, tmp_path, labels)
    log2, labels2 = read_log(tmp_path)
    assert log2.records == log.records
    assert log2.meta.to_dict() == log.meta.to_dict()
    assert labels2 == {k: bool(v) for k, v in labels.items()}


def test_labels_follow_tags():
    records = [
        rec(A, "incoming", B, 10, 1, tag=CallTag.HARASSMENT),
        rec(A, "incoming", C, 11, 2, tag=CallTag.DELIVERY),
        rec(A, "incoming", D, 12, 3),
        rec(A, "incoming", D, 13, 4, tag=CallTag.FRAUD),
    ]
    assert labels_from_tags(records) == {B: True, C: False, D: True}


@settings(max_examples=50, deadline=None)
@given(
    duration=st.integers(0, 10**6),
    date=st.integers(0, 2**40),
    seq=st.integers(-(2**40), 2**40),
    contact=st.booleans(),
    tag=st.sampled_from(list(CallTag)),
    direction=st.sampled_from(list(Direction)),
)
def test_round_trip_property(duration, date, seq, contact, tag, direction):
    r = CallRecord(A, direction, B, "GD", "SH", date, duration, contact, tag, seq)
    assert parse_record(serialize_record(r)) == r
