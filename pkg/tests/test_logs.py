"""Trial-log serialization round-trips, summary statistics, comparison."""

import statistics

import pytest

from ottwin.logs import LogError, TrialLog, compare, summarize
from ottwin.serialize import canonical_dumps, config_hash


def fake_log(contacts, distances, success=True, reason="success"):
    records = tuple(
        {
            "type": "record",
            "tick": i * 16,
            "t": i * 0.016,
            "robot": {"position": [0.0, 0.0, 0.0], "orientation": [1.0, 0.0, 0.0, 0.0]},
            "traps": [[0.0, 0.0, 0.0]],
            "contact_force": c,
            "trap_distance": d,
            "f_hand": {"right": [0.0, 0.0, 0.0]},
            "f_raw": {"right": [0.0, 0.0, 0.0]},
            "warning": False,
            "trap_lost": False,
            "events": [],
        }
        for i, (c, d) in enumerate(zip(contacts, distances))
    )
    return TrialLog(
        header={
            "type": "header",
            "schema_version": 1,
            "scenario": "fake",
            "config_hash": "00" * 8,
            "seed": 1,
            "dt": 0.001,
            "ticks_per_second": 1000,
            "record_hz": 60,
        },
        records=records,
        outcome={
            "type": "outcome",
            "success": success,
            "reason": reason,
            "ticks": len(contacts) * 16,
            "duration_s": len(contacts) * 0.016,
        },
    )


# ---------------------------------------------------------------------------
# canonical serialization


def test_canonical_dumps_sorts_and_compacts():
    assert canonical_dumps({"b": 1, "a": [1.5, 2]}) == '{"a":[1.5,2],"b":1}'


def test_canonical_dumps_rejects_nan():
    with pytest.raises(ValueError):
        canonical_dumps({"x": float("nan")})


def test_config_hash_is_64_bit_hex():
    h = config_hash({"a": 1})
    assert len(h) == 16
    int(h, 16)  # parses as hex
    assert h != config_hash({"a": 2})


def test_round_trip_is_byte_identical():
    log = fake_log([0.5, 1.25, 0.0], [3.0, 2.5, 2.0])
    text = log.to_jsonl()
    again = TrialLog.from_jsonl(text)
    assert again.to_jsonl() == text
    assert text.endswith("\n")


def test_file_round_trip(tmp_path):
    log = fake_log([1.0], [2.0])
    p = tmp_path / "trial.jsonl"
    log.write(p)
    assert TrialLog.read(p).to_jsonl() == log.to_jsonl()


def test_from_jsonl_rejects_missing_header():
    log = fake_log([1.0], [2.0])
    lines = log.to_jsonl().splitlines()
    with pytest.raises(LogError, match="header"):
        TrialLog.from_jsonl("\n".join(lines[1:]))


def test_from_jsonl_rejects_missing_outcome():
    log = fake_log([1.0], [2.0])
    lines = log.to_jsonl().splitlines()
    with pytest.raises(LogError, match="outcome"):
        TrialLog.from_jsonl("\n".join(lines[:-1]))


def test_from_jsonl_rejects_bad_json():
    with pytest.raises(LogError, match="line 2"):
        TrialLog.from_jsonl('{"type":"header"}\nnot json\n{"type":"outcome"}')


def test_from_jsonl_rejects_stray_line_type():
    bad = '{"type":"header"}\n{"type":"weird"}\n{"type":"outcome"}'
    with pytest.raises(LogError, match="weird"):
        TrialLog.from_jsonl(bad)


# ---------------------------------------------------------------------------
# summaries


def test_summarize_matches_hand_computation():
    a = fake_log([1.0, 2.0, 3.0], [4.0, 4.0, 4.0], success=True)
    b = fake_log([5.0], [8.0], success=False, reason="timeout")
    s = summarize([a, b])
    pooled_c = [1.0, 2.0, 3.0, 5.0]
    pooled_d = [4.0, 4.0, 4.0, 8.0]
    assert s.n_trials == 2
    assert s.n_records == 4
    assert s.success_rate == pytest.approx(0.5)
    assert s.contact_mean == pytest.approx(sum(pooled_c) / 4)
    assert s.contact_sd == pytest.approx(statistics.pstdev(pooled_c))
    assert s.distance_mean == pytest.approx(sum(pooled_d) / 4)
    assert s.distance_sd == pytest.approx(statistics.pstdev(pooled_d))


def test_summarize_population_not_sample_sd():
    log = fake_log([0.0, 2.0], [1.0, 1.0])
    s = summarize([log])
    assert s.contact_sd == pytest.approx(1.0)  # pstdev; stdev would give sqrt(2)


def test_summarize_empty_raises():
    with pytest.raises(LogError, match="zero trials"):
        summarize([])


def test_summarize_no_records_raises():
    with pytest.raises(LogError, match="no records"):
        summarize([fake_log([], [])])


def test_compare_reductions():
    a = summarize([fake_log([2.0, 4.0], [10.0, 10.0])])
    b = summarize([fake_log([1.0, 2.0], [5.0, 5.0])])
    c = compare(a, b)
    assert c.contact_mean_reduction == pytest.approx(0.5)
    assert c.contact_sd_reduction == pytest.approx(0.5)
    assert c.distance_mean_reduction == pytest.approx(0.5)
    assert c.distance_sd_reduction == pytest.approx(0.0)  # both zero SD


def test_iter_events_flattens_in_order():
    log = fake_log([1.0, 2.0], [1.0, 1.0])
    rec0 = dict(log.records[0])
    rec1 = dict(log.records[1])
    rec0["events"] = [{"kind": "input", "tick": 0, "device": "right", "vel": [1, 0, 0]}]
    rec1["events"] = [{"kind": "abort", "tick": 20}]
    log2 = TrialLog(header=log.header, records=(rec0, rec1), outcome=log.outcome)
    events = list(log2.iter_events())
    assert [e["tick"] for e in events] == [0, 20]
