"""Envelope construction, gap detection and report serialization.

Gap detection is re-checked against a brute-force per-index oracle so
the vectorised comparison can never drift from the definition: flag an
index when one class's maximum sits below the other's minimum by more
than theta.
"""

import json
import random

import numpy as np
import pytest

from atomkp.distinguish import (DEFAULT_THETA, EnvelopeSeries, compare_classes,
                                detect_gaps_pair, detect_gaps_triple, envelope,
                                envelopes_svg, mean_series, report_csv,
                                reports_json, summarize, summary_csv)
from atomkp.errors import ConfigError, EmptyInput, LengthMismatch
from atomkp.traceops import SubTrace


def _st(block_class, bit, samples):
    return SubTrace(block_class, bit, np.asarray(samples, dtype=np.float32),
                    origin_offset=0, pad=0)


def _random_envelope(rng, label, n):
    a = rng.uniform(0.0, 0.05, size=n)
    b = rng.uniform(0.0, 0.05, size=n)
    return EnvelopeSeries(label=label, max=np.maximum(a, b),
                          min=np.minimum(a, b), count=2)


def test_envelope_pointwise_extrema():
    env = envelope([_st("Dbl", 1, [1.0, 3.0]), _st("Dbl", 2, [2.0, 2.0])],
                   region=(0, 2))
    assert env.label == "Dbl"
    assert env.count == 2
    assert np.allclose(env.max, [2.0, 3.0])
    assert np.allclose(env.min, [1.0, 2.0])
    assert len(env) == 2


def test_envelope_of_identical_members_is_degenerate():
    rows = [np.full(40, 0.25, dtype=np.float32) for _ in range(4)]
    env = envelope(rows, region=(10, 30), label="Add1")
    assert np.array_equal(env.max, env.min)
    assert len(env) == 20


def test_envelope_region_and_input_errors():
    good = [_st("Dbl", 1, np.zeros(100)), _st("Dbl", 2, np.zeros(100))]
    with pytest.raises(EmptyInput):
        envelope(good[:1], region=(0, 10))
    with pytest.raises(ConfigError):
        envelope(good, region=(5, 5))
    with pytest.raises(ConfigError):
        envelope(good, region=(-1, 10))
    short = [good[0], _st("Dbl", 3, np.zeros(30))]
    with pytest.raises(LengthMismatch):
        envelope(short, region=(0, 50))
    with pytest.raises(EmptyInput):
        mean_series([], region=(0, 10))
    with pytest.raises(ValueError):
        EnvelopeSeries("x", max=np.zeros(4), min=np.ones(4), count=2)
    with pytest.raises(LengthMismatch):
        EnvelopeSeries("x", max=np.zeros(4), min=np.zeros(5), count=2)


def test_mean_series_and_envelope_bracket_it():
    rng = np.random.default_rng(2)
    rows = [rng.uniform(0, 0.06, size=64).astype(np.float32)
            for _ in range(5)]
    env = envelope(rows, region=(0, 64), label="Dbl")
    mean = mean_series(rows, region=(0, 64))
    assert np.all(env.min <= mean + 1e-12)
    assert np.all(mean <= env.max + 1e-12)


def test_pair_gap_arithmetic_at_the_threshold():
    lo = EnvelopeSeries("A", max=[0.5000, 0.5020], min=[0.49, 0.49], count=2)
    hi = EnvelopeSeries("B", max=[0.52, 0.52], min=[0.5041, 0.5041], count=2)
    report = detect_gaps_pair(lo, hi, theta=0.003)
    # 0.5041 - 0.5000 = 0.0041 > theta; 0.5041 - 0.5020 = 0.0021 < theta
    assert list(report.flagged) == [0]
    assert report.directions == ["A"]
    assert report.gaps[0] == pytest.approx(0.0041)
    assert report.kind == "pair"
    assert report.comparison == "A vs B"
    assert report.flag_count == 1


def test_pair_flags_match_brute_force_oracle():
    rng = np.random.default_rng(7)
    for theta in (0.0, 0.001, 0.01):
        e1 = _random_envelope(rng, "Dbl", 300)
        e2 = _random_envelope(rng, "Add1", 300)
        report = detect_gaps_pair(e1, e2, theta=theta)
        expected = []
        for i in range(300):
            if e1.max[i] < e2.min[i] - theta:
                expected.append((i, "Dbl", e2.min[i] - e1.max[i]))
            elif e2.max[i] < e1.min[i] - theta:
                expected.append((i, "Add1", e1.min[i] - e2.max[i]))
        assert list(report.flagged) == [i for i, _, _ in expected]
        assert report.directions == [d for _, d, _ in expected]
        assert np.allclose(report.gaps, [g for _, _, g in expected])
        assert np.all(report.gaps > theta)


def test_theta_monotonicity():
    rng = np.random.default_rng(8)
    e1 = _random_envelope(rng, "Dbl", 500)
    e2 = _random_envelope(rng, "Add2", 500)
    thetas = (0.0, 0.001, 0.003, 0.01)
    flags = [set(detect_gaps_pair(e1, e2, theta=t).flagged) for t in thetas]
    for wider, tighter in zip(flags, flags[1:]):
        assert tighter <= wider


def test_triple_requires_separation_from_both():
    base_max = np.full(4, 0.030)
    base_min = np.full(4, 0.020)
    low_max = np.array([0.010, 0.018, 0.010, 0.010])
    # index 2: the third class dips with the low one, spoiling "below both"
    third_min = np.array([0.020, 0.020, 0.011, 0.020])
    e1 = EnvelopeSeries("Dbl", base_max, base_min, 2)
    e2 = EnvelopeSeries("Add1", low_max, low_max - 0.002, 2)
    e3 = EnvelopeSeries("Add2", base_max, third_min, 2)
    report = detect_gaps_triple(e1, e2, e3, theta=0.003)
    # 0: 0.020 - 0.010 clears both; 1: gap 0.002 < theta; 2: e3 too close
    assert list(report.flagged) == [0, 3]
    assert report.directions == ["Add1", "Add1"]
    assert report.kind == "triple"
    assert report.gaps[0] == pytest.approx(0.010)

    union = set(detect_gaps_pair(e1, e2, 0.003).flagged) | \
        set(detect_gaps_pair(e1, e3, 0.003).flagged) | \
        set(detect_gaps_pair(e2, e3, 0.003).flagged)
    assert set(report.flagged) <= union


def test_triple_subset_of_pairwise_union_randomised():
    rng = np.random.default_rng(5)
    for trial in range(20):
        envs = [_random_envelope(rng, c, 200)
                for c in ("Dbl", "Add1", "Add2")]
        triple = set(detect_gaps_triple(*envs, theta=0.001).flagged)
        union = set()
        for i in range(3):
            for j in range(i + 1, 3):
                union |= set(detect_gaps_pair(envs[i], envs[j],
                                              theta=0.001).flagged)
        assert triple <= union


def test_comparison_input_errors():
    e1 = _random_envelope(np.random.default_rng(0), "Dbl", 50)
    e2 = _random_envelope(np.random.default_rng(1), "Add1", 60)
    with pytest.raises(LengthMismatch):
        detect_gaps_pair(e1, e2)
    with pytest.raises(ConfigError):
        detect_gaps_pair(e1, e1, theta=-0.1)
    with pytest.raises(EmptyInput):
        compare_classes([_st("Dbl", 1, np.zeros(10)),
                         _st("Dbl", 2, np.zeros(10))], region=(0, 10))


def test_compare_classes_groups_and_orders():
    rng = np.random.default_rng(3)
    subs = []
    for cls, level in (("Dbl", 0.04), ("Add1", 0.04), ("Add2", 0.01)):
        for bit in (1, 2, 3):
            subs.append(_st(cls, bit,
                            level + rng.normal(0, 1e-4, 80)))
    envs, reports = compare_classes(subs, region=(0, 80), theta=0.003)
    assert list(envs) == ["Dbl", "Add1", "Add2"]
    assert [r.comparison for r in reports] == [
        "Dbl vs Add1", "Dbl vs Add2", "Add1 vs Add2",
        "Dbl vs Add1 vs Add2"]
    by_name = {r.comparison: r for r in reports}
    assert by_name["Dbl vs Add1"].flag_count == 0
    assert by_name["Dbl vs Add2"].flag_count == 80
    assert set(by_name["Dbl vs Add2"].directions) == {"Add2"}
    assert by_name["Dbl vs Add1 vs Add2"].flag_count == 80
    rows = summarize(reports)
    assert [row["flagged_samples"] for row in rows] == [0, 80, 80, 80]
    assert rows[3]["kind"] == "triple"


def test_report_serialization_roundtrip():
    rng = np.random.default_rng(4)
    e1 = _random_envelope(rng, "Dbl", 40)
    e2 = _random_envelope(rng, "Add1", 40)
    reports = [detect_gaps_pair(e1, e2, theta=0.001)]
    doc = json.loads(reports_json(reports, extra={"region": [0, 40]}))
    assert doc["region"] == [0, 40]
    assert doc["summary"] == summarize(reports)
    assert doc["reports"][0]["comparison"] == "Dbl vs Add1"
    assert doc["reports"][0]["flag_count"] == reports[0].flag_count
    assert len(doc["reports"][0]["flagged"]) == reports[0].flag_count

    lines = summary_csv(reports).splitlines()
    assert lines[0] == "comparison,kind,theta,flagged_samples"
    assert lines[1].startswith("Dbl vs Add1,pair,0.001,")

    per_flag = report_csv(reports[0]).splitlines()
    assert per_flag[0] == "index,lower_class,gap_volts"
    assert len(per_flag) == 1 + reports[0].flag_count


def test_envelopes_svg_is_deterministic_and_structured():
    rng = np.random.default_rng(6)
    e1 = _random_envelope(rng, "Dbl", 600)
    e2 = _random_envelope(rng, "Add2", 600)
    report = detect_gaps_pair(e1, e2, theta=0.0)
    svg1 = envelopes_svg([e1, e2], [report])
    svg2 = envelopes_svg([e1, e2], [report])
    assert svg1 == svg2
    assert svg1.startswith("<svg")
    assert svg1.count("<polygon") == 2
    assert "#1f77b4" in svg1 and "#2ca02c" in svg1
    assert "Dbl" in svg1 and "Add2" in svg1
    if report.flag_count:
        assert "#f5c6c6" in svg1
