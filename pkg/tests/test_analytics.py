import json
from datetime import date, timedelta

import pytest
from hypothesis import given, strategies as st

from wifisleep.analytics import (aggregate_report, consistency_score, weekly_summaries,
                                 write_report)
from wifisleep.ensemble import EstimateStatus, SleepEstimate
from wifisleep.exceptions import InsufficientDataError

MONDAY = date(2019, 9, 30)


def est(dev, day, ts=24, ta=56, status=EstimateStatus.ESTIMATED, duration=None):
    if status is not EstimateStatus.ESTIMATED:
        return SleepEstimate(dev, day, status)
    return SleepEstimate(dev, day, status, ts, ta,
                         duration_minutes=duration if duration is not None else (ta - ts) * 15)


def test_consistency_examples():
    assert consistency_score([(24, 56)] * 5) == 1.0
    with pytest.raises(InsufficientDataError):
        consistency_score([(24, 56)] * 2)


def test_consistency_arithmetic():
    # three points with sample sd exactly 6: {-6, 0, 6}
    days = [(24 - 6, 56 - 6), (24, 56), (24 + 6, 56 + 6)]
    assert consistency_score(days) == pytest.approx(0.75)
    days = [(24 - 24, 60 - 24), (24, 60), (24 + 24, 60 + 24)]
    assert consistency_score(days) == 0.0


@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=3, max_size=7),
       st.integers(-20, 20))
def test_consistency_translation_invariant(days, shift):
    days = [(a, a + 12 + b) for a, b in days]
    score = consistency_score(days)
    assert 0.0 <= score <= 1.0
    assert consistency_score([(a + shift, b + shift) for a, b in days]) == pytest.approx(score)


def test_weekday_means_fixed_duration():
    ests = [est(u, MONDAY + timedelta(days=i), 24, 56) for u in ("a", "b") for i in range(14)]
    report = aggregate_report(ests)
    assert all(r["mean_duration_min"] == 480 for r in report["weekday_means"])


def test_all_regular_users():
    ests = [est(u, MONDAY + timedelta(days=i)) for u in "abc" for i in range(7)]
    reg = aggregate_report(ests)["regularity"]
    assert reg["n_irregular"] == 0 and reg["n_regular"] == 3


def test_weekday_weekend_split():
    ests = [est("a", MONDAY + timedelta(days=i), 24, 44 if i % 7 < 5 else 64) for i in range(14)]
    report = aggregate_report(ests, threshold=0.0)
    rows = {(r["class"], r["part"]): r for r in report["class_quartiles"]}
    assert rows[("Regular", "weekday")]["median"] == 300
    assert rows[("Regular", "weekend")]["median"] == 600


def test_absent_days_ignored():
    days = [MONDAY + timedelta(days=i) for i in range(7)]
    ests = [est("a", d) for d in days]
    ests[2] = est("a", days[2], status=EstimateStatus.ABSENT)
    report = aggregate_report(ests)
    means = {r["weekday"]: r for r in report["weekday_means"]}
    assert means["Wednesday"]["n_days"] == 0 and means["Wednesday"]["mean_duration_min"] is None
    assert means["Thursday"]["mean_duration_min"] == 480
    long = {r["day"]: r for r in report["longitudinal"]}
    assert days[2].isoformat() not in long
    assert long[days[3].isoformat()]["trailing_mean_min"] == 480


def test_trailing_three_day_mean():
    ests = [est("a", MONDAY + timedelta(days=i), 24, 24 + 12 + i * 4) for i in range(5)]
    long = aggregate_report(ests)["longitudinal"]
    assert [r["duration_min"] for r in long] == [180, 240, 300, 360, 420]
    assert [r["trailing_mean_min"] for r in long] == [180, 210, 240, 300, 360]


def test_regularity_partition_and_median_mode():
    ests = []
    for u, spread in zip("abcd", (0, 2, 8, 16)):
        ests += [est(u, MONDAY + timedelta(days=i), 24 + (i % 3 - 1) * spread,
                     56 + (i % 3 - 1) * spread) for i in range(7)]
    fixed = aggregate_report(ests)["regularity"]
    assert fixed["n_regular"] + fixed["n_irregular"] == 4
    median = aggregate_report(ests, mode="median")["regularity"]
    assert median["n_regular"] == 2 and median["n_irregular"] == 2
    with pytest.raises(ValueError):
        aggregate_report(ests, mode="mean")


def test_weekly_summary_fields():
    ests = [est("a", MONDAY + timedelta(days=i)) for i in (0, 1, 3)]
    (w,) = weekly_summaries(ests)
    assert w.week_start == MONDAY
    assert w.durations == [480, 480, None, 480, None, None, None]
    assert w.score == 1.0 and w.regularity == "Regular"
    (w,) = weekly_summaries(ests[:2])
    assert w.score is None and w.regularity is None


def test_empty_report(tmp_path):
    report = aggregate_report([])
    assert report["regularity"]["n_regular"] == 0
    assert report["longitudinal"] == [] and report["weekly"] == []
    paths = write_report(report, tmp_path)
    assert len(paths) == 10


def test_write_report(tmp_path):
    ests = [est("a", MONDAY + timedelta(days=i)) for i in range(7)]
    write_report(aggregate_report(ests), tmp_path)
    assert json.loads((tmp_path / "regularity.json").read_text())["n_regular"] == 1
    assert (tmp_path / "weekday_means.csv").read_text().splitlines()[1] == "Monday,1,480.0"
