"""Population and longitudinal summaries over sleep estimates.

Only estimated days enter any aggregate; absent days are never imputed.
A night belongs to the calendar date on which its window starts (the
evening), and weekend nights are those starting on Saturday or Sunday.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

import numpy as np

from .exceptions import InsufficientDataError

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
REGULAR, IRREGULAR = "Regular", "Irregular"
SATURATION_SLOTS = 24
SECTIONS = ("weekday_means", "regularity", "class_quartiles", "longitudinal", "weekly")


def consistency_score(days, saturation=SATURATION_SLOTS):
    """Regularity of onset and wake slots over a week, in ``[0, 1]``.

    ``max(0, 1 - (sd_onset + sd_wake) / (2 * saturation))`` with sample
    standard deviations, so a combined spread of ``saturation`` slots on
    each side scores zero.

    Parameters
    ----------
    days : sequence of (t_sleep, t_awake)
        At least three estimated days.
    """
    arr = np.asarray(list(days), dtype=float).reshape(-1, 2)
    if arr.shape[0] < 3:
        raise InsufficientDataError(f"need at least 3 estimated days, got {arr.shape[0]}")
    sd = arr.std(axis=0, ddof=1)
    return float(max(0.0, 1.0 - (sd[0] + sd[1]) / (2 * saturation)))


def classify(score, threshold=0.6):
    return REGULAR if score > threshold else IRREGULAR


def week_start(day):
    return day - timedelta(days=day.weekday())


def is_weekend(day):
    return day.weekday() >= 5


@dataclass
class WeeklyUserSummary:
    device: str
    week_start: object
    durations: list = field(default_factory=lambda: [None] * 7)
    score: float | None = None
    regularity: str | None = None

    def to_dict(self):
        return {"dev": self.device, "week_start": self.week_start.isoformat(),
                **{WEEKDAYS[i].lower()[:3]: d for i, d in enumerate(self.durations)},
                "score": self.score, "class": self.regularity}


def _estimated(estimates):
    return sorted((e for e in estimates if e.estimated), key=lambda e: (e.device, e.day))


def weekly_summaries(estimates, threshold=0.6):
    """One summary per device and Monday-started week with any estimated day."""
    weeks = defaultdict(list)
    for e in _estimated(estimates):
        weeks[(e.device, week_start(e.day))].append(e)
    out = []
    for (dev, start), items in sorted(weeks.items()):
        summary = WeeklyUserSummary(dev, start)
        for e in items:
            summary.durations[e.day.weekday()] = e.duration_minutes
        if len(items) >= 3:
            summary.score = consistency_score([(e.t_sleep_slot, e.t_awake_slot) for e in items])
            summary.regularity = classify(summary.score, threshold)
        out.append(summary)
    return out


def five_number(values):
    if not len(values):
        return {"n": 0, "min": None, "q1": None, "median": None, "q3": None, "max": None}
    v = np.asarray(values, dtype=float)
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return {"n": int(v.size), "min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4])}


def trailing_means(items, window=3):
    """Mean duration over estimated days within the trailing ``window`` calendar days."""
    rows = []
    for e in items:
        lo = e.day - timedelta(days=window - 1)
        recent = [x.duration_minutes for x in items if lo <= x.day <= e.day]
        rows.append({"dev": e.device, "day": e.day.isoformat(),
                     "duration_min": e.duration_minutes,
                     "trailing_mean_min": float(np.mean(recent))})
    return rows


def aggregate_report(estimates, threshold=0.6, mode="fixed"):
    """Population report over estimates from any number of users and days.

    Parameters
    ----------
    estimates : iterable of SleepEstimate
    threshold : float
        Regularity cut in ``fixed`` mode.
    mode : {"fixed", "median"}
        ``median`` replaces the threshold with the median user score.

    Returns
    -------
    dict
        One entry per section: ``weekday_means``, ``regularity``,
        ``class_quartiles``, ``longitudinal`` and ``weekly``.
    """
    if mode not in ("fixed", "median"):
        raise ValueError(f"unknown regularity mode {mode!r}")
    est = _estimated(estimates)

    by_weekday = defaultdict(list)
    for e in est:
        by_weekday[e.day.weekday()].append(e.duration_minutes)
    weekday_means = [{"weekday": WEEKDAYS[i], "n_days": len(by_weekday[i]),
                      "mean_duration_min": float(np.mean(by_weekday[i])) if by_weekday[i] else None}
                     for i in range(7)]

    weekly = weekly_summaries(est, threshold)
    scores = defaultdict(list)
    for w in weekly:
        if w.score is not None:
            scores[w.device].append(w.score)
    user_scores = {dev: float(np.mean(v)) for dev, v in scores.items()}
    if mode == "median" and user_scores:
        threshold = float(np.median(list(user_scores.values())))
    users = [{"dev": dev, "score": s, "n_weeks": len(scores[dev]), "class": classify(s, threshold)}
             for dev, s in sorted(user_scores.items())]
    classes = {u["dev"]: u["class"] for u in users}
    regularity = {"threshold": threshold, "mode": mode,
                  "n_regular": sum(u["class"] == REGULAR for u in users),
                  "n_irregular": sum(u["class"] == IRREGULAR for u in users),
                  "users": users}

    split = defaultdict(list)
    for e in est:
        if e.device in classes:
            split[(classes[e.device], "weekend" if is_weekend(e.day) else "weekday")].append(
                e.duration_minutes)
    class_quartiles = [{"class": c, "part": part, **five_number(split[(c, part)])}
                       for c in (REGULAR, IRREGULAR) for part in ("weekday", "weekend")]

    per_user = defaultdict(list)
    for e in est:
        per_user[e.device].append(e)
    longitudinal = [row for dev in sorted(per_user) for row in trailing_means(per_user[dev])]

    return {"weekday_means": weekday_means, "regularity": regularity,
            "class_quartiles": class_quartiles, "longitudinal": longitudinal,
            "weekly": [w.to_dict() for w in weekly]}


def _rows(report, section):
    data = report[section]
    return data["users"] if section == "regularity" else data


def write_report(report, out_dir):
    """Write ``<section>.json`` and ``<section>.csv`` for every section."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for section in SECTIONS:
        jpath, cpath = out / f"{section}.json", out / f"{section}.csv"
        with open(jpath, "w", encoding="utf-8") as fh:
            json.dump(report[section], fh, indent=2)
            fh.write("\n")
        rows = _rows(report, section)
        with open(cpath, "w", newline="", encoding="utf-8") as fh:
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows({k: ("" if v is None or (isinstance(v, float) and math.isnan(v))
                                      else v) for k, v in r.items()} for r in rows)
        paths += [jpath, cpath]
    return paths
