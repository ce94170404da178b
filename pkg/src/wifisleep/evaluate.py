"""Scoring estimates against ground truth.

Sleep is the positive class throughout: a slot in ``[t_sleep, t_awake)`` is
labeled sleep.  Ground-truth clock times snap to the slot that contains them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from datetime import date, datetime

import numpy as np

from .exceptions import KeyMismatchError
from .preprocess import DEFAULT_WINDOW_START, get_zone, n_slots_for


@dataclass(frozen=True)
class ConfusionStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def n(self):
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n if self.n else 0.0

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f_score(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other):
        return ConfusionStats(self.tp + other.tp, self.fp + other.fp,
                              self.fn + other.fn, self.tn + other.tn)

    def to_dict(self):
        return {**asdict(self), "accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f_score": self.f_score}


def _check_interval(interval, n_slots, name):
    ts, ta = (int(v) for v in interval)
    if not 0 <= ts <= ta <= n_slots:
        raise ValueError(f"{name} interval {interval} invalid for {n_slots} slots")
    return ts, ta


def sleep_mask(interval, n_slots=96):
    ts, ta = _check_interval(interval, n_slots, "sleep")
    mask = np.zeros(n_slots, dtype=bool)
    mask[ts:ta] = True
    return mask


def slot_confusion(pred, truth, n_slots=96):
    """Slot-level confusion of two ``(t_sleep, t_awake)`` intervals.

    Examples
    --------
    >>> s = slot_confusion((26, 58), (24, 56))
    >>> (s.tp, s.fp, s.fn, s.tn)
    (30, 2, 2, 62)
    """
    p = sleep_mask(_check_interval(pred, n_slots, "predicted"), n_slots)
    t = sleep_mask(_check_interval(truth, n_slots, "truth"), n_slots)
    return ConfusionStats(tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)),
                          fn=int(np.sum(~p & t)), tn=int(np.sum(~p & ~t)))


def _summary(values):
    if not len(values):
        return {"mean": None, "median": None, "q1": None, "q3": None}
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"mean": float(v.mean()), "median": float(med), "q1": float(q1), "q3": float(q3)}


def _check_keys(preds, truths):
    missing_pred = set(truths) - set(preds)
    missing_truth = set(preds) - set(truths)
    if missing_pred or missing_truth:
        raise KeyMismatchError(missing_pred, missing_truth)


def time_diff_stats(preds, truths, slot_minutes=15):
    """Absolute change-point differences in minutes, per day and summarized.

    ``preds`` and ``truths`` map a key such as ``(dev, day)`` to a
    ``(t_sleep, t_awake)`` slot pair; the key sets must agree.

    Returns
    -------
    dict
        ``per_day``: list of ``{key, sleep, wake, duration}`` rows, and one
        ``{mean, median, q1, q3}`` summary for each of the three columns.
    """
    _check_keys(preds, truths)
    rows = []
    for key in sorted(truths):
        (ps, pa), (ts, ta) = preds[key], truths[key]
        rows.append({"key": key,
                     "sleep": abs(ps - ts) * slot_minutes,
                     "wake": abs(pa - ta) * slot_minutes,
                     "duration": abs((pa - ps) - (ta - ts)) * slot_minutes})
    out = {"per_day": rows}
    for col in ("sleep", "wake", "duration"):
        out[col] = _summary([r[col] for r in rows])
    return out


def snap_to_slot(value, day, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Slot containing a clock time of ``day``'s window.

    Aware datetimes are read in ``tz``; naive ones are taken as local wall
    time.  The window end itself maps to ``S`` (a wake at the very end).
    """
    if isinstance(value, str):
        value = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if value.tzinfo is not None:
        value = value.astimezone(get_zone(tz)).replace(tzinfo=None)
    minutes = (value - datetime.combine(day, window_start)).total_seconds() / 60
    n = n_slots_for(slot_minutes)
    slot = int(minutes // slot_minutes)
    if not 0 <= minutes <= n * slot_minutes:
        raise ValueError(f"{value} lies outside the window of {day}")
    return min(slot, n)


def read_truth_csv(path, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Ground truth as ``{(dev, day): (t_sleep_slot, t_awake_slot)}``."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            day = date.fromisoformat(row["day"])
            out[(row["dev"], day)] = (
                snap_to_slot(row["t_sleep"], day, slot_minutes, window_start, tz),
                snap_to_slot(row["t_awake"], day, slot_minutes, window_start, tz))
    return out


def read_estimates(path, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Estimate JSONL as ``({key: (t_sleep, t_awake)}, {key: status})``.

    Only estimated days get a slot pair; every line gets a status.
    """
    pairs, status = {}, {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            day = date.fromisoformat(obj["day"])
            key = (obj["dev"], day)
            status[key] = obj["status"]
            if obj["status"] == "estimated":
                pairs[key] = (snap_to_slot(obj["t_sleep"], day, slot_minutes, window_start, tz),
                              snap_to_slot(obj["t_awake"], day, slot_minutes, window_start, tz))
    return pairs, status


def evaluate(preds, truths, n_slots=96, slot_minutes=15, status=None):
    """Pooled and per-day confusion metrics plus time differences.

    Keys whose status (when ``status`` is given) is not ``estimated`` are
    counted and left out of the metrics; any other key mismatch is an error.
    """
    status = status or {}
    skipped = sorted(k for k in truths if k not in preds and status.get(k, "estimated") != "estimated")
    truths = {k: v for k, v in truths.items() if k not in set(skipped)}
    _check_keys(preds, truths)
    pooled = ConfusionStats()
    per_day = []
    for key in sorted(truths):
        stats = slot_confusion(preds[key], truths[key], n_slots)
        pooled = pooled + stats
        per_day.append((key, stats))
    day_means = {m: (float(np.mean([getattr(s, m) for _, s in per_day])) if per_day else None)
                 for m in ("accuracy", "precision", "recall", "f_score")}
    return {"n_days": len(per_day), "n_skipped": len(skipped), "pooled": pooled.to_dict(),
            "per_day_mean": day_means, "per_day": per_day,
            "time_diff": time_diff_stats(preds, truths, slot_minutes)}


def _key_text(key):
    dev, day = key
    return dev, day.isoformat() if hasattr(day, "isoformat") else str(day)


def write_metrics(report, json_path, csv_path):
    """Summary as JSON, per-day rows as CSV."""
    diffs = {r["key"]: r for r in report["time_diff"]["per_day"]}
    summary = {k: v for k, v in report.items() if k not in ("per_day", "time_diff")}
    summary["time_diff"] = {c: report["time_diff"][c] for c in ("sleep", "wake", "duration")}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dev", "day", "tp", "fp", "fn", "tn", "accuracy", "precision",
                         "recall", "f_score", "diff_sleep_min", "diff_wake_min",
                         "diff_duration_min"])
        for key, s in report["per_day"]:
            d = diffs[key]
            writer.writerow([*_key_text(key), s.tp, s.fp, s.fn, s.tn,
                             f"{s.accuracy:.6f}", f"{s.precision:.6f}", f"{s.recall:.6f}",
                             f"{s.f_score:.6f}", d["sleep"], d["wake"], d["duration"]])
