"""Batch stages shared by the command line and the tests.

Each stage is a pure function of its inputs and the run configuration.  The
inference stage fans (device, day) tasks out to worker processes and merges
results in key order, so the output never depends on the worker count.
"""

from __future__ import annotations

import csv
import time as _time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date

from .ensemble import derive_seed, estimate_line, infer_user_day
from .preprocess import (DormInterval, SlotSeries, bin_events, classify_resident,
                         device_days, filter_ping_pong, group_by_device,
                         locate_dorm_interval, read_slot_series_csv,
                         select_primary_device, window_day, write_slot_series_csv)
from .synth import SynthProfile, generate_trace


@dataclass
class DayTask:
    """Everything the inference stage needs for one device-day."""

    series: SlotSeries
    dorm: DormInterval | None = None
    residential: SlotSeries | None = None

    @property
    def key(self):
        return self.series.device, self.series.day


@dataclass
class PreprocessResult:
    tasks: list = field(default_factory=list)
    devices: list = field(default_factory=list)
    n_events: int = 0
    n_filtered: int = 0

    def summary(self, ap_map=None):
        return {"events": self.n_events, "pingpong_removed": self.n_filtered,
                "devices": len(self.devices),
                "users": len({d["user"] for d in self.devices}),
                "residents": sum(bool(d["resident"]) for d in self.devices),
                "aps": len(ap_map) if ap_map is not None else None,
                "device_days": len(self.tasks)}


def _by_window_day(events, config):
    out = defaultdict(list)
    for ev in events:
        out[window_day(ev.timestamp, config.window_start, config.timezone)].append(ev)
    return out


def preprocess_events(events, ap_map, config, users=None, residents_only=False,
                      end_day=None):
    """Slot series, dorm intervals and device manifests for every day.

    Parameters
    ----------
    events : iterable of WifiEvent
    ap_map : ApMap or None
        Needed in campus mode for filtering, dorm intervals and residency.
    config : RunConfig
    users : mapping of device to user, optional
        Devices of one user compete for primary; unmapped devices are their
        own user.
    residents_only : bool
        Drop non-resident devices instead of only flagging them.
    end_day : date, optional
        Last day of the residency horizon; defaults to each device's last
        event day.
    """
    users = users or {}
    events = list(events)
    by_device = group_by_device(events)
    by_user = defaultdict(dict)
    for dev, evs in by_device.items():
        by_user[users.get(dev, dev)][dev] = evs

    result = PreprocessResult(n_events=len(events))
    for user in sorted(by_user):
        try:
            primary = select_primary_device(by_user[user])
        except LookupError:
            primary = None
        for dev in sorted(by_user[user]):
            evs = by_device[dev]
            resident = (classify_resident(evs, ap_map, config.timezone, end_day)
                        if ap_map is not None else False)
            result.devices.append({"user": user, "dev": dev, "primary": dev == primary,
                                   "resident": resident})
            if dev != primary or (residents_only and not resident):
                continue
            if config.pingpong_enabled and ap_map is not None:
                kept = filter_ping_pong(evs, ap_map, config.pingpong_gap_seconds)
                result.n_filtered += len(evs) - len(kept)
                evs = kept
            per_day = _by_window_day(evs, config)
            for day in device_days(evs, config.window_start, config.timezone):
                result.tasks.append(_day_task(dev, day, per_day.get(day, []), ap_map, config))
    result.tasks.sort(key=lambda t: t.key)
    return result


def _day_task(dev, day, evs, ap_map, config):
    kw = dict(slot_minutes=config.slot_minutes, window_start=config.window_start,
              tz=config.timezone)
    series = bin_events(evs, day, device=dev, **kw)
    if ap_map is None:
        return DayTask(series)
    residential = bin_events([e for e in evs if ap_map.is_residential(e.ap)], day,
                             device=dev, **kw)
    return DayTask(series, locate_dorm_interval(evs, ap_map, day, **kw), residential)


def write_preprocess(result, out_dir):
    """``slots.csv``, ``residential.csv``, ``days.csv`` and ``devices.csv``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    write_slot_series_csv([t.series for t in result.tasks], out_dir / "slots.csv")
    with_res = [t.residential for t in result.tasks if t.residential is not None]
    if with_res:
        write_slot_series_csv(with_res, out_dir / "residential.csv")
    with open(out_dir / "days.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dev", "day", "dorm_start", "dorm_end", "dorm_building"])
        for t in result.tasks:
            d = t.dorm
            writer.writerow([*_key_row(t.key), *((d.start_slot, d.end_slot, d.building)
                                                 if d else ("", "", ""))])
    with open(out_dir / "devices.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["user", "dev", "primary", "resident"])
        writer.writeheader()
        for row in result.devices:
            writer.writerow({**row, "primary": str(row["primary"]).lower(),
                             "resident": str(row["resident"]).lower()})


def _key_row(key):
    return key[0], key[1].isoformat()


def read_tasks(in_dir, config):
    """Rebuild inference tasks from a preprocess output directory."""
    series = read_slot_series_csv(in_dir / "slots.csv", config.window_start)
    residential = {}
    if (in_dir / "residential.csv").exists():
        residential = {(s.device, s.day): s for s in
                       read_slot_series_csv(in_dir / "residential.csv", config.window_start)}
    dorms = {}
    if (in_dir / "days.csv").exists():
        with open(in_dir / "days.csv", newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["dorm_start"]:
                    dorms[(row["dev"], date.fromisoformat(row["day"]))] = DormInterval(
                        int(row["dorm_start"]), int(row["dorm_end"]), row["dorm_building"])
    tasks = [DayTask(s, dorms.get((s.device, s.day)), residential.get((s.device, s.day)))
             for s in series]
    tasks.sort(key=lambda t: t.key)
    return tasks


def _infer_one(args):
    task, config = args
    start = _time.perf_counter()
    seed = derive_seed(config.sampling_seed, task.series.device, task.series.day)
    est = infer_user_day(task.series, task.dorm, config, task.residential, seed=seed)
    return estimate_line(est), est.status.value, _time.perf_counter() - start


def infer_tasks(tasks, config, parallelism=None):
    """Run the ensemble on every task.

    Returns
    -------
    lines : list of str
        One JSON line per task, in task-key order.
    summary : dict
        Counts by status, wall time and mean seconds per user.
    """
    tasks = sorted(tasks, key=lambda t: t.key)
    workers = parallelism or config.parallelism
    start = _time.perf_counter()
    payload = [(t, config) for t in tasks]
    if workers == 1 or len(tasks) < 2:
        results = [_infer_one(p) for p in payload]
    else:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_infer_one, payload, chunksize=chunk))
    wall = _time.perf_counter() - start
    statuses = Counter(r[1] for r in results)
    n_users = len({t.key[0] for t in tasks})
    summary = {"users": n_users, "days": len(tasks),
               "estimated": statuses.get("estimated", 0),
               "absent": statuses.get("absent", 0),
               "insufficient_prior": statuses.get("insufficient_prior", 0),
               "wall_seconds": wall,
               "cpu_seconds": sum(r[2] for r in results),
               "mean_seconds_per_user": wall / n_users if n_users else 0.0,
               "parallelism": workers}
    return [r[0] for r in results], summary


def synth_corpus(n_users, config, seed=0, days=1, profile=None):
    """Traces for ``n_users`` synthetic devices with per-device seeds.

    Returns ``(events, truth_rows)`` where rows are ``(dev, day, t_sleep, t_awake)``.
    """
    base = profile or SynthProfile(slot_minutes=config.slot_minutes,
                                   window_start=config.window_start,
                                   timezone=config.timezone,
                                   min_sleep_slots=config.min_sleep_slots)
    events, truth = [], []
    width = max(4, len(str(n_users - 1)))
    for i in range(n_users):
        dev = f"synth-{i:0{width}d}"
        p = replace(base, device=dev, days=days)
        trace = generate_trace(p, derive_seed(seed, dev))
        events.extend(trace.events)
        truth.extend((dev, d.day, d.t_sleep, d.t_awake) for d in trace.days)
    return sorted(events), truth

