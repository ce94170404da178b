"""Synthetic device traces with known sleep intervals, and noise injection."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

from .ingest import ApRecord, ApMap, EventKind, WifiEvent
from .preprocess import (DEFAULT_WINDOW_START, get_zone, n_slots_for, slot_clock,
                         slot_index)

_KINDS = (EventKind.ASSOC, EventKind.REASSOC, EventKind.AUTH, EventKind.DISASSOC)
_KIND_P = (0.4, 0.3, 0.2, 0.1)


@dataclass(frozen=True)
class SynthProfile:
    """Generative settings for one synthetic device.

    Awake slots within ``home_margin_slots`` of the night are spent at
    ``home_ap`` (evening and morning in the room); other awake slots draw
    their AP from ``roam_aps``.
    """

    t_sleep_true: int = 24
    t_awake_true: int = 56
    lambda_awake_true: float = 2.5
    lambda_sleep_true: float = 0.5
    jitter_slots: int = 2
    home_ap: str = "dorma-2-ap1"
    roam_aps: tuple = ("lib-1-ap1", "lib-1-ap2", "cafe-1-ap1", "gym-1-ap1")
    days: int = 1
    device: str = "synthetic-device"
    start_day: date = date(2019, 10, 1)
    min_sleep_slots: int = 12
    slot_minutes: int = 15
    window_start: time = DEFAULT_WINDOW_START
    timezone: str = "UTC"
    home_margin_slots: int = 8

    def __post_init__(self):
        if self.t_sleep_true + self.min_sleep_slots > self.t_awake_true:
            raise ValueError("true night shorter than the minimum sleep length")
        if not (self.lambda_awake_true > 0 and self.lambda_sleep_true > 0):
            raise ValueError("rates must be positive")
        if self.t_sleep_true < 0 or self.t_awake_true > self.n_slots:
            raise ValueError("true change points outside the window")
        if not self.roam_aps:
            raise ValueError("need at least one roaming AP")

    @property
    def n_slots(self):
        return n_slots_for(self.slot_minutes)


def default_ap_map(profile=None, neighbors=("dorma-2-ap2", "dorma-2-ap3")):
    """AP map matching :class:`SynthProfile` defaults.

    The home AP and ``neighbors`` share one residential roaming group; roam
    APs are non-residential, one building per name prefix.
    """
    profile = profile or SynthProfile()
    records = [ApRecord(profile.home_ap, "DormA", "DormA-2", True)]
    records += [ApRecord(ap, "DormA", "DormA-2", True) for ap in neighbors
                if ap != profile.home_ap]
    for ap in profile.roam_aps:
        building = ap.split("-")[0].capitalize()
        records.append(ApRecord(ap, building, building, False))
    return ApMap(records)


@dataclass
class SynthDay:
    day: date
    t_sleep: int
    t_awake: int
    counts: np.ndarray
    events: list = field(repr=False)


@dataclass
class SynthTrace:
    profile: SynthProfile
    days: list

    @property
    def events(self):
        return sorted(ev for d in self.days for ev in d.events)

    @property
    def truth(self):
        return {d.day: (d.t_sleep, d.t_awake) for d in self.days}


def _to_utc(naive_local, tz):
    return naive_local.replace(tzinfo=get_zone(tz)).astimezone(timezone.utc)


def generate_trace(profile, seed=0):
    """Draw a trace day by day.

    Each day's change points are jittered uniformly within
    ``+-jitter_slots`` of the profile (wake pushed out to keep the minimum
    night), each slot gets a Poisson count at its regime rate, and each
    event gets a uniform second within its slot.
    """
    rng = np.random.default_rng(seed)
    p = profile
    n = p.n_slots
    k = p.min_sleep_slots
    slot_seconds = p.slot_minutes * 60
    days = []
    for d in range(p.days):
        day = p.start_day + timedelta(days=d)
        j = p.jitter_slots
        ts = int(np.clip(p.t_sleep_true + rng.integers(-j, j + 1), 0, n - k))
        ta = int(np.clip(p.t_awake_true + rng.integers(-j, j + 1), ts + k, n))
        slots = np.arange(n)
        asleep = (slots >= ts) & (slots < ta)
        rates = np.where(asleep, p.lambda_sleep_true, p.lambda_awake_true)
        counts = rng.poisson(rates)
        at_home = asleep | ((slots >= ts - p.home_margin_slots) & (slots < ta + p.home_margin_slots))
        anchor = datetime.combine(day, p.window_start)
        events = []
        for i in np.flatnonzero(counts):
            c = int(counts[i])
            offsets = np.sort(rng.integers(0, slot_seconds, size=c))
            kinds = rng.choice(len(_KINDS), size=c, p=_KIND_P)
            if at_home[i]:
                aps = [p.home_ap] * c
            else:
                aps = [p.roam_aps[a] for a in rng.integers(0, len(p.roam_aps), size=c)]
            base = anchor + timedelta(minutes=int(i) * p.slot_minutes)
            for off, kind, ap in zip(offsets, kinds, aps):
                events.append(WifiEvent(_to_utc(base + timedelta(seconds=int(off)), p.timezone),
                                        p.device, ap, _KINDS[kind]))
        days.append(SynthDay(day, ts, ta, counts, events))
    return SynthTrace(p, days)


class NoiseKind(str, enum.Enum):
    PING_PONG = "pingpong"
    BACKGROUND_BURST = "background"
    ABSENCE = "absence"


def _window_bounds(day, window, slot_minutes, window_start):
    n = n_slots_for(slot_minutes)
    start, end = window
    if not 0 <= start < end <= n:
        raise ValueError(f"noise window {window} outside the day's {n} slots")
    return (slot_clock(start, slot_minutes, window_start, day=day),
            slot_clock(end, slot_minutes, window_start, day=day))


def inject_noise(events, kind, *, day, window, seed=0, ap=None, aps=None, device=None,
                 length=6, gap_seconds=20.0, cluster_sizes=(2, 2), cluster_spread=5,
                 burst_size=4, burst_seconds=300, slot_minutes=15,
                 window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Return a copy of ``events`` with one kind of synthetic noise.

    ``window`` is a half-open slot range of ``day``'s window.

    * ``pingpong``: ``length`` Assoc events alternating over ``aps``
      (two APs of one roaming group), consecutive gaps drawn within 25% of
      ``gap_seconds`` and always under 60 s, starting inside the first slot.
    * ``background``: one cluster per entry of ``cluster_sizes`` (events a
      few seconds apart, as after a push notification) followed by a
      download burst of ``burst_size`` events spread over ``burst_seconds``,
      all at ``ap``.  The groups sit at evenly spaced points of the window
      (idle time in between), each shifted by up to half a slot.
    * ``absence``: every event inside the window is removed.
    """
    kind = NoiseKind(kind)
    lo, hi = _window_bounds(day, window, slot_minutes, window_start)
    events = sorted(events)
    if kind is NoiseKind.ABSENCE:
        kept = []
        for ev in events:
            i = slot_index(ev.timestamp, day, slot_minutes, window_start, tz)
            if i is None or not window[0] <= i < window[1]:
                kept.append(ev)
        return kept

    rng = np.random.default_rng(seed)
    if device is None:
        if not events:
            raise ValueError("device must be given when there are no events")
        device = events[0].device
    span = int((hi - lo).total_seconds())
    added = []
    if kind is NoiseKind.PING_PONG:
        if not aps or len(aps) < 2:
            raise ValueError("ping-pong noise needs at least two APs")
        t = lo + timedelta(seconds=int(rng.integers(0, slot_minutes * 60)))
        gap_hi = min(1.25 * gap_seconds, 59.0)
        for i in range(length):
            added.append(WifiEvent(_to_utc(t, tz), device, aps[i % len(aps)], EventKind.ASSOC))
            t += timedelta(seconds=int(rng.uniform(0.75 * gap_seconds, gap_hi)))
    else:
        if ap is None:
            raise ValueError("background noise needs an AP")
        # idle stretches alternate with the groups: anchors split the window
        # evenly, the download burst last
        groups = list(cluster_sizes) + [None]
        jitter = slot_minutes * 30
        for j, size in enumerate(groups):
            anchor = lo + timedelta(seconds=span * (j + 1) / (len(groups) + 1))
            t = anchor + timedelta(seconds=int(rng.integers(-jitter, jitter + 1)))
            if size is None:
                offsets = np.sort(rng.integers(0, burst_seconds, size=burst_size))
            else:
                offsets = np.cumsum(rng.integers(1, cluster_spread + 1, size=size)) - 1
            for off in offsets:
                added.append(WifiEvent(_to_utc(t + timedelta(seconds=int(off)), tz), device, ap,
                                       EventKind.REASSOC))
    return sorted(events + added)


def write_truth_csv(rows, path, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Write ``(dev, day, t_sleep_slot, t_awake_slot)`` rows as ISO-8601 times."""
    zone = get_zone(tz)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dev", "day", "t_sleep", "t_awake"])
        for dev, day, ts, ta in rows:
            writer.writerow([
                dev, day.isoformat(),
                slot_clock(ts, slot_minutes, window_start, day=day).replace(tzinfo=zone).isoformat(),
                slot_clock(ta, slot_minutes, window_start, day=day).replace(tzinfo=zone).isoformat(),
            ])
