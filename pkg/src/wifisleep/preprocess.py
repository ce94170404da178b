"""Per-device, per-day slot series from canonical events.

All clock arithmetic here is wall-clock arithmetic in the deployment
timezone: an event is converted to local time, its naive clock reading is
compared with ``day + window_start``, and the offset in minutes picks the
slot.  On DST days the repeated hour therefore lands in the same slots twice
and the skipped hour stays empty, but slot ``i`` always means the same clock
time.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta
from functools import lru_cache
from zoneinfo import ZoneInfo

import numpy as np

from .exceptions import NoPrimaryDeviceError
from .ingest import ASSOCIATION_KINDS, EventKind, WifiEvent

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
DEFAULT_WINDOW_START = time(18, 0)


@lru_cache(maxsize=None)
def get_zone(tz):
    return ZoneInfo(tz)


def to_local(ts, tz="UTC"):
    """Naive local wall-clock reading of an aware instant."""
    return ts.astimezone(get_zone(tz)).replace(tzinfo=None)


def check_slot_minutes(slot_minutes):
    if not isinstance(slot_minutes, (int, np.integer)) or slot_minutes <= 0 \
            or MINUTES_PER_DAY % slot_minutes:
        raise ValueError(f"slot_minutes={slot_minutes!r} must be a positive "
                         f"divisor of {MINUTES_PER_DAY}")
    return int(slot_minutes)


def n_slots_for(slot_minutes):
    return MINUTES_PER_DAY // check_slot_minutes(slot_minutes)


def window_day(ts, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """The calendar date whose window (anchored at ``window_start``) holds ``ts``."""
    local = to_local(ts, tz)
    shifted = local - timedelta(hours=window_start.hour, minutes=window_start.minute)
    return shifted.date()


def slot_of_clock(clock, slot_minutes=15, window_start=DEFAULT_WINDOW_START):
    """Slot index of a wall-clock time within the window."""
    minutes = (clock.hour * 60 + clock.minute) - (window_start.hour * 60 + window_start.minute)
    return (minutes % MINUTES_PER_DAY) // check_slot_minutes(slot_minutes)


def slot_clock(slot, slot_minutes=15, window_start=DEFAULT_WINDOW_START, day=None):
    """Wall-clock start of ``slot``; a naive datetime when ``day`` is given."""
    anchor = datetime.combine(day or date(2000, 1, 1), window_start)
    start = anchor + timedelta(minutes=int(slot) * slot_minutes)
    return start if day is not None else start.time()


def slot_index(ts, day, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Slot of ``ts`` in the window of ``day``, or ``None`` outside it."""
    offset = to_local(ts, tz) - datetime.combine(day, window_start)
    seconds = offset.total_seconds()
    if seconds < 0 or seconds >= MINUTES_PER_DAY * 60:
        return None
    return int(seconds // (slot_minutes * 60))


@dataclass(frozen=True)
class SlotSeries:
    """Event counts per slot for one device over one day window.

    ``observed`` optionally flags the slots that carry information; slots
    marked ``False`` (device away or off) are left out of every likelihood.
    ``None`` means all slots are observed.
    """

    device: str
    day: date
    counts: np.ndarray
    slot_minutes: int = 15
    window_start: time = DEFAULT_WINDOW_START
    observed: np.ndarray | None = None

    def __post_init__(self):
        n = n_slots_for(self.slot_minutes)
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.shape[0] != n:
            raise ValueError(f"expected {n} slot counts, got shape {counts.shape}")
        if counts.size and (counts.min() < 0 or not np.all(counts == np.round(counts))):
            raise ValueError("slot counts must be non-negative integers")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.observed is not None:
            observed = np.asarray(self.observed, dtype=bool)
            if observed.shape != counts.shape:
                raise ValueError("observed mask must match counts")
            if np.any(counts[~observed]):
                raise ValueError("unobserved slots must have zero counts")
            observed.setflags(write=False)
            object.__setattr__(self, "observed", observed)

    @property
    def observed_mask(self):
        if self.observed is None:
            return np.ones(self.n_slots, dtype=bool)
        return self.observed

    @property
    def n_slots(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    @classmethod
    def from_counts(cls, counts, device="synthetic", day=date(2000, 1, 1), **kwargs):
        counts = np.asarray(counts)
        if "slot_minutes" not in kwargs:
            kwargs["slot_minutes"] = MINUTES_PER_DAY // counts.shape[0]
        return cls(device=device, day=day, counts=counts, **kwargs)


@dataclass(frozen=True)
class DormInterval:
    """Half-open slot range ``[start_slot, end_slot)`` spent in one residence."""

    start_slot: int
    end_slot: int
    building: str = ""

    def __post_init__(self):
        if not 0 <= self.start_slot < self.end_slot:
            raise ValueError(f"invalid dorm interval [{self.start_slot}, {self.end_slot})")

    @property
    def span(self):
        return self.end_slot - self.start_slot


def group_by_device(events):
    grouped = defaultdict(list)
    for ev in events:
        grouped[ev.device].append(ev)
    for evs in grouped.values():
        evs.sort()
    return dict(grouped)


def select_primary_device(events_by_device, horizon_days=7, end=None):
    """Device with the most Assoc/Reassoc events in the trailing horizon.

    ``end`` defaults to the latest event instant seen across all devices;
    the horizon is ``(end - horizon_days, end]``.  Ties go to the
    lexicographically smallest identifier.
    """
    if end is None:
        stamps = [ev.timestamp for evs in events_by_device.values() for ev in evs]
        if not stamps:
            raise NoPrimaryDeviceError("no events for any device")
        end = max(stamps)
    start = end - timedelta(days=horizon_days)
    best, best_count = None, 0
    for device in sorted(events_by_device):
        n = sum(1 for ev in events_by_device[device]
                if ev.kind in ASSOCIATION_KINDS and start < ev.timestamp <= end)
        if n > best_count:
            best, best_count = device, n
    if best is None:
        raise NoPrimaryDeviceError("no device has association events in the horizon")
    return best


def classify_resident(events, ap_map, tz="UTC", end_day=None, days=7,
                      min_nights=4, night_end_hour=6, min_share=0.5):
    """Whether a device spends its nights at residential APs.

    A night (local 00:00 to ``night_end_hour``) qualifies when at least
    ``min_share`` of that night's events hit residential APs.  The device
    is resident if at least ``min_nights`` of the ``days`` trailing nights
    ending at ``end_day`` qualify.  Nights without events never qualify.
    """
    per_night = defaultdict(lambda: [0, 0])
    latest = None
    for ev in events:
        local = to_local(ev.timestamp, tz)
        latest = local.date() if latest is None else max(latest, local.date())
        if local.hour < night_end_hour:
            tally = per_night[local.date()]
            tally[0] += 1
            tally[1] += ap_map.is_residential(ev.ap)
    if end_day is None:
        end_day = latest
    if end_day is None:
        return False
    qualifying = 0
    for back in range(days):
        total, residential = per_night.get(end_day - timedelta(days=back), (0, 0))
        if total and residential >= min_share * total:
            qualifying += 1
    return qualifying >= min_nights


def _has_revisit(aps):
    last_seen = {}
    for i, ap in enumerate(aps):
        j = last_seen.get(ap)
        if j is not None and i - j > 1 and any(a != ap for a in aps[j + 1:i]):
            return True
        last_seen[ap] = i
    return False


def _collapse(run):
    counts = Counter(ev.ap for ev in run)
    top = max(counts.values())
    modal = next(ev.ap for ev in run if counts[ev.ap] == top)
    first = run[0]
    return WifiEvent(timestamp=first.timestamp, device=first.device, ap=modal,
                     kind=EventKind.ASSOC)


def filter_ping_pong(events, ap_map, gap_seconds=60, min_run=3):
    """Collapse rapid back-and-forth re-associations within one roaming group.

    ``events`` must be one device's events sorted by time.  A maximal run of
    consecutive association events in a single group with every gap below
    ``gap_seconds`` is replaced by one Assoc at its first timestamp, on its
    most frequent AP, when it has at least ``min_run`` events, two or more
    distinct APs and some AP revisited after another.  Events on APs missing
    from ``ap_map`` pass through and break runs.
    """
    out = []
    run = []

    def flush():
        aps = [ev.ap for ev in run]
        if len(run) >= min_run and len(set(aps)) >= 2 and _has_revisit(aps):
            out.append(_collapse(run))
        else:
            out.extend(run)
        run.clear()

    for ev in events:
        group = ap_map.group_of(ev.ap) if ev.kind in ASSOCIATION_KINDS else None
        if ev.kind in ASSOCIATION_KINDS and group is None:
            logger.debug("unknown AP %s; not filtered", ev.ap)
        if group is None:
            flush()
            out.append(ev)
            continue
        if run:
            prev = run[-1]
            gap = (ev.timestamp - prev.timestamp).total_seconds()
            if ap_map.group_of(prev.ap) != group or gap >= gap_seconds:
                flush()
        run.append(ev)
    flush()
    return out


def bin_events(events, day, slot_minutes=15, window_start=DEFAULT_WINDOW_START,
               tz="UTC", device=None):
    """Count events per slot over the window that starts at ``day`` + ``window_start``."""
    n = n_slots_for(slot_minutes)
    counts = np.zeros(n, dtype=np.int64)
    for ev in events:
        if device is None:
            device = ev.device
        i = slot_index(ev.timestamp, day, slot_minutes, window_start, tz)
        if i is not None:
            counts[i] += 1
    return SlotSeries(device=device or "", day=day, counts=counts,
                      slot_minutes=slot_minutes, window_start=window_start)


def residential_events(events, ap_map):
    return [ev for ev in events if ap_map.is_residential(ev.ap)]


def detect_absence(series, residential_series=None, min_events=4):
    """True when the day holds too little activity to estimate sleep.

    With ``residential_series`` given, a day without any residential-AP
    event is also absent.
    """
    if series.total < min_events:
        return True
    if residential_series is not None and residential_series.total == 0:
        return True
    return False


def silent_gaps(series, min_gap_slots=16):
    """Maximal runs of at least ``min_gap_slots`` zero-count slots, as ``(start, end)``."""
    gaps = []
    if min_gap_slots <= 0:
        return gaps
    counts = series.counts
    i, n = 0, series.n_slots
    while i < n:
        if counts[i]:
            i += 1
            continue
        j = i
        while j < n and counts[j] == 0:
            j += 1
        if j - i >= min_gap_slots:
            gaps.append((i, j))
        i = j
    return gaps


def mask_silent_gaps(series, min_gap_slots=16):
    """Copy of ``series`` with long silent stretches marked unobserved.

    A phone left on the network keeps re-associating every 15 to 30
    minutes even while its owner sleeps, so hours without a single event
    mean the device was away or switched off.  Those slots say nothing
    about sleep.
    """
    observed = series.observed_mask.copy()
    for start, end in silent_gaps(series, min_gap_slots):
        observed[start:end] = False
    if observed.all():
        return series
    return replace(series, observed=observed)


def locate_dorm_interval(events, ap_map, day, slot_minutes=15,
                         window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Longest run of slots located in one residential building.

    Each slot takes the building of the latest event at or before the end of
    that slot; slots before the first event have no building.  Returns
    ``None`` when no slot lands in a residential building.
    """
    n = n_slots_for(slot_minutes)
    last_in_slot = [None] * n
    for ev in sorted(events):
        i = slot_index(ev.timestamp, day, slot_minutes, window_start, tz)
        if i is not None:
            last_in_slot[i] = ev.ap
    assigned = [None] * n
    current = None
    for i in range(n):
        ap = last_in_slot[i]
        if ap is not None:
            rec = ap_map.get(ap)
            current = rec.building if rec is not None and rec.residential else ""
        assigned[i] = current

    best = None
    i = 0
    while i < n:
        building = assigned[i]
        j = i + 1
        while j < n and assigned[j] == building:
            j += 1
        if building and (best is None or j - i > best.span):
            best = DormInterval(i, j, building)
        i = j
    return best


def device_days(events, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    """Every window day from the first to the last event, inclusive."""
    days = [window_day(ev.timestamp, window_start, tz) for ev in events]
    if not days:
        return []
    first, last = min(days), max(days)
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


def write_slot_series_csv(series_list, path):
    """One row per series: ``dev, day, s0 .. s{S-1}``."""
    series_list = list(series_list)
    n = series_list[0].n_slots if series_list else 96
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dev", "day"] + [f"s{i}" for i in range(n)])
        for s in series_list:
            writer.writerow([s.device, s.day.isoformat()] + [int(c) for c in s.counts])


def read_slot_series_csv(path, window_start=DEFAULT_WINDOW_START):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 2
        slot_minutes = MINUTES_PER_DAY // n
        for row in reader:
            out.append(SlotSeries(
                device=row[0], day=date.fromisoformat(row[1]),
                counts=np.array([int(c) for c in row[2:]], dtype=np.int64),
                slot_minutes=slot_minutes, window_start=window_start))
    return out
