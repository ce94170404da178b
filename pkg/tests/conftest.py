from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from wifisleep.ingest import EventKind, WifiEvent, load_ap_map

DAY = date(2019, 10, 1)


def at(hour, minute=0, second=0, day=DAY):
    """UTC instant on ``day`` (hours past 24 roll into the next day)."""
    base = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
    return base + timedelta(hours=hour, minutes=minute, seconds=second)


def event(ts, ap="dorm-a1", kind=EventKind.ASSOC, dev="d1"):
    return WifiEvent(ts, dev, ap, kind)


@pytest.fixture(scope="session")
def ap_map():
    return load_ap_map([
        ("dorm-a1", "DormA", "DormA-1", True),
        ("dorm-a2", "DormA", "DormA-1", True),
        ("dorm-a3", "DormA", "DormA-1", True),
        ("dorm-b1", "DormB", "DormB-1", True),
        ("lib-1", "Library", "Library", False),
        ("lib-2", "Library", "Library", False),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
