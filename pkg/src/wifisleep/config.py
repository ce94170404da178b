"""Run configuration: a flat ``key = value`` file.

Blank lines and lines starting with ``#`` are ignored.  Every key is
optional; unknown keys are rejected.  Recognized keys::

    slot_minutes          15
    window_start          18:00
    timezone              UTC
    min_sleep_slots       12
    mode                  campus | home
    home.bed_time         HH:MM (required in home mode)
    home.wake_time        HH:MM (required in home mode)
    mh.burn_in            200
    mh.retained           50
    mh.thin               5
    mh.step_t             4
    mh.step_loglambda     0.25
    mh.seed               overrides ``seed`` for sampling when set
    pingpong.enabled      true
    pingpong.gap_seconds  60
    absence.min_events    4
    absence.min_gap_slots 16 (0 disables silent-gap masking)
    regularity.threshold  0.6
    regularity.mode       fixed | median
    parallelism           1
    seed                  0
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import time
from pathlib import Path
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .exceptions import ConfigError
from .inference import SamplerConfig
from .preprocess import MINUTES_PER_DAY, slot_of_clock


def _parse_clock(text):
    try:
        hh, mm = text.split(":")
        return time(int(hh), int(mm))
    except ValueError:
        raise ValueError(f"expected HH:MM, got {text!r}") from None


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    slot_minutes: int = 15
    window_start: time = time(18, 0)
    timezone: str = "UTC"
    min_sleep_slots: int = 12
    mode: str = "campus"
    home_bed_time: time | None = None
    home_wake_time: time | None = None
    mh: SamplerConfig = field(default_factory=SamplerConfig)
    mh_seed: int | None = None
    pingpong_enabled: bool = True
    pingpong_gap_seconds: float = 60.0
    absence_min_events: int = 4
    absence_min_gap_slots: int = 16
    regularity_threshold: float = 0.6
    regularity_mode: str = "fixed"
    parallelism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.slot_minutes <= 0 or MINUTES_PER_DAY % self.slot_minutes:
            raise ConfigError(f"{self.slot_minutes} does not divide {MINUTES_PER_DAY}",
                              key="slot_minutes")
        if self.min_sleep_slots < 1:
            raise ConfigError("must be >= 1", key="min_sleep_slots")
        if self.min_sleep_slots >= self.n_slots:
            raise ConfigError("must be smaller than the number of slots", key="min_sleep_slots")
        if self.parallelism < 1:
            raise ConfigError("must be >= 1", key="parallelism")
        if self.mode not in ("campus", "home"):
            raise ConfigError(f"unknown mode {self.mode!r}", key="mode")
        if self.mode == "home":
            if self.home_bed_time is None:
                raise ConfigError("home mode requires a bed time", key="home.bed_time")
            if self.home_wake_time is None:
                raise ConfigError("home mode requires a wake time", key="home.wake_time")
        bed, wake = self.prior_centers
        if bed + self.min_sleep_slots > wake:
            raise ConfigError(f"bed slot {bed} + {self.min_sleep_slots} exceeds wake slot {wake}",
                              key="home.wake_time" if self.mode == "home" else "min_sleep_slots")
        try:
            ZoneInfo(self.timezone)
        except (ZoneInfoNotFoundError, ValueError):
            raise ConfigError(f"unknown timezone {self.timezone!r}", key="timezone") from None
        if not self.pingpong_gap_seconds > 0:
            raise ConfigError("must be > 0", key="pingpong.gap_seconds")
        if self.absence_min_events < 1:
            raise ConfigError("must be >= 1", key="absence.min_events")
        if self.absence_min_gap_slots < 0:
            raise ConfigError("must be >= 0", key="absence.min_gap_slots")
        if not 0.0 <= self.regularity_threshold <= 1.0:
            raise ConfigError("must lie in [0, 1]", key="regularity.threshold")
        if self.regularity_mode not in ("fixed", "median"):
            raise ConfigError(f"unknown mode {self.regularity_mode!r}", key="regularity.mode")

    @property
    def n_slots(self):
        return MINUTES_PER_DAY // self.slot_minutes

    @property
    def bed_time(self):
        return self.home_bed_time if self.mode == "home" else (self.home_bed_time or time(0, 0))

    @property
    def wake_time(self):
        return self.home_wake_time if self.mode == "home" else (self.home_wake_time or time(8, 0))

    @property
    def prior_centers(self):
        return (slot_of_clock(self.bed_time, self.slot_minutes, self.window_start),
                slot_of_clock(self.wake_time, self.slot_minutes, self.window_start))

    @property
    def sampling_seed(self):
        return self.seed if self.mh_seed is None else self.mh_seed

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# key -> (RunConfig field or "mh.<field>", parser)
_KEYS = {
    "slot_minutes": ("slot_minutes", int),
    "window_start": ("window_start", _parse_clock),
    "timezone": ("timezone", str),
    "min_sleep_slots": ("min_sleep_slots", int),
    "mode": ("mode", str),
    "home.bed_time": ("home_bed_time", _parse_clock),
    "home.wake_time": ("home_wake_time", _parse_clock),
    "mh.burn_in": ("mh.burn_in", int),
    "mh.retained": ("mh.retained", int),
    "mh.thin": ("mh.thin", int),
    "mh.step_t": ("mh.step_t", int),
    "mh.step_loglambda": ("mh.step_loglambda", float),
    "mh.seed": ("mh_seed", int),
    "pingpong.enabled": ("pingpong_enabled", _parse_bool),
    "pingpong.gap_seconds": ("pingpong_gap_seconds", float),
    "absence.min_events": ("absence_min_events", int),
    "absence.min_gap_slots": ("absence_min_gap_slots", int),
    "regularity.threshold": ("regularity_threshold", float),
    "regularity.mode": ("regularity_mode", str),
    "parallelism": ("parallelism", int),
    "seed": ("seed", int),
}


def parse_config(text, **overrides):
    """Build a :class:`RunConfig` from config-file text.

    ``overrides`` are RunConfig field names (``seed``, ``parallelism``...)
    applied after the file, typically from command-line flags.
    """
    top, mh = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("unknown key", key=key)
        target, parse = _KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {value!r}: {exc}", key=key) from None
        if target.startswith("mh."):
            mh[target[3:]] = parsed
        else:
            top[target] = parsed
    top.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(mh=SamplerConfig(**mh), **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, **overrides):
    """Read a config file; ``None`` means all defaults."""
    text = "" if path is None else Path(path).read_text(encoding="utf-8")
    return parse_config(text, **overrides)
