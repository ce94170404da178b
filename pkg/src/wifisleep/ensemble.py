"""WAIC-weighted model averaging and the per-user, per-day pipeline."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime

import numpy as np
from scipy.special import gammaln, logsumexp

from .config import RunConfig
from .exceptions import PriorUnavailableError
from .evaluate import snap_to_slot
from .inference import (MODEL_ORDER, ChangePointState, ModelKind, build_prior_spec,
                        extract_map, run_mh)
from .preprocess import DEFAULT_WINDOW_START, detect_absence, get_zone, mask_silent_gaps, slot_clock

logger = logging.getLogger(__name__)


class EstimateStatus(str, enum.Enum):
    ESTIMATED = "estimated"
    ABSENT = "absent"
    INSUFFICIENT_PRIOR = "insufficient_prior"


def pointwise_loglik(counts, samples):
    """``(n_samples, n_slots)`` matrix of Poisson log pmfs under each sample."""
    counts = np.asarray(counts, dtype=float)
    n = counts.shape[0]
    ts = np.array([s.state.t_sleep for s in samples])[:, None]
    ta = np.array([s.state.t_awake for s in samples])[:, None]
    ls = np.array([s.state.lambda_sleep for s in samples])[:, None]
    la = np.array([s.state.lambda_awake for s in samples])[:, None]
    t = np.arange(n)[None, :]
    rate = np.where((t >= ts) & (t < ta), ls, la)
    return counts * np.log(rate) - rate - gammaln(counts + 1.0)


def compute_waic(series, samples, prior=None):
    """WAIC on the deviance scale, ``-2 * (lppd - p_waic)``.

    ``p_waic`` uses the sample variance (``ddof=1``) of each slot's log
    likelihood; it is zero for a single sample.  ``prior`` is accepted for
    interface symmetry and does not enter the score.
    """
    if not samples:
        raise ValueError("no samples")
    counts = getattr(series, "counts", series)
    ll = pointwise_loglik(counts, samples)
    observed = getattr(series, "observed", None)
    if observed is not None:
        ll = ll[:, observed]
    m = ll.shape[0]
    lppd = float(np.sum(logsumexp(ll, axis=0) - math.log(m)))
    p_waic = float(np.sum(np.var(ll, axis=0, ddof=1))) if m > 1 else 0.0
    return -2.0 * (lppd - p_waic)


def akaike_weights(waic_values):
    """``exp(-0.5 * (WAIC - min WAIC))`` normalized to sum to one."""
    values = np.asarray(waic_values, dtype=float)
    if values.size == 0:
        raise ValueError("no WAIC values")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"non-finite WAIC value in {values.tolist()}")
    rel = np.exp(-0.5 * (values - values.min()))
    return (rel / rel.sum()).tolist()


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def bma_combine(maps, weights, min_sleep_slots=12):
    """Weighted average of per-model MAP change points, rounded half up.

    The wake slot is raised to ``t_sleep + min_sleep_slots`` if rounding
    leaves a shorter night.
    """
    if len(maps) != len(weights):
        raise ValueError(f"{len(maps)} MAP states but {len(weights)} weights")
    if not maps:
        raise ValueError("nothing to combine")
    ts = _round_half_up(sum(w * m.t_sleep for m, w in zip(maps, weights)))
    ta = _round_half_up(sum(w * m.t_awake for m, w in zip(maps, weights)))
    return ts, max(ta, ts + min_sleep_slots)


@dataclass
class ModelResult:
    name: str
    map_state: object
    waic: float
    weight: float = 0.0
    samples: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"name": self.name, "t_sleep": self.map_state.t_sleep,
                "t_awake": self.map_state.t_awake, "waic": self.waic,
                "weight": self.weight}


@dataclass
class SleepEstimate:
    device: str
    day: object
    status: EstimateStatus
    t_sleep_slot: int | None = None
    t_awake_slot: int | None = None
    t_sleep_time: object = None
    t_awake_time: object = None
    duration_minutes: int | None = None
    per_model: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def estimated(self):
        return self.status is EstimateStatus.ESTIMATED

    @property
    def weights(self):
        return [m.weight for m in self.per_model]

    def to_dict(self):
        return {
            "dev": self.device,
            "day": self.day.isoformat(),
            "status": self.status.value,
            "t_sleep": self.t_sleep_time.isoformat() if self.t_sleep_time else None,
            "t_awake": self.t_awake_time.isoformat() if self.t_awake_time else None,
            "duration_min": self.duration_minutes,
            "models": [m.to_dict() for m in self.per_model],
        }

    @classmethod
    def from_dict(cls, obj, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
        """Inverse of :meth:`to_dict`; per-model samples are not restored."""
        day = date.fromisoformat(obj["day"])
        status = EstimateStatus(obj["status"])
        ts = ta = t_sleep = t_awake = None
        if obj.get("t_sleep") is not None:
            t_sleep = datetime.fromisoformat(obj["t_sleep"])
            t_awake = datetime.fromisoformat(obj["t_awake"])
            ts = snap_to_slot(t_sleep, day, slot_minutes, window_start, tz)
            ta = snap_to_slot(t_awake, day, slot_minutes, window_start, tz)
        per_model = [ModelResult(m["name"], ChangePointState(m["t_sleep"], m["t_awake"],
                                                             math.nan, math.nan),
                                 m["waic"], m["weight"]) for m in obj.get("models", [])]
        return cls(obj["dev"], day, status, ts, ta, t_sleep, t_awake,
                   obj.get("duration_min"), per_model)


def estimate_line(estimate):
    """One compact, key-ordered JSON line for an estimate."""
    return json.dumps(estimate.to_dict(), separators=(",", ":"))


def read_estimates_jsonl(path, slot_minutes=15, window_start=DEFAULT_WINDOW_START, tz="UTC"):
    with open(path, encoding="utf-8") as fh:
        return [SleepEstimate.from_dict(json.loads(line), slot_minutes, window_start, tz)
                for line in fh if line.strip()]


def derive_seed(seed, device, day=None):
    """Seed for one (device, day) task, independent of scheduling order."""
    digest = int(hashlib.sha256(device.encode()).hexdigest()[:16], 16)
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF ^ digest]
    if day is not None:
        entropy.append(day.toordinal())
    return int(np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)[0])


def render_slot(slot, series, tz="UTC"):
    naive = slot_clock(slot, series.slot_minutes, series.window_start, day=series.day)
    return naive.replace(tzinfo=get_zone(tz))


def models_for(config):
    if config.mode == "home":
        return (ModelKind.NORMAL, ModelKind.HIERARCHICAL)
    return MODEL_ORDER


def infer_user_day(series, dorm=None, config=None, residential_series=None, seed=None,
                   models=None):
    """Ensemble sleep estimate for one device-day.

    Parameters
    ----------
    series : SlotSeries
    dorm : DormInterval, optional
        Longest residential interval; without it the location model is
        skipped and weights are spread over the remaining models.
    config : RunConfig, optional
    residential_series : SlotSeries, optional
        Counts restricted to residential APs, for the absence check.
    seed : int, optional
        Defaults to ``config.sampling_seed``.
    models : sequence of ModelKind or str, optional
        Defaults to all three in campus mode, normal and hierarchical in
        home mode.

    Unless the series already carries an observed mask, silent stretches of
    ``config.absence_min_gap_slots`` or more are masked before sampling.
    """
    config = config or RunConfig(slot_minutes=series.slot_minutes,
                                 window_start=series.window_start)
    seed = config.sampling_seed if seed is None else seed
    k = config.min_sleep_slots
    if detect_absence(series, residential_series, config.absence_min_events):
        return SleepEstimate(series.device, series.day, EstimateStatus.ABSENT)
    if series.observed is None and config.absence_min_gap_slots:
        series = mask_silent_gaps(series, config.absence_min_gap_slots)

    results, notes = [], []
    for kind in [ModelKind(m) for m in (models or models_for(config))]:
        try:
            prior = build_prior_spec(kind, dorm, config.bed_time, config.wake_time,
                                     slot_minutes=series.slot_minutes,
                                     window_start=series.window_start,
                                     min_sleep_slots=k)
        except PriorUnavailableError as exc:
            notes.append(f"{kind.value} skipped: {exc}")
            logger.debug("%s %s: %s skipped (%s)", series.device, series.day, kind.value, exc)
            continue
        chain_seed = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, MODEL_ORDER.index(kind)])
        samples = run_mh(series, prior, config.mh, seed=chain_seed)
        results.append(ModelResult(kind.value, extract_map(samples),
                                   compute_waic(series, samples, prior), samples=samples))
    if not results:
        return SleepEstimate(series.device, series.day, EstimateStatus.INSUFFICIENT_PRIOR,
                             notes=notes)

    for res, w in zip(results, akaike_weights([r.waic for r in results])):
        res.weight = w
    ts, ta = bma_combine([r.map_state for r in results], [r.weight for r in results], k)
    return SleepEstimate(
        device=series.device, day=series.day, status=EstimateStatus.ESTIMATED,
        t_sleep_slot=ts, t_awake_slot=ta,
        t_sleep_time=render_slot(ts, series, config.timezone),
        t_awake_time=render_slot(ta, series, config.timezone),
        duration_minutes=(ta - ts) * series.slot_minutes,
        per_model=results, notes=notes,
    )
