"""Two-change-point Poisson model, its priors, and a Metropolis-Hastings sampler.

Slot counts ``w_t`` are Poisson with rate ``lambda_sleep`` on
``[t_sleep, t_awake)`` and ``lambda_awake`` elsewhere (the same rate before
and after the night).  Change points are integer slot indices.  Three prior
families are supported:

``location_uniform``
    discrete uniform change points inside the longest dorm interval;
``normal``
    normal change points around configured bed and wake slots;
``hierarchical``
    as ``normal`` but with a shared spread ``tau ~ Gamma(alpha, beta)``,
    ``alpha, beta ~ Exponential(hyper_rate)``.  Here the change-point prior
    is a normal pmf normalized over the admissible integer slots; left
    unnormalized, the density grows without bound as ``tau -> 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from datetime import time

import numpy as np
from scipy.special import gammaln

from .exceptions import AbsentSeriesError, ConfigError, PriorUnavailableError
from .preprocess import DEFAULT_WINDOW_START, slot_of_clock

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
NEG_INF = -math.inf


class ModelKind(str, enum.Enum):
    LOCATION_UNIFORM = "location_uniform"
    NORMAL = "normal"
    HIERARCHICAL = "hierarchical"


MODEL_ORDER = (ModelKind.LOCATION_UNIFORM, ModelKind.NORMAL, ModelKind.HIERARCHICAL)


def poisson_logpmf(w, lam):
    """``w*log(lam) - lam - log(w!)``."""
    if not lam > 0:
        raise ValueError(f"Poisson rate must be positive, got {lam}")
    if w < 0 or w != int(w):
        raise ValueError(f"count must be a non-negative integer, got {w}")
    return w * math.log(lam) - lam - math.lgamma(w + 1)


def gamma_logpdf(x, a, b):
    """Log density of Gamma(shape=a, rate=b) at ``x``."""
    if not (x > 0 and a > 0 and b > 0):
        raise ValueError(f"gamma_logpdf needs x, a, b > 0; got {x}, {a}, {b}")
    return a * math.log(b) + (a - 1.0) * math.log(x) - b * x - math.lgamma(a)


def normal_logpdf(x, mu, sigma):
    z = (x - mu) / sigma
    return -0.5 * z * z - math.log(sigma) - _HALF_LOG_2PI


def exponential_logpdf(x, rate):
    if not (x > 0 and rate > 0):
        raise ValueError(f"exponential_logpdf needs x, rate > 0; got {x}, {rate}")
    return math.log(rate) - rate * x


@dataclass(frozen=True)
class ChangePointState:
    t_sleep: int
    t_awake: int
    lambda_sleep: float
    lambda_awake: float
    tau: float | None = None
    alpha: float | None = None
    beta: float | None = None

    @property
    def duration_slots(self):
        return self.t_awake - self.t_sleep


@dataclass(frozen=True)
class PosteriorSample:
    state: ChangePointState
    log_joint: float


@dataclass(frozen=True)
class PriorSpec:
    """Prior configuration of one ensemble member.

    ``t_start``/``t_end`` are the dorm interval bounds for the location
    model and the bed/wake centers for the normal and hierarchical models.
    """

    model: ModelKind
    t_start: int
    t_end: int
    sigma_slots: float = 12.0
    min_sleep_slots: int = 12
    a_awake: float = 2.5
    b_awake: float = 1.0
    a_sleep: float = 1.0
    b_sleep: float = 1.0
    hyper_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        if self.min_sleep_slots < 1:
            raise ConfigError("must be >= 1", key="min_sleep_slots")
        if self.t_start + self.min_sleep_slots > self.t_end:
            raise PriorUnavailableError(
                f"t_start + k > t_end ({self.t_start} + {self.min_sleep_slots} > {self.t_end})")
        for name in ("sigma_slots", "a_awake", "b_awake", "a_sleep", "b_sleep", "hyper_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", key=name)

    def sleep_bounds(self, n_slots):
        """Inclusive ``(lo, hi)`` range of ``t_sleep`` with non-zero prior mass."""
        k = self.min_sleep_slots
        if self.model is ModelKind.LOCATION_UNIFORM:
            return self.t_start, min(self.t_end, n_slots) - k
        return 0, n_slots - k

    def awake_bounds(self, n_slots):
        k = self.min_sleep_slots
        if self.model is ModelKind.LOCATION_UNIFORM:
            return self.t_start + k, min(self.t_end, n_slots)
        return k, n_slots


def build_prior_spec(model, dorm=None, bed_time=None, wake_time=None, *,
                     slot_minutes=15, window_start=DEFAULT_WINDOW_START,
                     min_sleep_slots=12, sigma_slots=12.0):
    """Prior for one model on one day.

    The location model takes its support from ``dorm``; the other two center
    on ``bed_time``/``wake_time`` (00:00 and 08:00 when omitted).
    """
    model = ModelKind(model)
    if model is ModelKind.LOCATION_UNIFORM:
        if dorm is None:
            raise PriorUnavailableError("no dorm interval for this day")
        if dorm.span < min_sleep_slots:
            raise PriorUnavailableError(
                f"dorm interval spans {dorm.span} slots < {min_sleep_slots}")
        return PriorSpec(model, dorm.start_slot, dorm.end_slot,
                         sigma_slots=sigma_slots, min_sleep_slots=min_sleep_slots)
    bed = slot_of_clock(bed_time or time(0, 0), slot_minutes, window_start)
    wake = slot_of_clock(wake_time or time(8, 0), slot_minutes, window_start)
    return PriorSpec(model, bed, wake, sigma_slots=sigma_slots,
                     min_sleep_slots=min_sleep_slots)


def _log_sum_exp_sq(grid, tau):
    e = -0.5 * (grid / tau) ** 2
    top = e.max()
    return float(top + np.log(np.exp(e - top).sum()))


class _LogTarget:
    """Unnormalized log posterior over plain floats, O(1) per evaluation."""

    def __init__(self, counts, prior, observed=None):
        counts = np.asarray(counts, dtype=np.int64)
        if observed is None:
            observed = np.ones(counts.shape[0], dtype=bool)
        counts = np.where(observed, counts, 0)
        self.n = int(counts.shape[0])
        self.cum = [0] + np.cumsum(counts).tolist()
        self.cum_lf = [0.0] + np.cumsum(gammaln(counts + 1.0)).tolist()
        self.cum_obs = [0] + np.cumsum(observed).tolist()
        self.prior = prior
        self.k = prior.min_sleep_slots
        self.s_lo, self.s_hi = prior.sleep_bounds(self.n)
        self.a_lo, self.a_hi = prior.awake_bounds(self.n)
        p = prior
        self.lp_sleep_const = p.a_sleep * math.log(p.b_sleep) - math.lgamma(p.a_sleep)
        self.lp_awake_const = p.a_awake * math.log(p.b_awake) - math.lgamma(p.a_awake)
        if p.model is ModelKind.LOCATION_UNIFORM:
            self.t_const = -math.log(self.s_hi - self.s_lo + 1) - math.log(self.a_hi - self.a_lo + 1)
        self.log_hyper_rate = math.log(p.hyper_rate)
        self._s_grid = np.arange(self.s_lo, self.s_hi + 1, dtype=float) - prior.t_start
        self._a_grid = np.arange(self.a_lo, self.a_hi + 1, dtype=float) - prior.t_end
        self._norm_cache = {}

    def _log_normalizers(self, tau):
        # tau moves the mass of the integer-slot normal, so its normalizer
        # over the support is not constant and must stay in the density
        vals = self._norm_cache.get(tau)
        if vals is None:
            vals = (_log_sum_exp_sq(self._s_grid, tau), _log_sum_exp_sq(self._a_grid, tau))
            if len(self._norm_cache) >= 4:
                self._norm_cache.clear()
            self._norm_cache[tau] = vals
        return vals

    def __call__(self, ts, ta, ls, la, tau=None, alpha=None, beta=None):
        if ts < self.s_lo or ts > self.s_hi or ta < self.a_lo or ta > self.a_hi \
                or ts + self.k > ta:
            return NEG_INF
        if ls <= 0 or la <= 0:
            return NEG_INF
        p = self.prior
        cum, cum_lf, n = self.cum, self.cum_lf, self.n
        cum_obs = self.cum_obs
        w_sleep = cum[ta] - cum[ts]
        w_awake = cum[n] - w_sleep
        n_sleep = cum_obs[ta] - cum_obs[ts]
        ll = (w_sleep * math.log(ls) - n_sleep * ls
              + w_awake * math.log(la) - (cum_obs[n] - n_sleep) * la - cum_lf[n])
        lp = (self.lp_sleep_const + (p.a_sleep - 1.0) * math.log(ls) - p.b_sleep * ls
              + self.lp_awake_const + (p.a_awake - 1.0) * math.log(la) - p.b_awake * la)
        if p.model is ModelKind.LOCATION_UNIFORM:
            lp += self.t_const
        elif p.model is ModelKind.NORMAL:
            lp += normal_logpdf(ts, p.t_start, p.sigma_slots) + normal_logpdf(ta, p.t_end, p.sigma_slots)
        else:
            if tau is None or alpha is None or beta is None:
                raise ValueError("hierarchical model needs tau, alpha and beta")
            if tau <= 0 or alpha <= 0 or beta <= 0:
                return NEG_INF
            z_s = (ts - p.t_start) / tau
            z_a = (ta - p.t_end) / tau
            norm_s, norm_a = self._log_normalizers(tau)
            lp += -0.5 * (z_s * z_s + z_a * z_a) - norm_s - norm_a
            lp += alpha * math.log(beta) + (alpha - 1.0) * math.log(tau) - beta * tau - math.lgamma(alpha)
            lp += 2.0 * self.log_hyper_rate - p.hyper_rate * (alpha + beta)
        return ll + lp


def log_joint(series, state, prior):
    """Unnormalized log posterior of ``state`` given the slot counts.

    Slots flagged unobserved on the series contribute no likelihood.
    Returns ``-inf`` for states outside the prior support, including any
    state with ``t_awake < t_sleep + k``.
    """
    counts = getattr(series, "counts", series)
    target = _LogTarget(counts, prior, getattr(series, "observed", None))
    return target(state.t_sleep, state.t_awake, state.lambda_sleep, state.lambda_awake,
                  state.tau, state.alpha, state.beta)


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 200
    retained: int = 50
    thin: int = 5
    step_t: int = 4
    step_loglambda: float = 0.25

    def __post_init__(self):
        for name in ("burn_in", "retained", "thin", "step_t"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ConfigError(f"must be an integer, got {value!r}", key=f"mh.{name}")
            if value < (0 if name == "burn_in" else 1):
                raise ConfigError(f"must be positive, got {value}", key=f"mh.{name}")
        if not self.step_loglambda > 0:
            raise ConfigError("must be > 0", key="mh.step_loglambda")

    @property
    def n_sweeps(self):
        return self.burn_in + self.retained * self.thin


def initial_state(prior, n_slots):
    k = prior.min_sleep_slots
    s_lo, s_hi = prior.sleep_bounds(n_slots)
    a_lo, a_hi = prior.awake_bounds(n_slots)
    if prior.model is ModelKind.LOCATION_UNIFORM:
        ts = (s_lo + s_hi) // 2
    else:
        ts = min(max(prior.t_start, s_lo), s_hi)
    span = prior.t_end - prior.t_start
    ta = ts + max(k, span // 2)
    ta = min(max(ta, ts + k, a_lo), a_hi)
    state = ChangePointState(
        t_sleep=ts, t_awake=ta,
        lambda_sleep=prior.a_sleep / prior.b_sleep,
        lambda_awake=prior.a_awake / prior.b_awake,
    )
    if prior.model is ModelKind.HIERARCHICAL:
        mean_hyper = 1.0 / prior.hyper_rate
        state = replace(state, tau=float(prior.sigma_slots), alpha=mean_hyper, beta=mean_hyper)
    return state


def run_mh(series, prior, config=None, seed=0):
    """Single-chain Metropolis-Hastings over change points and rates.

    Each sweep updates, in order, ``t_sleep``, ``t_awake``, ``lambda_sleep``,
    ``lambda_awake`` and, for the hierarchical model, ``tau``, ``alpha`` and
    ``beta``.  Change points take integer random-walk steps of size
    ``1..step_t`` in either direction; positive parameters take Gaussian
    steps in log space, with the log-scale Jacobian in the acceptance ratio.
    After ``burn_in`` sweeps every ``thin``-th state is kept until
    ``retained`` samples exist.

    Parameters
    ----------
    series : SlotSeries or array-like
        Slot counts of a day that is not absent.
    prior : PriorSpec
    config : SamplerConfig, optional
    seed : int, SeedSequence or Generator
        The whole chain is a deterministic function of this seed.

    Returns
    -------
    list of PosteriorSample
    """
    config = config or SamplerConfig()
    counts = np.asarray(getattr(series, "counts", series))
    if counts.sum() == 0:
        raise AbsentSeriesError("refusing to sample an all-zero series")
    n = counts.shape[0]
    target = _LogTarget(counts, prior, getattr(series, "observed", None))
    rng = np.random.default_rng(seed)

    hierarchical = prior.model is ModelKind.HIERARCHICAL
    n_pos = 5 if hierarchical else 2
    n_sweeps = config.n_sweeps
    t_steps = (rng.integers(1, config.step_t + 1, size=(n_sweeps, 2))
               * rng.choice(np.array([-1, 1]), size=(n_sweeps, 2))).tolist()
    log_steps = (rng.standard_normal(size=(n_sweeps, n_pos)) * config.step_loglambda).tolist()
    log_u = np.log(rng.random(size=(n_sweeps, 2 + n_pos))).tolist()

    init = initial_state(prior, n)
    # x = [ts, ta, ls, la, tau, alpha, beta]
    x = [init.t_sleep, init.t_awake, init.lambda_sleep, init.lambda_awake,
         init.tau, init.alpha, init.beta]
    current = target(*x)
    if not math.isfinite(current):
        raise ValueError("initial state has zero posterior density")

    samples = []
    for sweep in range(n_sweeps):
        steps_t, steps_log, us = t_steps[sweep], log_steps[sweep], log_u[sweep]
        for j in range(2):
            old = x[j]
            x[j] = old + steps_t[j]
            proposed = target(*x)
            if proposed != NEG_INF and us[j] < proposed - current:
                current = proposed
            else:
                x[j] = old
        for j in range(n_pos):
            idx = 2 + j
            old = x[idx]
            step = steps_log[j]
            x[idx] = old * math.exp(step)
            proposed = target(*x)
            # log-space walk: q(x'|x)/q(x|x') = x/x', so add log(x'/x) = step
            if proposed != NEG_INF and us[idx] < proposed - current + step:
                current = proposed
            else:
                x[idx] = old
        if sweep >= config.burn_in and (sweep - config.burn_in + 1) % config.thin == 0:
            state = ChangePointState(int(x[0]), int(x[1]), x[2], x[3], *x[4:])
            samples.append(PosteriorSample(state, current))
    return samples


def extract_map(samples):
    """State of the first sample with the largest log joint."""
    if not samples:
        raise ValueError("no samples")
    best = samples[0]
    for s in samples[1:]:
        if s.log_joint > best.log_joint:
            best = s
    return best.state


def rule_based_baseline(series, interval=None, rate_threshold=2):
    """Longest run of slots with at most ``rate_threshold`` events.

    Only slots inside ``interval`` (a :class:`DormInterval`, or the whole
    window when ``None``) are considered.  Returns ``(start, end)`` with
    ``end`` exclusive, or ``None`` if every slot is active.
    """
    counts = np.asarray(getattr(series, "counts", series))
    lo, hi = (0, counts.shape[0]) if interval is None else (interval.start_slot, interval.end_slot)
    best = None
    i = lo
    while i < hi:
        if counts[i] > rate_threshold:
            i += 1
            continue
        j = i
        while j < hi and counts[j] <= rate_threshold:
            j += 1
        if best is None or j - i > best[1] - best[0]:
            best = (i, j)
        i = j
    return best
