"""scikit-learn style estimators over slot-count matrices.

Rows of ``X`` are device-days and columns are slots.  Inference is per row,
so ``fit`` runs it on the training rows (stored in ``change_points_``) and
``predict`` runs it again on whatever rows it is given.  Rows that cannot be
estimated get ``-1`` change points.
"""

from __future__ import annotations

from datetime import date

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from ._validation import check_counts, check_intervals
from .config import RunConfig
from .ensemble import compute_waic, infer_user_day
from .exceptions import AbsentSeriesError, PriorUnavailableError
from .inference import ModelKind, PriorSpec, SamplerConfig, extract_map, run_mh
from .preprocess import DEFAULT_WINDOW_START, MINUTES_PER_DAY, DormInterval, SlotSeries, slot_clock


def _row_seeds(random_state, n):
    rs = check_random_state(random_state)
    root = np.random.SeedSequence(int(rs.randint(0, 2**31 - 1)))
    return root.spawn(n)


def _masks(points, n_slots):
    mask = np.zeros((len(points), n_slots), dtype=np.int8)
    for i, (ts, ta) in enumerate(points):
        if ts >= 0:
            mask[i, ts:ta] = 1
    return mask


class _SleepBase(TransformerMixin, BaseEstimator):

    def _sampler(self):
        return SamplerConfig(self.burn_in, self.retained, self.thin, self.step_t,
                             self.step_loglambda)

    def fit(self, X, y=None, intervals=None):
        """Estimate change points for every row of ``X``.

        Parameters
        ----------
        X : array-like of shape (n_days, n_slots)
            Non-negative integer counts.
        y : ignored
        intervals : sequence of (start, end) or DormInterval, optional
            Per-row dorm interval for the location prior.
        """
        X = check_counts(X)
        self.n_features_in_ = X.shape[1]
        self.change_points_, extras = self._infer(X, intervals)
        for name, value in extras.items():
            setattr(self, name, value)
        return self

    def predict(self, X, intervals=None):
        """``(n_days, 2)`` integer array of ``(t_sleep, t_awake)`` slots."""
        check_is_fitted(self, "n_features_in_")
        X = check_counts(X, self.n_features_in_)
        return self._infer(X, intervals)[0]

    def fit_predict(self, X, y=None, intervals=None):
        return self.fit(X, y, intervals).change_points_

    def transform(self, X, intervals=None):
        """Per-slot sleep indicator, ``(n_days, n_slots)``."""
        points = self.predict(X, intervals)
        return _masks(points, self.n_features_in_)

    def fit_transform(self, X, y=None, intervals=None):
        return _masks(self.fit(X, y, intervals).change_points_, self.n_features_in_)


class ChangePointDetector(_SleepBase):
    """Two change points of a single prior model, by Metropolis-Hastings.

    Parameters
    ----------
    model : {"location_uniform", "normal", "hierarchical"}
    bed_slot, wake_slot : int
        Prior centers of the normal and hierarchical models; also the
        location support for rows without an interval.
    sigma_slots : float
    min_sleep_slots : int
    burn_in, retained, thin, step_t, step_loglambda
        Sampler settings.
    random_state : int, RandomState or None

    Attributes
    ----------
    change_points_ : ndarray of shape (n_days, 2)
    waic_ : ndarray of shape (n_days,)
        NaN for rows that could not be estimated.
    """

    def __init__(self, model="normal", bed_slot=24, wake_slot=56, sigma_slots=12.0,
                 min_sleep_slots=12, burn_in=200, retained=50, thin=5, step_t=4,
                 step_loglambda=0.25, random_state=None):
        self.model = model
        self.bed_slot = bed_slot
        self.wake_slot = wake_slot
        self.sigma_slots = sigma_slots
        self.min_sleep_slots = min_sleep_slots
        self.burn_in = burn_in
        self.retained = retained
        self.thin = thin
        self.step_t = step_t
        self.step_loglambda = step_loglambda
        self.random_state = random_state

    def _infer(self, X, intervals):
        kind = ModelKind(self.model)
        ivs = check_intervals(intervals, X.shape[0], X.shape[1])
        sampler = self._sampler()
        points = np.full((X.shape[0], 2), -1, dtype=np.int64)
        waic = np.full(X.shape[0], np.nan)
        for i, (row, seed) in enumerate(zip(X, _row_seeds(self.random_state, X.shape[0]))):
            lo, hi = ivs[i] or (self.bed_slot, self.wake_slot)
            try:
                prior = PriorSpec(kind, lo, hi, sigma_slots=self.sigma_slots,
                                  min_sleep_slots=self.min_sleep_slots)
                samples = run_mh(row, prior, sampler, seed=seed)
            except (AbsentSeriesError, PriorUnavailableError):
                continue
            best = extract_map(samples)
            points[i] = best.t_sleep, best.t_awake
            waic[i] = compute_waic(row, samples)
        return points, {"waic_": waic}


class SleepEnsemble(_SleepBase):
    """WAIC-weighted average of the three prior models, with absence checks.

    Parameters
    ----------
    mode : {"campus", "home"}
        Home mode drops the location model.
    bed_slot, wake_slot : int
        Prior centers of the normal and hierarchical models.
    min_sleep_slots : int
    absence_min_events : int
        Rows with fewer events are absent (change points ``-1``).
    min_gap_slots : int
        Silent runs at least this long are treated as unobserved; 0 disables.
    burn_in, retained, thin, step_t, step_loglambda
        Sampler settings.
    random_state : int, RandomState or None

    Attributes
    ----------
    change_points_ : ndarray of shape (n_days, 2)
    estimates_ : list of SleepEstimate
    weights_ : ndarray of shape (n_days, 3)
        Model weights in location, normal, hierarchical order; NaN where a
        model did not run.
    """

    def __init__(self, mode="campus", bed_slot=24, wake_slot=56, min_sleep_slots=12,
                 absence_min_events=4, min_gap_slots=16, burn_in=200, retained=50, thin=5,
                 step_t=4, step_loglambda=0.25, random_state=None):
        self.mode = mode
        self.bed_slot = bed_slot
        self.wake_slot = wake_slot
        self.min_sleep_slots = min_sleep_slots
        self.absence_min_events = absence_min_events
        self.min_gap_slots = min_gap_slots
        self.burn_in = burn_in
        self.retained = retained
        self.thin = thin
        self.step_t = step_t
        self.step_loglambda = step_loglambda
        self.random_state = random_state

    def _config(self, n_slots):
        slot_minutes = MINUTES_PER_DAY // n_slots
        clock = lambda s: slot_clock(s, slot_minutes, DEFAULT_WINDOW_START)  # noqa: E731
        return RunConfig(slot_minutes=slot_minutes, min_sleep_slots=self.min_sleep_slots,
                         mode=self.mode, home_bed_time=clock(self.bed_slot),
                         home_wake_time=clock(self.wake_slot), mh=self._sampler(),
                         absence_min_events=self.absence_min_events,
                         absence_min_gap_slots=self.min_gap_slots)

    def _infer(self, X, intervals):
        config = self._config(X.shape[1])
        ivs = check_intervals(intervals, X.shape[0], X.shape[1])
        points = np.full((X.shape[0], 2), -1, dtype=np.int64)
        weights = np.full((X.shape[0], 3), np.nan)
        estimates = []
        seeds = _row_seeds(self.random_state, X.shape[0])
        order = [m.value for m in ModelKind]
        for i, row in enumerate(X):
            series = SlotSeries(f"row-{i}", date(2000, 1, 1), row,
                                slot_minutes=config.slot_minutes)
            dorm = DormInterval(*ivs[i], "") if ivs[i] else None
            seed = int(seeds[i].generate_state(1)[0])
            est = infer_user_day(series, dorm, config, seed=seed)
            estimates.append(est)
            if est.estimated:
                points[i] = est.t_sleep_slot, est.t_awake_slot
                for res in est.per_model:
                    weights[i, order.index(res.name)] = res.weight
        return points, {"estimates_": estimates, "weights_": weights}
