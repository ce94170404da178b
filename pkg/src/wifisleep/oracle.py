"""Exact posterior over change points by enumeration.

Both rates are integrated out in closed form (gamma-Poisson conjugacy), so
for the location and normal priors the posterior over ``(t_sleep, t_awake)``
is available exactly.  Used to check the sampler.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .exceptions import UnsupportedModelError
from .inference import ModelKind, normal_logpdf


def segment_log_marginal(counts, a, b):
    """Log marginal likelihood of Poisson counts under a Gamma(a, b) rate.

    ``counts`` may be a flat sequence or a list of segments that share one
    rate (the two awake segments, for instance).
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"gamma shape and rate must be positive, got {a}, {b}")
    if len(counts) and not np.isscalar(counts[0]):
        parts = [np.asarray(c, dtype=np.int64).ravel() for c in counts]
        counts = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    w = np.asarray(counts, dtype=np.int64)
    return _log_marginal(int(w.sum()), int(w.size), float(gammaln(w + 1.0).sum()), a, b)


def _log_marginal(total, n, log_fact, a, b):
    return (math.lgamma(a + total) - math.lgamma(a) + a * math.log(b)
            - (a + total) * math.log(b + n) - log_fact)


@dataclass
class EnumerationResult:
    map_t_sleep: int
    map_t_awake: int
    log_posterior_table: dict = field(repr=False)

    @property
    def map_pair(self):
        return self.map_t_sleep, self.map_t_awake

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_sleep", "t_awake", "log_posterior"])
            for (ts, ta), v in sorted(self.log_posterior_table.items()):
                writer.writerow([ts, ta, repr(v)])


def exact_map(series, prior):
    """Enumerate every admissible ``(t_sleep, t_awake)`` pair.

    Ties in the unnormalized log posterior go to the lexicographically
    smallest pair.  Unobserved slots of the series are skipped.  The
    hierarchical prior is not supported.
    """
    if prior.model is ModelKind.HIERARCHICAL:
        raise UnsupportedModelError("no closed-form marginal for the hierarchical prior")
    counts = np.asarray(getattr(series, "counts", series), dtype=np.int64)
    n = counts.shape[0]
    observed = getattr(series, "observed", None)
    if observed is None:
        observed = np.ones(n, dtype=bool)
    counts = np.where(observed, counts, 0)
    cum_obs = [0] + np.cumsum(observed).tolist()
    cum = [0] + np.cumsum(counts).tolist()
    cum_lf = [0.0] + np.cumsum(gammaln(counts + 1.0)).tolist()
    k = prior.min_sleep_slots
    s_lo, s_hi = prior.sleep_bounds(n)
    a_lo, a_hi = prior.awake_bounds(n)
    uniform = prior.model is ModelKind.LOCATION_UNIFORM
    if uniform:
        log_prior_const = -math.log(s_hi - s_lo + 1) - math.log(a_hi - a_lo + 1)

    table = {}
    best, best_val = None, -math.inf
    for ts in range(s_lo, s_hi + 1):
        for ta in range(max(ts + k, a_lo), a_hi + 1):
            w_sleep = cum[ta] - cum[ts]
            lf_sleep = cum_lf[ta] - cum_lf[ts]
            n_sleep = cum_obs[ta] - cum_obs[ts]
            val = (_log_marginal(w_sleep, n_sleep, lf_sleep, prior.a_sleep, prior.b_sleep)
                   + _log_marginal(cum[n] - w_sleep, cum_obs[n] - n_sleep, cum_lf[n] - lf_sleep,
                                   prior.a_awake, prior.b_awake))
            if uniform:
                val += log_prior_const
            else:
                val += (normal_logpdf(ts, prior.t_start, prior.sigma_slots)
                        + normal_logpdf(ta, prior.t_end, prior.sigma_slots))
            table[(ts, ta)] = val
            if val > best_val:
                best, best_val = (ts, ta), val
    return EnumerationResult(best[0], best[1], table)
