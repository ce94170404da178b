import math
from datetime import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import DAY
from wifisleep.exceptions import AbsentSeriesError, ConfigError, PriorUnavailableError
from wifisleep.inference import (ChangePointState, ModelKind, PosteriorSample, PriorSpec,
                                 SamplerConfig, build_prior_spec, extract_map, gamma_logpdf,
                                 initial_state, log_joint, normal_logpdf, poisson_logpmf,
                                 rule_based_baseline, run_mh)
from wifisleep.oracle import exact_map
from wifisleep.preprocess import DormInterval, SlotSeries
from wifisleep.synth import SynthProfile, generate_trace


def test_densities_match_scipy():
    assert poisson_logpmf(3, 2.5) == pytest.approx(stats.poisson.logpmf(3, 2.5))
    assert gamma_logpdf(0.7, 2.5, 1.0) == pytest.approx(stats.gamma.logpdf(0.7, 2.5, scale=1.0))
    assert gamma_logpdf(0.7, 1.0, 3.0) == pytest.approx(stats.gamma.logpdf(0.7, 1.0, scale=1 / 3))
    assert normal_logpdf(20, 24, 12) == pytest.approx(stats.norm.logpdf(20, 24, 12))


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -1.0)])
def test_gamma_domain_errors(args):
    with pytest.raises(ValueError):
        gamma_logpdf(*args)


def test_poisson_domain_errors():
    with pytest.raises(ValueError):
        poisson_logpmf(1, 0.0)
    with pytest.raises(ValueError):
        poisson_logpmf(-1, 1.0)


def _slotwise_log_joint(counts, s, prior, observed=None):
    """Direct per-slot evaluation with scipy, as an independent oracle."""
    n = len(counts)
    observed = np.ones(n, bool) if observed is None else observed
    k = prior.min_sleep_slots
    ll = 0.0
    for t in range(n):
        if observed[t]:
            lam = s.lambda_sleep if s.t_sleep <= t < s.t_awake else s.lambda_awake
            ll += stats.poisson.logpmf(counts[t], lam)
    lp = (stats.gamma.logpdf(s.lambda_sleep, prior.a_sleep, scale=1 / prior.b_sleep)
          + stats.gamma.logpdf(s.lambda_awake, prior.a_awake, scale=1 / prior.b_awake))
    if prior.model is ModelKind.LOCATION_UNIFORM:
        lp -= math.log(prior.t_end - k - prior.t_start + 1) * 2
    elif prior.model is ModelKind.NORMAL:
        lp += (stats.norm.logpdf(s.t_sleep, prior.t_start, prior.sigma_slots)
               + stats.norm.logpdf(s.t_awake, prior.t_end, prior.sigma_slots))
    else:
        sg = np.arange(0, n - k + 1)
        ag = np.arange(k, n + 1)
        ps = stats.norm.pdf(sg, prior.t_start, s.tau)
        pa = stats.norm.pdf(ag, prior.t_end, s.tau)
        lp += math.log(ps[s.t_sleep] / ps.sum()) + math.log(pa[s.t_awake - k] / pa.sum())
        lp += stats.gamma.logpdf(s.tau, s.alpha, scale=1 / s.beta)
        lp += stats.expon.logpdf(s.alpha) + stats.expon.logpdf(s.beta)
    return ll + lp


@pytest.mark.parametrize("model", list(ModelKind))
def test_log_joint_matches_slotwise_oracle(model, rng):
    counts = rng.poisson(1.5, size=96)
    prior = PriorSpec(model, 20, 60) if model is ModelKind.LOCATION_UNIFORM \
        else PriorSpec(model, 24, 56)
    extra = dict(tau=7.5, alpha=1.3, beta=0.4) if model is ModelKind.HIERARCHICAL else {}
    for ts, ta in [(24, 56), (20, 32), (30, 60), (21, 59)]:
        s = ChangePointState(ts, ta, 0.4, 2.2, **extra)
        assert log_joint(counts, s, prior) == pytest.approx(
            _slotwise_log_joint(counts, s, prior), rel=1e-10)


def test_log_joint_skips_unobserved_slots(rng):
    counts = rng.poisson(1.5, size=96)
    counts[70:90] = 0
    observed = np.ones(96, bool)
    observed[70:90] = False
    series = SlotSeries("d", DAY, counts, observed=observed)
    prior = PriorSpec(ModelKind.NORMAL, 24, 56)
    s = ChangePointState(24, 56, 0.5, 2.5)
    assert log_joint(series, s, prior) == pytest.approx(
        _slotwise_log_joint(counts, s, prior, observed))


def test_log_joint_outside_support_is_minus_inf():
    counts = np.ones(96, int)
    prior = PriorSpec(ModelKind.LOCATION_UNIFORM, 20, 60)
    assert log_joint(counts, ChangePointState(19, 50, 1, 1), prior) == -math.inf
    assert log_joint(counts, ChangePointState(30, 41, 1, 1), prior) == -math.inf
    assert log_joint(counts, ChangePointState(30, 61, 1, 1), prior) == -math.inf
    normal = PriorSpec(ModelKind.NORMAL, 24, 56)
    assert log_joint(counts, ChangePointState(90, 97, 1, 1), normal) == -math.inf


def test_prior_spec_validation():
    with pytest.raises(PriorUnavailableError):
        PriorSpec(ModelKind.LOCATION_UNIFORM, 20, 31)
    with pytest.raises(ConfigError):
        PriorSpec(ModelKind.NORMAL, 24, 56, sigma_slots=0)
    with pytest.raises(ValueError):
        PriorSpec("nonsense", 24, 56)


def test_build_prior_spec():
    p = build_prior_spec(ModelKind.NORMAL)
    assert (p.t_start, p.t_end) == (24, 56)
    p = build_prior_spec("hierarchical", bed_time=time(23, 0), wake_time=time(7, 0))
    assert (p.t_start, p.t_end) == (20, 52)
    p = build_prior_spec(ModelKind.LOCATION_UNIFORM, DormInterval(10, 70, "A"))
    assert (p.t_start, p.t_end) == (10, 70)
    assert p.sleep_bounds(96) == (10, 58) and p.awake_bounds(96) == (22, 70)
    with pytest.raises(PriorUnavailableError):
        build_prior_spec(ModelKind.LOCATION_UNIFORM, None)
    with pytest.raises(PriorUnavailableError):
        build_prior_spec(ModelKind.LOCATION_UNIFORM, DormInterval(10, 21, "A"))


@pytest.mark.parametrize("name,value", [("burn_in", -1), ("retained", 0), ("thin", 0),
                                        ("step_t", 0), ("step_loglambda", 0.0),
                                        ("thin", 2.5)])
def test_sampler_config_errors_name_the_key(name, value):
    with pytest.raises(ConfigError) as info:
        SamplerConfig(**{name: value})
    assert info.value.key == f"mh.{name}"


def test_sampler_config_defaults():
    c = SamplerConfig()
    assert (c.burn_in, c.retained, c.thin) == (200, 50, 5)
    assert c.n_sweeps == 450


@pytest.mark.parametrize("model", list(ModelKind))
def test_initial_state_is_in_support(model):
    prior = PriorSpec(model, 20, 60)
    s = initial_state(prior, 96)
    extra = s.tau is not None
    assert extra == (model is ModelKind.HIERARCHICAL)
    assert math.isfinite(log_joint(np.ones(96, int), s, prior))


@pytest.fixture(scope="module")
def day_counts():
    return generate_trace(SynthProfile(), seed=3).days[0].counts


@pytest.mark.parametrize("model", list(ModelKind))
def test_run_mh_shape_and_support(model, day_counts):
    prior = PriorSpec(model, 24, 56) if model is not ModelKind.LOCATION_UNIFORM \
        else PriorSpec(model, 8, 80)
    samples = run_mh(day_counts, prior, seed=1)
    assert len(samples) == 50
    for s in samples:
        st_ = s.state
        assert st_.t_sleep + 12 <= st_.t_awake
        assert st_.lambda_sleep > 0 and st_.lambda_awake > 0
        assert s.log_joint == pytest.approx(log_joint(day_counts, st_, prior))


def test_run_mh_deterministic(day_counts):
    prior = PriorSpec(ModelKind.HIERARCHICAL, 24, 56)
    a = run_mh(day_counts, prior, seed=42)
    b = run_mh(day_counts, prior, seed=42)
    c = run_mh(day_counts, prior, seed=43)
    assert a == b
    assert a != c


def test_run_mh_refuses_all_zero():
    with pytest.raises(AbsentSeriesError):
        run_mh(np.zeros(96, int), PriorSpec(ModelKind.NORMAL, 24, 56))


def test_extract_map_first_maximum():
    states = [ChangePointState(i, i + 12, 1, 1) for i in range(4)]
    samples = [PosteriorSample(s, v) for s, v in zip(states, [-5.0, -1.0, -3.0, -1.0])]
    assert extract_map(samples) is states[1]
    with pytest.raises(ValueError):
        extract_map([])


def test_mh_marginal_matches_exact_posterior():
    """Long chain on a small hourly series against the enumerated posterior."""
    rng = np.random.default_rng(7)
    n, k = 24, 3
    truth = np.r_[rng.poisson(2.5, 6), rng.poisson(0.5, 8), rng.poisson(2.5, 10)]
    series = SlotSeries("d", DAY, truth, slot_minutes=60)
    prior = PriorSpec(ModelKind.NORMAL, 6, 14, sigma_slots=3.0, min_sleep_slots=k)
    config = SamplerConfig(burn_in=500, retained=4000, thin=3, step_t=2)
    samples = run_mh(series, prior, config, seed=11)

    table = exact_map(series, prior).log_posterior_table
    keys = list(table)
    logp = np.array([table[key] for key in keys])
    p = np.exp(logp - logp.max())
    p /= p.sum()
    exact_ts = np.zeros(n + 1)
    for (ts, _), w in zip(keys, p):
        exact_ts[ts] += w
    emp = np.bincount([s.state.t_sleep for s in samples], minlength=n + 1) / len(samples)
    assert 0.5 * np.abs(emp - exact_ts).sum() < 0.1


def test_rule_based_baseline():
    counts = np.full(96, 5)
    counts[30:50] = 1
    counts[60:65] = 0
    assert rule_based_baseline(counts) == (30, 50)
    assert rule_based_baseline(counts, DormInterval(55, 96, "A")) == (60, 65)
    assert rule_based_baseline(np.full(96, 9)) is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 84), st.integers(0, 40), st.floats(0.05, 10), st.floats(0.05, 10))
def test_log_joint_finite_iff_admissible(ts, span, ls, la):
    prior = PriorSpec(ModelKind.NORMAL, 24, 56)
    ta = ts + span
    v = log_joint(np.ones(96, int), ChangePointState(ts, ta, ls, la), prior)
    assert math.isfinite(v) == (span >= 12 and ta <= 96)
