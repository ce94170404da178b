import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from wifisleep._validation import check_counts, check_intervals
from wifisleep.estimators import ChangePointDetector, SleepEnsemble
from wifisleep.preprocess import DormInterval
from wifisleep.synth import SynthProfile, generate_trace


@pytest.fixture(scope="module")
def X():
    trace = generate_trace(SynthProfile(days=4), 17)
    return np.array([d.counts for d in trace.days])


def test_check_counts():
    assert check_counts(np.ones(96)).shape == (1, 96)
    assert check_counts([[1] * 48]).dtype == np.int64
    for bad in ([[-1] * 96], [[0.5] * 96], [[1] * 95], [[np.nan] * 96]):
        with pytest.raises(ValueError):
            check_counts(bad)
    with pytest.raises(ValueError):
        check_counts(np.ones((2, 96)), n_slots=48)


def test_check_intervals():
    assert check_intervals(None, 2, 96) == [None, None]
    assert check_intervals([(1, 20), DormInterval(3, 40, "A")], 2, 96) == [(1, 20), (3, 40)]
    with pytest.raises(ValueError):
        check_intervals([(1, 20)], 2, 96)
    with pytest.raises(ValueError):
        check_intervals([(30, 20)], 1, 96)


@pytest.mark.parametrize("cls", [ChangePointDetector, SleepEnsemble])
def test_params_round_trip(cls):
    est = cls(random_state=3, burn_in=50)
    params = est.get_params()
    assert params["random_state"] == 3 and params["burn_in"] == 50
    copy = clone(est)
    assert copy.get_params() == params
    copy.set_params(thin=2)
    assert copy.thin == 2 and est.thin == 5


@pytest.mark.parametrize("cls", [ChangePointDetector, SleepEnsemble])
def test_predict_before_fit(cls, X):
    with pytest.raises(NotFittedError):
        cls().predict(X)


@pytest.mark.parametrize("est", [ChangePointDetector(random_state=0),
                                 ChangePointDetector("hierarchical", random_state=0),
                                 SleepEnsemble(random_state=0)])
def test_fit_predict_transform(est, X):
    points = est.fit_predict(X)
    assert points.shape == (4, 2)
    assert np.all(points[:, 1] - points[:, 0] >= 12)
    assert np.array_equal(est.predict(X), points)
    mask = est.transform(X)
    assert mask.shape == X.shape
    assert np.array_equal(mask.sum(axis=1), points[:, 1] - points[:, 0])
    assert np.array_equal(est.fit_transform(X), mask)


def test_detector_location_uses_intervals(X):
    det = ChangePointDetector("location_uniform", random_state=0)
    points = det.fit_predict(X, intervals=[(30, 70)] * 4)
    assert np.all(points[:, 0] >= 30) and np.all(points[:, 1] <= 70)
    assert np.all(np.isfinite(det.waic_))


def test_unestimable_rows_flagged():
    X = np.zeros((2, 96), dtype=int)
    X[1, :10] = 3
    det = ChangePointDetector(random_state=0).fit(X)
    assert det.change_points_[0].tolist() == [-1, -1] and np.isnan(det.waic_[0])
    ens = SleepEnsemble(random_state=0).fit(X)
    assert ens.change_points_[0].tolist() == [-1, -1]
    assert ens.estimates_[0].status.value == "absent"
    assert ens.transform(X)[0].sum() == 0


def test_ensemble_weights(X):
    ens = SleepEnsemble(random_state=1).fit(X, intervals=[(8, 96)] * 4)
    assert ens.weights_.shape == (4, 3)
    assert np.allclose(ens.weights_.sum(axis=1), 1.0)
    ens = SleepEnsemble(random_state=1).fit(X)
    assert np.all(np.isnan(ens.weights_[:, 0]))
    home = SleepEnsemble(mode="home", bed_slot=20, wake_slot=52, random_state=1).fit(X)
    assert np.all(np.isnan(home.weights_[:, 0]))


def test_random_state_controls_output(X):
    a = SleepEnsemble(random_state=5).fit_predict(X)
    b = SleepEnsemble(random_state=5).fit_predict(X)
    assert np.array_equal(a, b)


def test_works_inside_pipeline(X):
    pipe = make_pipeline(ChangePointDetector(random_state=0))
    assert pipe.fit_transform(X).shape == X.shape
