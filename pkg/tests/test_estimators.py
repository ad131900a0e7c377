import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from topoforge import RandomSearchDesigner, RelaxationDesigner
from topoforge._validation import check_times, check_waveform
from topoforge.exceptions import ModelError, SearchError
from topoforge.model import DesignModel, Mode, ModeTag, generate_grid
from topoforge.simulator import SimConfig, transient

SIM = SimConfig(t_end=0.01, dt=2.5e-4)


@pytest.fixture(scope="module")
def series_data():
    topo = generate_grid(1, 3)
    w = transient(DesignModel(topo, (Mode(ModeTag.RESISTOR, 1.0), Mode(ModeTag.CAPACITOR, 1e-2))), SIM)
    return w.times, w.samples


def test_check_times():
    assert check_times(np.arange(5) * 0.1).shape == (5,)
    assert check_times((np.arange(5) * 0.1).reshape(-1, 1)).shape == (5,)
    with pytest.raises(ModelError):
        check_times([0.0, 0.1, 0.3])
    with pytest.raises(ModelError):
        check_times([1.0, 2.0, 3.0])
    with pytest.raises(ModelError):
        check_times(np.zeros((3, 2)))


def test_check_waveform_lengths():
    with pytest.raises(ValueError):
        check_waveform([0.0, 1.0, 2.0], [1.0, 2.0])
    w = check_waveform([0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
    assert w.dt == 0.5


def test_params_roundtrip():
    est = RelaxationDesigner(grid=(2, 2), max_outer=4, random_state=3)
    p = est.get_params()
    assert p["grid"] == (2, 2) and p["max_outer"] == 4
    assert clone(est).get_params() == p
    est.set_params(delta=3.0)
    assert est.delta == 3.0


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        RelaxationDesigner().predict([0.0, 1.0])


def test_relaxation_designer_fit_predict(series_data):
    X, y = series_data
    est = RelaxationDesigner(grid=(1, 3), max_outer=2, max_evaluations=300, random_state=0).fit(X, y)
    assert est.n_features_in_ == 1
    assert est.cost_ <= est.trace_.initial_cost
    pred = est.predict(X)
    assert pred.shape == y.shape
    assert np.mean((pred - y) ** 2) == pytest.approx(est.cost_, rel=1e-6, abs=1e-12)
    assert est.score(X.reshape(-1, 1), y) <= 1.0
    assert set(est.counts()) == {"R", "L", "C"}


def test_search_designer_fit(series_data):
    X, y = series_data
    est = RandomSearchDesigner(grid=(1, 3), n_s=40, n_o=20, c_th_relative=1e-2, max_evaluations=300,
                               random_state=1).fit(X, y)
    assert est.cost_ <= 1e-2 * np.mean(y ** 2)
    assert est.design_.is_discrete
    assert est.predict(X).shape == y.shape


def test_search_designer_unreachable_threshold(series_data):
    X, y = series_data
    est = RandomSearchDesigner(grid=(1, 2), n_s=5, n_o=1, c_th=1e-30, max_evaluations=20)
    with pytest.raises(SearchError):
        est.fit(X, y)
