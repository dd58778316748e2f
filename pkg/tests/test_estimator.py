import numpy as np
import pytest
from sklearn.base import clone

from risota import RisFedClassifier
from risota import phase, simulation
from risota.data import synthesize
from risota.exceptions import ConfigurationError
from risota.learning import sgd_step, zeros_model
from risota.rng import stream


@pytest.fixture(scope="module")
def blobs():
    ds = synthesize(4, 30, 6, 1.0, np.random.default_rng(0))
    return ds.features, ds.labels


def small(**kw):
    base = dict(n_clients=4, n_elements=4, n_rounds=3, tau_max=3, random_state=7)
    base.update(kw)
    return RisFedClassifier(**base)


def test_params_round_trip():
    clf = small(learning_rate=0.1)
    params = clf.get_params()
    assert params["learning_rate"] == 0.1 and params["n_elements"] == 4
    twin = clone(clf)
    assert twin.get_params() == params
    twin.set_params(algorithm="no_ris")
    assert twin.algorithm == "no_ris" and clf.algorithm == "roar_fed"


def test_fit_predict_shapes(blobs):
    X, y = blobs
    labels = np.array(["a", "b", "c", "d"])[y]
    clf = small().fit(X, labels, eval_set=(X, labels))
    assert clf.coef_.shape == (4, 6) and clf.intercept_.shape == (4,)
    assert set(clf.predict(X)) <= set(labels)
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert len(clf.round_logs_) == 3 and clf.accuracy_history_.shape == (3,)
    assert 0.0 <= clf.score(X, labels) <= 1.0


@pytest.mark.parametrize("kw", [dict(algorithm="nope"), dict(n_rounds=0), dict(tau_max=0),
                                dict(learning_rate=-1.0), dict(est_var_ratio=-0.1),
                                dict(sca_init="ones")])
def test_bad_params(blobs, kw):
    with pytest.raises(ConfigurationError):
        small(**kw).fit(*blobs)


def test_single_client_reduces_to_local_sgd(blobs):
    X, y = blobs
    ids = np.zeros(len(y), dtype=int)
    for tau_max in (1, 4):
        clf = RisFedClassifier(n_clients=1, n_elements=4, n_rounds=1, tau_max=tau_max,
                               noise_variance=0.0, est_var_ratio=0.0, power=1e30, beta_t=1.0,
                               batch_size=8, learning_rate=0.1, random_state=3)
        clf.fit(X, y, client_ids=ids)
        log = clf.round_logs_[0]
        assert log.tau == [tau_max] and log.clipped == [False]
        rng = stream(3, "sgd", 0, 0)
        w0 = w = zeros_model(6, 4)
        for _ in range(tau_max):
            w, _ = sgd_step(w, X, y, 0.1, rng, 4, 8)
        np.testing.assert_allclose(clf.w_, w0 + (w - w0) / tau_max, atol=1e-12)


def test_determinism(blobs):
    a = small().fit(*blobs)
    b = small().fit(*blobs)
    assert [l.to_dict() for l in a.round_logs_] == [l.to_dict() for l in b.round_logs_]
    np.testing.assert_array_equal(a.w_, b.w_)


def test_noise_change_keeps_fading(blobs):
    a = small(noise_variance=1e-20).fit(*blobs)
    b = small(noise_variance=1e-12).fit(*blobs)
    for la, lb in zip(a.round_logs_, b.round_logs_):
        assert (la.h_ub_min, la.h_ur_max, la.h_rb_max) == (lb.h_ub_min, lb.h_ur_max, lb.h_rb_max)


@pytest.mark.parametrize("algorithm, calls", [("no_ris", 0), ("static_phase", 1),
                                              ("roar_fed", 3)])
def test_phase_design_call_counts(blobs, monkeypatch, algorithm, calls):
    seen = []
    real = phase.sca_optimize

    def counting(g, s, init=None, *args, **kw):
        seen.append(None if init is None else np.array(init))
        return real(g, s, init, *args, **kw)

    monkeypatch.setattr(simulation.phase, "sca_optimize", counting)
    clf = small(algorithm=algorithm).fit(*blobs)
    assert len(seen) == calls
    if algorithm == "static_phase":
        assert seen[0] is not None
        thetas = [l.sca_iterations for l in clf.round_logs_]
        assert thetas[0] > 0 and thetas[1:] == [0, 0]
    if algorithm == "no_ris":
        assert all(l.sca_iterations == 0 for l in clf.round_logs_)


def test_estimated_bound_constants(blobs):
    clf = small(estimate_bounds=True).fit(*blobs)
    c = clf.bound_constants_
    assert c.L > 0 and c.G > 0 and c.sigma2 >= 0 and c.T == 3


def test_perfect_csi_ratio_is_exactly_one(blobs):
    clf = small(noise_variance=0.0, est_var_ratio=0.0, n_rounds=5).fit(*blobs)
    assert all(r == 1 for log in clf.round_logs_ for r in log.ratio)
