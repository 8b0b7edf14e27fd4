import math

import numpy as np
import pytest

import isogplvm as ig


def test_distances_and_persistence():
    sr = ig.gen_swiss_roll(80, seed=2)
    assert sr["points"].shape == (80, 3)
    d = ig.euclidean_distances(sr["points"])
    assert d.shape == (80, 80)
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0.0)
    events = ig.persistence(d)
    assert len(events) == 79
    assert events[-1][1] == 1
    eps = ig.suggest_eps(d, 1, 1.0)
    assert np.isfinite(ig.graph_distances(d, eps)).all()


def test_invalid_distance_matrix_raises():
    with pytest.raises(ValueError):
        ig.classical_mds(np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_mds_recovers_a_plane():
    pl = ig.gen_plane(30, seed=1)
    d = ig.euclidean_distances(pl["points"])
    z = ig.classical_mds(d, 2)
    assert ig.stress(d, z) < 1e-8


def test_nakagami_rayleigh():
    p = ig.NakagamiParams(1.0, 2.0)
    s = 0.8
    assert ig.nakagami_log_survival(s, p) == pytest.approx(-s * s / 2.0, abs=1e-12)
    assert math.exp(ig.nakagami_log_pdf(s, p)) == pytest.approx(s * math.exp(-s * s / 2.0), rel=1e-12)
    x = np.asarray(ig.nakagami_sample(ig.NakagamiParams(2.0, 3.0), 50000, seed=1)) ** 2
    est = ig.nakagami_estimate(x.mean(), x.var(ddof=1))
    assert est.m == pytest.approx(2.0, rel=0.05)
    assert est.omega == pytest.approx(3.0, rel=0.05)


def test_fit_roundtrip_and_geometry():
    pl = ig.gen_plane(30, seed=1)
    d = ig.euclidean_distances(pl["points"])
    cfg = ig.ModelConfig()
    cfg.eps = ig.suggest_eps(d, 1, 1.5)
    cfg.epochs = 10
    cfg.inducing = 10
    rep = ig.fit(d, cfg)
    assert rep.mu.shape == (30, 2)
    assert len(rep.elbo_trace) == 10
    assert all(np.isfinite(rep.elbo_trace))
    again = ig.fit(d, cfg)
    assert rep.to_json() == again.to_json()
    back = ig.FitReport.from_json(rep.to_json())
    assert np.array_equal(back.mu, rep.mu)

    a, b = rep.mu[0], rep.mu[5]
    pts, length = ig.geodesic(rep, a, b, segments=8)
    assert pts.shape == (9, 2)
    assert length > 0.0
    _, zero = ig.geodesic(rep, a, a)
    assert zero == 0.0
    grid = ig.magnification_grid(rep, rep.mu.min(0), rep.mu.max(0), [4, 3], n_mc=3)
    assert grid.shape == (12,) and np.all(grid > 0.0)


def test_config_json():
    cfg = ig.ModelConfig.from_json('{"eps": 0.5, "inducing": 12}')
    assert cfg.eps == 0.5 and cfg.inducing == 12
    with pytest.raises(ValueError):
        ig.ModelConfig.from_json('{"epochs": 3}')
