import math

import pytest

import csample


def test_rng_is_reproducible():
    a = csample.RngStream(7, 1)
    b = csample.RngStream(7, 1)
    assert a.normals(5) == b.normals(5)
    assert 0.0 <= a.uniform() < 1.0


def test_generator_mixture():
    g = csample.oned_generator()
    assert g.n_components == 8
    assert g.dim == 1
    assert math.isclose(sum(g.weights), 1.0)
    d = g.to_dict()
    assert csample.GaussianMixture(d).means == g.means


def test_gaussian_peak_density():
    g = csample.GaussianMixture(
        {"structure": "diagonal", "weights": [1.0], "means": [[0.0]], "covariances": [[[1.0]]]}
    )
    assert g.logpdf([0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)


def test_posterior_gradient_matches_differences():
    m = csample.PosteriorModel(csample.oned_generator(), [-1.0], [2.2], csample.identity_operator(1))
    h = 1e-6
    for x in (-3.0, 0.3, 2.5):
        fd = (m.neg_log_posterior([x + h]) - m.neg_log_posterior([x - h])) / (2 * h)
        assert m.grad([x])[0] == pytest.approx(fd, rel=1e-5, abs=1e-7)
    assert m.log_likelihood([-1.0]) == pytest.approx(-0.5 * math.log(2 * math.pi * 2.2), abs=1e-12)


def test_blur_adjoint():
    op = csample.gaussian_blur(6, 7, 5, 1.5)
    r = csample.RngStream(3)
    x, v = r.normals(42), r.normals(42)
    lhs = sum(a * b for a, b in zip(op.apply(x), v))
    rhs = sum(a * b for a, b in zip(x, op.adjoint([0.0] * 42, v)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_cost_model_plateau():
    assert csample.predict_cost(p=4, n_c=7, n_ens=1000, n_var=10)["speedup"] == 4.0
    r = csample.predict_cost(p=16, n_c=7, n_ens=1000, n_var=10)
    assert r["speedup"] == 7.0
    assert r["efficiency"] == 7.0 / 16.0


def test_tikhonov_two_by_two():
    op = csample.linear_operator([[1.0, 0.0], [0.0, 2.0]])
    x, ok = csample.solve_tikhonov(op, [1.0, 1.0], 1.0)
    assert ok
    assert x == pytest.approx([0.5, 0.4], abs=1e-6)


def test_em_fit_single_component():
    r = csample.RngStream(11)
    samples = [[2.0 + 0.5 * z] for z in r.normals(400)]
    g, ll, trace, converged = csample.em_fit(samples, 1)
    mean = sum(s[0] for s in samples) / len(samples)
    assert g.means[0][0] == pytest.approx(mean, abs=1e-12)
    assert all(b >= a - 1e-10 for a, b in zip(trace, trace[1:]))


def test_config_errors_are_typed():
    with pytest.raises(csample.ConfigError):
        csample.run_experiment({"experiment": "oned", "not_a_key": 1})
    assert csample.default_config("oned")["sampler"]["hmc_trajectory"] == 5.0


def test_em_fit_experiment_runs(tmp_path):
    cfg = csample.default_config("em-fit")
    cfg["em_fit"]["samples"] = 200
    cfg["gmm"]["max_components"] = 3
    cfg["output_dir"] = str(tmp_path)
    summary = csample.run_experiment(cfg)
    assert 1 <= summary["n_c_selected"] <= 3
    assert (tmp_path / "summary.json").exists()
