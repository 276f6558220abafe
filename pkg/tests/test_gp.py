import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlattack.gp import (
    AcquisitionConfig,
    ConditioningError,
    GaussianProcessSurrogate,
    GPState,
    KernelParams,
    acquisition,
    acquisition_batch,
    gp_fit,
    gp_posterior,
    gp_update,
    kernel_eval,
    log_marginal_likelihood,
    refit_lengthscale,
    ucb_score,
)

from .oracles import dense_gp_posterior


def test_kernel_identical_points():
    p = KernelParams(0.7, 1.0, 0.0)
    assert kernel_eval([0.3, 0.1], [0.3, 0.1], p) == 1.0


def test_kernel_decays_with_distance():
    p = KernelParams(1.0, 1.0, 0.0)
    assert kernel_eval([0.0], [50.0], p) < 1e-300


def test_kernel_unit_distance():
    p = KernelParams(1.0, 1.0, 0.0)
    assert kernel_eval([0.0], [1.0], p) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert kernel_eval([0.0], [1.0], p) == pytest.approx(0.60653, abs=1e-5)


def test_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval([0.0, 1.0], [1.0], KernelParams())


def test_kernel_params_validation():
    with pytest.raises(ValueError):
        KernelParams(lengthscale=0.0)
    with pytest.raises(ValueError):
        KernelParams(signal_variance=-1.0)
    with pytest.raises(ValueError):
        KernelParams(noise_variance=-1e-3)


def test_update_cardinality():
    s = gp_update(GPState(KernelParams(1.0)), [0.2, 0.4], 0.5)
    assert s.n_observations == 1
    assert s.inputs.shape == (1, 2)


def test_update_returns_new_state():
    s0 = gp_update(GPState(KernelParams(1.0)), [0.2], 0.5)
    s1 = gp_update(s0, [0.7], 0.1)
    assert s0.n_observations == 1 and s1.n_observations == 2


def test_duplicate_conflicting_noiseless_raises():
    s = gp_update(GPState(KernelParams(1.0, 1.0, 0.0)), [0.5], 0.0)
    with pytest.raises(ConditioningError):
        gp_update(s, [0.5], 1.0)


def test_update_rejects_out_of_range_target():
    with pytest.raises(ValueError):
        gp_update(GPState(KernelParams()), [0.1], 1.5)


def test_two_point_cholesky_matches_hand_factor():
    ell, noise = 0.8, 1e-3
    s = gp_fit(KernelParams(ell, 1.0, noise), [[0.1], [0.6]], [0.2, 0.9])
    k = math.exp(-0.5 * (0.5 / ell) ** 2)
    a = 1.0 + noise
    L_hand = np.array([[math.sqrt(a), 0.0], [k / math.sqrt(a), math.sqrt(a - k * k / a)]])
    assert np.allclose(s.chol, L_hand, atol=1e-12)
    K = np.array([[a, k], [k, a]])
    assert np.allclose(s.chol @ s.chol.T, K, atol=1e-10)


def test_empty_posterior_is_prior():
    post = gp_posterior(GPState(KernelParams(1.0, 1.0, 1e-4)), [0.3])
    assert post.mean == 0.0 and post.variance == 1.0


def test_noiseless_interpolation_at_observed_point():
    s = gp_fit(KernelParams(0.5, 1.0, 0.0), [[0.0], [0.4], [1.0]], [0.3, 0.8, 0.1])
    post = gp_posterior(s, [0.4])
    assert post.mean == pytest.approx(0.8, abs=1e-8)
    assert post.variance == pytest.approx(0.0, abs=1e-8)


def test_two_point_posterior_against_explicit_solve():
    s = gp_fit(KernelParams(1.0, 1.0, 1e-6), [[0.0], [1.0]], [1.0, 0.0])
    post = gp_posterior(s, [0.5])
    # 2x2 inverse by hand
    a = 1.0 + 1e-6
    b = math.exp(-0.5)
    det = a * a - b * b
    kq = math.exp(-0.125)
    w0 = (a * kq - b * kq) / det  # row of (K^-1 k*) for both entries (symmetric query)
    mean = w0 * 1.0
    var = 1.0 - (kq * w0 + kq * w0)
    assert post.mean == pytest.approx(mean, abs=1e-10)
    assert post.variance == pytest.approx(var, abs=1e-10)


def test_acquisition_paper_literal_example():
    cfg = AcquisitionConfig(2.0, "paper-literal")
    assert ucb_score(0.5, 0.1, cfg) == pytest.approx(0.7)


def test_acquisition_zero_sigma_minimization():
    cfg = AcquisitionConfig(2.0, "minimization-consistent")
    assert ucb_score(0.4, 0.0, cfg) == -0.4


def test_acquisition_matches_posterior():
    s = gp_fit(KernelParams(0.5, 1.0, 1e-4), [[0.1, 0.2], [0.6, 0.9]], [0.9, 0.2])
    for orient in ("paper-literal", "minimization-consistent"):
        cfg = AcquisitionConfig(1.5, orient)
        post = gp_posterior(s, [0.3, 0.3])
        expected = post.mean + 1.5 * post.std if orient == "paper-literal" else 1.5 * post.std - post.mean
        assert acquisition(s, [0.3, 0.3], cfg) == pytest.approx(expected, abs=1e-14)


def test_kappa_zero_argmax_is_argmin_mean():
    rng = np.random.default_rng(3)
    s = gp_fit(KernelParams(0.4, 1.0, 1e-4), rng.random((6, 2)), rng.random(6))
    cand = rng.random((40, 2))
    cfg = AcquisitionConfig(0.0, "minimization-consistent")
    means = np.array([gp_posterior(s, c).mean for c in cand])
    assert np.argmax(acquisition_batch(s, cand, cfg)) == np.argmin(means)


def test_acquisition_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(-1.0)
    with pytest.raises(ValueError):
        AcquisitionConfig(1.0, "sideways")


def _gp_instance(draw):
    d = draw(st.integers(1, 5))
    n = draw(st.integers(0, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    params = KernelParams(
        lengthscale=float(rng.uniform(0.2, 2.0)),
        signal_variance=float(rng.uniform(0.5, 2.0)),
        noise_variance=float(rng.uniform(1e-3, 1e-1)),
    )
    return params, rng.random((n, d)), rng.random(n), rng.random((3, d))


gp_instances = st.composite(_gp_instance)


@settings(max_examples=60, deadline=None)
@given(gp_instances())
def test_posterior_matches_dense_solve(inst):
    params, X, y, Q = inst
    s = gp_fit(params, X, y) if len(y) else GPState(params)
    for q in Q:
        post = gp_posterior(s, q)
        m, v = dense_gp_posterior(X, y, q, params.lengthscale, params.signal_variance, params.noise_variance)
        assert post.mean == pytest.approx(m, abs=1e-8)
        assert post.variance == pytest.approx(v, abs=1e-8)
        assert 0.0 <= post.variance <= params.signal_variance + params.noise_variance + 1e-9


@settings(max_examples=40, deadline=None)
@given(gp_instances())
def test_noiseless_interpolation_property(inst):
    params, X, y, _ = inst
    if len(y) == 0:
        return
    # Well-separated inputs keep the noiseless Gram matrix invertible.
    X = X[:1] if len(X) == 1 else np.arange(len(X))[:, None] * np.ones((1, X.shape[1]))
    p0 = KernelParams(0.3, params.signal_variance, 0.0)
    s = gp_fit(p0, X, y)
    for xi, yi in zip(X, y):
        assert gp_posterior(s, xi).mean == pytest.approx(yi, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(gp_instances(), st.floats(0.0, 1.0))
def test_variance_contraction(inst, y_new):
    params, X, y, Q = inst
    s = gp_fit(params, X, y) if len(y) else GPState(params)
    x = Q[0]
    before = gp_posterior(s, x).variance
    after = gp_posterior(gp_update(s, x, y_new), x).variance
    assert after <= before + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.integers(0, 1000), st.floats(0.1, 3.0))
def test_kernel_symmetry(a, seed, ell):
    b = np.random.default_rng(seed).uniform(-5, 5, len(a))
    p = KernelParams(ell, 1.3, 0.0)
    assert kernel_eval(a, b, p) == kernel_eval(b, a, p)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 5.0))
def test_orientation_contract_equal_variances(seed, kappa):
    # Equal posterior variances: candidates equidistant from the only observation.
    rng = np.random.default_rng(seed)
    s = gp_fit(KernelParams(0.7, 1.0, 1e-4), [[0.0, 0.0]], [rng.random()])
    angles = rng.uniform(0, 2 * np.pi, 8)
    cand = 0.5 * np.column_stack([np.cos(angles), np.sin(angles)])
    means = np.array([gp_posterior(s, c).mean for c in cand])
    scores = acquisition_batch(s, cand, AcquisitionConfig(kappa, "minimization-consistent"))
    assert means[np.argmax(scores)] == pytest.approx(means.min(), abs=1e-12)


def test_surrogate_estimator_api():
    rng = np.random.default_rng(0)
    X, y = rng.random((8, 3)), rng.random(8)
    gp = GaussianProcessSurrogate(lengthscale=0.5).fit(X, y)
    mean, std = gp.predict(X[:2], return_std=True)
    assert mean.shape == (2,) and np.all(std >= 0)
    assert gp.get_params()["lengthscale"] == 0.5
    inc = GaussianProcessSurrogate(lengthscale=0.5)
    for xi, yi in zip(X, y):
        inc.partial_fit(xi, yi)
    assert np.allclose(inc.predict(X), gp.predict(X), atol=1e-12)
    assert gp.acquisition(X[:3]).shape == (3,)


def test_log_marginal_likelihood_matches_dense_formula():
    rng = np.random.default_rng(11)
    X, y = rng.random((6, 2)), rng.random(6)
    p = KernelParams(0.6, 1.2, 1e-2)
    K = np.array([[kernel_eval(a, b, p) for b in X] for a in X]) + 1e-2 * np.eye(6)
    _, logdet = np.linalg.slogdet(K)
    expected = -0.5 * y @ np.linalg.solve(K, y) - 0.5 * logdet - 3 * math.log(2 * math.pi)
    assert log_marginal_likelihood(gp_fit(p, X, y)) == pytest.approx(expected, abs=1e-9)


def test_refit_lengthscale_never_lowers_likelihood():
    rng = np.random.default_rng(12)
    X = rng.random((15, 1))
    y = 0.5 + 0.4 * np.sin(3 * X[:, 0])
    s = gp_fit(KernelParams(5.0, 1.0, 1e-4), X, y)
    r = refit_lengthscale(s)
    assert log_marginal_likelihood(r) >= log_marginal_likelihood(s)
    assert r.params.lengthscale != 5.0 and r.n_observations == 15


def test_refit_on_tiny_state_is_noop():
    s = gp_update(GPState(KernelParams(1.0)), [0.2], 0.5)
    assert refit_lengthscale(s) is s
