import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisa.icm import (IcmConfig, Mode, build_context, build_state, context_gate, correct,
                      corrected_prediction, icgp_correction, icgp_sample, icnw_correction,
                      icnw_weights, latent_kernel)

GP = IcmConfig(epsilon=1.0, sigma2=1e-2, mode=Mode.ICGP)
NW = IcmConfig(epsilon=1.0, mode=Mode.ICNW)


def state(Z, res, zq, cfg, Q=None, q=None):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    res = np.atleast_2d(np.asarray(res, dtype=float))
    Q = np.zeros_like(res) if Q is None else np.asarray(Q, dtype=float)
    q = np.zeros(res.shape[1]) if q is None else np.asarray(q, dtype=float)
    return build_context(Z, Q + res, Q, cfg, np.asarray(zq, dtype=float), q)


def random_state(seed, cfg, C=None):
    rng = np.random.default_rng(seed)
    C = rng.integers(1, 31) if C is None else C
    r, D = rng.integers(1, 6), rng.integers(1, 5)
    return state(rng.normal(size=(C, r)), rng.normal(size=(C, D)), rng.normal(size=r), cfg,
                 rng.normal(size=(C, D)), rng.normal(size=D))


def test_config_validation():
    for bad in (dict(temperature=0.0), dict(beta=-1.0), dict(tau2=0.0), dict(gain=-1.0),
                dict(sigma2=-1.0), dict(epsilon=0.0)):
        with pytest.raises(ValueError):
            IcmConfig(**bad)
    with pytest.raises(ValueError):
        IcmConfig().length2


def test_latent_kernel_values():
    cfg = IcmConfig(beta=1.0, epsilon=1.0)
    z = np.array([0.3, -1.0])
    assert latent_kernel(z, z, cfg) == 1.0
    assert latent_kernel([0.0], [1.0], cfg) == pytest.approx(math.exp(-1))
    hot = replace(cfg, temperature=2.0)
    assert latent_kernel([0.0], [1.0], hot) > latent_kernel([0.0], [1.0], cfg)
    with pytest.raises(ValueError):
        latent_kernel([0.0], [1.0, 2.0], cfg)


def test_build_state_from_prefix(lorenz_models):
    enc, dec, _, test = lorenz_models
    L = enc.window_shape[0]
    s0 = build_state(test[:L], L, enc, dec, NW)
    assert s0.C == 0 and s0.residuals.shape == (0, 3)
    s1 = build_state(test[:L + 1], L, enc, dec, GP)
    q = dec.weights.T @ np.exp(-np.sum((dec.train_latents - s1.context_latents[0]) ** 2, 1)
                                / dec.kernel.epsilon)
    assert np.allclose(s1.residuals[0], test[L] - q, atol=1e-12)
    assert np.array_equal(s1.residuals, s1.targets - s1.context_preds)
    assert s1.baseline_preds.shape == (2, 3)


def test_zero_residuals_give_zero_correction(rng):
    Z = rng.normal(size=(5, 2))
    for cfg in (GP, NW):
        s = state(Z, np.zeros((5, 3)), rng.normal(size=2), cfg, Q=rng.normal(size=(5, 3)))
        assert np.all(correct(s, cfg).delta == 0)


def test_icgp_single_context_closed_form():
    s = state([[0.0]], [[2.0, -1.0]], [0.5], GP)
    delta, s2, gate = icgp_correction(s, GP)
    k = math.exp(-0.25)
    assert np.allclose(delta, k * np.array([2.0, -1.0]) / 1.01, atol=1e-14)
    assert s2 == pytest.approx(1 - k * k / 1.01, abs=1e-14)
    assert gate == pytest.approx(1.0 / (1.0 + s2))


def test_icgp_prior_reversion_and_empty_context():
    s = state([[0.0, 0.0]], [[1.0]], [50.0, 50.0], GP)
    delta, s2, gate = icgp_correction(s, GP)
    assert np.allclose(delta, 0.0) and s2 == 1.0 and gate == pytest.approx(0.5)
    empty = build_context(np.zeros((0, 2)), np.zeros((0, 1)), np.zeros((0, 1)), GP, [0, 0], [3.0])
    assert icgp_correction(empty, GP) == (pytest.approx(np.zeros(1)), 1.0, 0.5)


def test_icgp_interpolates_without_noise():
    cfg = replace(GP, sigma2=0.0)
    Z = [[0.0], [10.0], [20.0]]
    s = state(Z, [[1.0], [2.0], [3.0]], [10.0], cfg)
    delta, s2, gate = icgp_correction(s, cfg)
    assert delta[0] == pytest.approx(2.0, abs=1e-12)
    assert s2 == pytest.approx(0.0, abs=1e-12) and gate == pytest.approx(1.0)


@given(st.integers(0, 2**31 - 1))
def test_icgp_matches_dense_solve(seed):
    s = random_state(seed, GP)
    delta, s2, _ = icgp_correction(s, GP)
    d2 = lambda a, b: np.sum((a - b) ** 2)  # noqa: E731
    Z = s.context_latents
    K = np.array([[math.exp(-d2(a, b)) for b in Z] for a in Z]) + GP.sigma2 * np.eye(len(Z))
    k = np.array([math.exp(-d2(s.query_latent, a)) for a in Z])
    assert np.allclose(delta, k @ np.linalg.solve(K, s.residuals), rtol=0, atol=1e-10)
    ref = min(max(1 - k @ np.linalg.solve(K, k), 0.0), 1.0)
    assert s2 == pytest.approx(ref, abs=1e-10)


def test_icgp_sampling_moments():
    s = random_state(3, GP, C=6)
    delta, s2, _ = icgp_correction(s, GP)
    n = 100_000
    rng = np.random.default_rng(0)
    draws = np.array([icgp_sample(s, GP, rng) for _ in range(n)])
    var = s2 + GP.sigma2
    assert np.all(np.abs(draws.mean(0) - delta) <= 3 * math.sqrt(var / n))
    assert np.allclose(draws.var(0), var, rtol=0.05)


def test_icgp_sampling_edge_cases():
    cfg = replace(GP, sigma2=0.0)
    s = state([[0.0], [9.0]], [[1.0], [2.0]], [0.0], cfg)
    assert np.allclose(icgp_sample(s, cfg, 1), icgp_correction(s, cfg)[0], atol=1e-7)
    s = random_state(1, GP)
    assert np.array_equal(icgp_sample(s, GP, 42), icgp_sample(s, GP, 42))


def test_icnw_equidistant_uniform_and_single():
    s = state([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], np.arange(4.0)[:, None], [0, 0], NW)
    w, deg = icnw_weights(s, NW)
    assert np.allclose(w, 0.25, atol=1e-15) and not deg
    s1 = state([[5.0]], [[3.0]], [0.0], NW)
    delta, w1 = icnw_correction(s1, NW)
    assert w1.tolist() == [1.0] and delta[0] == 3.0


def test_icnw_two_term_softmax():
    cfg = IcmConfig(beta=2.0, epsilon=3.0)
    s = state([[1.0], [2.0]], [[1.0], [-1.0]], [0.0], cfg)
    w, _ = icnw_weights(s, cfg)
    a, b = math.exp(-2 * 1 / 3), math.exp(-2 * 4 / 3)
    assert np.allclose(w, [a / (a + b), b / (a + b)], rtol=0, atol=1e-15)


@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_icnw_weights_are_stochastic(seed, temperature):
    cfg = replace(NW, temperature=temperature)
    s = random_state(seed, cfg)
    w, _ = icnw_weights(s, cfg)
    assert np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-12
    # convex hull of the per-context corrected predictions
    out = corrected_prediction(s, cfg)
    g = context_gate(s.C, cfg.k0)
    cands = s.query_pred + g * s.residuals
    assert np.all(out >= cands.min(0) - 1e-12) and np.all(out <= cands.max(0) + 1e-12)


def test_icnw_temperature_limits():
    s = random_state(11, NW, C=12)
    w, _ = icnw_weights(s, replace(NW, temperature=1e6))
    assert np.max(np.abs(w - 1 / 12)) <= 1e-6
    d2 = np.sum((s.context_latents - s.query_latent) ** 2, 1)
    cold, deg = icnw_weights(s, replace(NW, temperature=1e-6))
    assert np.argmax(cold) == np.argmin(d2)
    assert deg  # raw kernel values underflow here, yet the weights stay exact


def test_icnw_nonfinite_falls_back_to_uniform():
    s = state([[0.0], [1e200]], [[1.0], [3.0]], [1e200], NW)
    with np.errstate(all="ignore"):
        w, deg = icnw_weights(s, NW)
    assert deg and np.allclose(w, 0.5)


def test_gates():
    assert context_gate(0, 4.0) == 0.0
    assert context_gate(4, 4.0) == 0.5
    assert context_gate(7, 0.0) == 1.0


@pytest.mark.parametrize("mode", list(Mode))
def test_empty_context_returns_baseline(mode):
    cfg = IcmConfig(epsilon=1.0, mode=mode)
    s = build_context(np.zeros((0, 2)), np.zeros((0, 3)), np.zeros((0, 3)), cfg, [1, 1], [1.0, 2.0, 3.0])
    assert np.array_equal(corrected_prediction(s, cfg), [1.0, 2.0, 3.0])


@pytest.mark.parametrize("mode", [Mode.ICGP, Mode.ICNW])
def test_zero_gain_returns_baseline(mode):
    cfg = IcmConfig(epsilon=1.0, gain=0.0, mode=mode)
    s = random_state(5, cfg)
    assert np.array_equal(corrected_prediction(s, cfg), s.query_pred)


@given(st.integers(0, 2**31 - 1))
def test_icgp_correction_magnitude_bound(seed):
    s = random_state(seed, GP)
    c = correct(s, GP)
    g = GP.gain * context_gate(s.C, GP.k0)
    Z = s.context_latents
    K = np.exp(-np.sum((Z[:, None] - Z[None]) ** 2, -1)) + GP.sigma2 * np.eye(len(Z))
    k = np.exp(-np.sum((Z - s.query_latent) ** 2, 1))
    bound = g * c.gate_var * np.abs(np.linalg.solve(K, k)).sum() * np.abs(s.residuals).max()
    assert np.max(np.abs(c.prediction - s.query_pred)) <= bound + 1e-10


def test_combined_formulas():
    s = random_state(9, GP, C=8)
    c = correct(s, GP)
    delta, s2, gv = icgp_correction(s, GP)
    assert np.allclose(c.prediction, s.query_pred + (8 / 12) * gv * delta, atol=1e-15)
    nw = build_context(s.context_latents, s.targets, s.context_preds, NW, s.query_latent, s.query_pred)
    d, _ = icnw_correction(nw, NW)
    assert np.allclose(corrected_prediction(nw, NW), s.query_pred + (8 / 12) * d, atol=1e-15)
    none = replace(NW, mode=Mode.NONE)
    assert np.array_equal(corrected_prediction(nw, none), s.query_pred)
