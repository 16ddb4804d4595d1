import csv

import numpy as np
import pytest

from lisa.gplm import fit_decoder, predict_batch
from lisa.hankel import delay_windows
from lisa.icm import IcmConfig, Mode, build_context, build_state, correct, with_query
from lisa.rollout import Method, RolloutConfig, encode_prefix, roll
from lisa.spectral import KernelParams, encode_batch


def test_config_validation():
    with pytest.raises(ValueError):
        RolloutConfig(0)
    assert RolloutConfig(5, "LISA").method is Method.LISA


@pytest.mark.parametrize("method", ["LISA", "ALSA"])
def test_minimum_context_matches_baseline(lorenz_models, method):
    enc, dec, _, test = lorenz_models
    L = enc.window_shape[0]
    prefix = test[:3 * L]
    base = roll(prefix, enc, dec, RolloutConfig(50, "NLSA"))
    other = roll(prefix, enc, dec, RolloutConfig(50, method, context_length=L))
    assert np.max(np.abs(base.values - other.values)) <= 1e-12


def test_baseline_ignores_context_length(lorenz_models):
    enc, dec, _, test = lorenz_models
    a = roll(test[:200], enc, dec, RolloutConfig(20, "NLSA", context_length=150))
    b = roll(test[:200], enc, dec, RolloutConfig(20, "NLSA"))
    assert np.array_equal(a.values, b.values)
    assert a.diagnostics["C"] == 0


def test_single_step_is_one_correction(lorenz_models):
    enc, dec, _, test = lorenz_models
    L = enc.window_shape[0]
    cfg = IcmConfig(mode=Mode.ICGP).resolve(dec)
    fc = roll(test[:4 * L], enc, dec, RolloutConfig(1, "LISA", 4 * L, icm=cfg))
    s = build_state(test[:4 * L], L, enc, dec, cfg)
    assert fc.values.shape == (1, 3)
    assert np.allclose(fc.values[0], correct(s, cfg).prediction, atol=1e-12)
    assert fc.per_step_variance.shape == (1,)


def test_deterministic_and_prefix_untouched(lorenz_models):
    enc, dec, _, test = lorenz_models
    prefix = np.array(test[:120])
    before = prefix.copy()
    a = roll(prefix, enc, dec, RolloutConfig(30, "ALSA", 120))
    b = roll(prefix, enc, dec, RolloutConfig(30, "ALSA", 120))
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(prefix, before)


@pytest.mark.parametrize("method", ["NLSA", "LISA", "ALSA"])
def test_step_locality(lorenz_models, method):
    enc, dec, _, test = lorenz_models
    short = roll(test[:100], enc, dec, RolloutConfig(10, method, 100))
    long = roll(test[:100], enc, dec, RolloutConfig(25, method, 100))
    assert np.array_equal(long.values[:10], short.values)


def test_frozen_residual_table_matches_manual_loop(lorenz_models):
    enc, dec, _, test = lorenz_models
    L = enc.window_shape[0]
    ell, H = 3 * L, 8
    cfg = IcmConfig().resolve(dec)
    fc = roll(test[:ell], enc, dec, RolloutConfig(H, "ALSA", ell, icm=cfg))
    # residual table built once from observed data; only the query window moves
    s = build_state(test[:ell], L, enc, dec, cfg)
    work = list(test[:ell])
    for h in range(H):
        window = np.array(work[-L:])
        z = encode_batch(enc, window[None])
        q = predict_batch(dec, z, return_var=False)
        out = correct(with_query(s, z[0], q[0]), cfg).prediction
        assert np.allclose(fc.values[h], out, atol=1e-12)
        work.append(out)
    assert len(fc.diagnostics["weight_entropy"]) == H


def test_reusing_encodings(lorenz_models):
    enc, dec, _, test = lorenz_models
    prefix = test[:200]
    encoded = encode_prefix(prefix, enc, dec)
    a = roll(prefix, enc, dec, RolloutConfig(15, "LISA", 80), encoded=encoded)
    b = roll(prefix, enc, dec, RolloutConfig(15, "LISA", 80))
    assert np.array_equal(a.values, b.values)


def test_stochastic_mode_seeded(lorenz_models):
    enc, dec, _, test = lorenz_models
    cfg = RolloutConfig(10, "LISA", 100, stochastic=True, seed=4)
    a = roll(test[:100], enc, dec, cfg)
    b = roll(test[:100], enc, dec, cfg)
    mean = roll(test[:100], enc, dec, RolloutConfig(10, "LISA", 100))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, mean.values)


def test_length_checks(lorenz_models):
    enc, dec, _, test = lorenz_models
    L = enc.window_shape[0]
    with pytest.raises(ValueError):
        roll(test[:100], enc, dec, RolloutConfig(5, "ALSA", L - 1))
    with pytest.raises(ValueError):
        roll(test[:50], enc, dec, RolloutConfig(5, "ALSA", 60))


def test_divergence_truncates(lorenz_models):
    enc, dec, train, test = lorenz_models
    # a decoder that jumps far from the training manifold makes the next window unencodable
    Z = dec.train_latents
    wild = fit_decoder(Z, np.full((Z.shape[0], 3), 1e8), dec.kernel, 1e-4)
    fc = roll(test[:60], enc, wild, RolloutConfig(10, "ALSA", 60))
    assert fc.diverged_at is not None and fc.diverged_at >= 1
    assert fc.values.shape[0] == fc.diverged_at
    assert "too far" in fc.diagnostics["divergence_reason"]


def test_forecast_csv(lorenz_models, tmp_path):
    enc, dec, _, test = lorenz_models
    fc = roll(test[:80], enc, dec, RolloutConfig(4, "LISA", 80))
    path = fc.to_csv(tmp_path / "f.csv", ["x", "y", "z"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["step", "x", "y", "z", "variance", "gate_ctx", "gate_var", "weight_entropy"]
    assert len(rows) == 5 and rows[1][0] == "1"
    assert float(rows[2][1]) == fc.values[1, 0]
