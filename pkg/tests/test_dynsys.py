import math

import numpy as np
import pytest

from lisa.dynsys import (REFERENCE, REGIME_A, REGIME_B, SYSTEM_NAMES, RegimeSwitchSpec,
                         TrajectoryConfig, integrate, integrate_regime_switch, make_system,
                         rk4, torus_point, vector_field)
from lisa.errors import IntegrationError


def oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_reference_dimensions():
    dims = [make_system(n).dim for n in SYSTEM_NAMES]
    assert dims == [3, 5, 3, 4, 2, 3, 3, 3]


def test_lorenz_field_hand_values():
    s = make_system("Lorenz63")
    assert np.allclose(vector_field(s, [0, 0, 0]), 0.0)
    assert np.allclose(vector_field(s, [1, 1, 1]), [0.0, 26.0, 1 - 8 / 3])


def test_rossler_field_at_origin():
    assert np.allclose(vector_field(make_system("Rossler"), [0, 0, 0]), [0, 0, 0.2])


def test_lorenz96_uniform_forcing_is_fixed_point():
    s = make_system("Lorenz96")
    assert np.allclose(vector_field(s, np.full(5, 8.0)), 0.0)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        vector_field(make_system("Lorenz63"), [1.0, 2.0])


def test_unknown_system_and_parameter():
    with pytest.raises(ValueError):
        make_system("Pendulum")
    with pytest.raises(ValueError):
        make_system("Lorenz63", gamma=1.0)


def test_rk4_fourth_order():
    exact = np.array([math.cos(1.0), -math.sin(1.0)])
    errs = []
    for dt in (0.1, 0.05):
        n = int(round(1.0 / dt))
        traj = rk4(oscillator, [1.0, 0.0], dt, n + 1)
        errs.append(np.linalg.norm(traj[-1] - exact))
    assert 8.0 <= errs[0] / errs[1] <= 32.0


def test_rk4_energy_drift():
    traj = rk4(oscillator, [1.0, 0.0], 0.01, 10_001)
    energy = 0.5 * np.sum(traj**2, axis=1)
    assert np.max(np.abs(energy - 0.5)) / 0.5 < 1e-6


def test_rk4_reports_blowup_step():
    with pytest.raises(IntegrationError) as info, np.errstate(over="ignore", invalid="ignore"):
        rk4(lambda t, y: y**2, [1.0], 0.01, 1000)
    assert 90 < info.value.step < 1000


def test_lorenz_bounded_over_long_run():
    ts = integrate(make_system("Lorenz63"), TrajectoryConfig(0.01, 101_000, burn_in=1000))
    x, y, z = ts.values.T
    assert len(ts) == 100_000
    assert np.all(np.abs(x) < 25) and np.all(np.abs(y) < 35)
    assert np.all((z > 0) & (z < 55))


@pytest.mark.parametrize("name", SYSTEM_NAMES)
def test_every_system_integrates_finite_and_nontrivial(name):
    info = REFERENCE[name]
    ts = integrate(make_system(name), TrajectoryConfig(info.dt, 12_000, burn_in=2000, seed=1))
    assert ts.values.shape == (10_000, info.dim)
    assert np.isfinite(ts.values).all()
    # no collapse onto a fixed point
    assert ts.values[:, 0].std() > 1e-2


def test_torus_stays_on_surface():
    p = REFERENCE["Torus"].params
    ts = integrate(make_system("Torus"), TrajectoryConfig(0.01, 5000))
    rho2 = ts.values[:, 0] ** 2 + ts.values[:, 1] ** 2
    lo, hi = (p["R"] - p["r"]) ** 2, (p["R"] + p["r"]) ** 2
    assert np.all(rho2 >= lo - 1e-9) and np.all(rho2 <= hi + 1e-9)
    for t in np.linspace(0, 50, 17):
        x, y, _ = torus_point(p, t)
        assert lo - 1e-12 <= x * x + y * y <= hi + 1e-12


def test_duffing_forcing_phase_starts_at_zero():
    s = make_system("DuffingNESS")
    ts = integrate(s, TrajectoryConfig(0.01, 3000, burn_in=1000))
    assert np.allclose(ts.values[0, 2:], [1.0, 0.0], atol=1e-6)
    w = s.params["omega"]
    assert np.allclose(ts.values[:, 2], np.cos(w * ts.t), atol=1e-6)


def test_duffing_variants_share_position_dynamics():
    cfg = TrajectoryConfig(0.01, 2000, burn_in=0, initial_state=None, seed=4)
    ness = integrate(make_system("DuffingNESS"), cfg)
    ne = integrate(make_system("DuffingNE"), TrajectoryConfig(0.01, 2000, initial_state=ness.values[0, :2]))
    assert ne.values.shape[1] == 2
    assert np.isfinite(ne.values).all()


def test_integration_deterministic():
    cfg = TrajectoryConfig(0.01, 3000, burn_in=100, seed=7)
    a = integrate(make_system("Chua"), cfg).values
    b = integrate(make_system("Chua"), cfg).values
    assert np.array_equal(a, b)


def test_regime_parameters():
    assert dict(REGIME_A) == {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}
    assert dict(REGIME_B) == {"sigma": 16.0, "rho": 50.0, "beta": 3.0}


def test_regime_switch_continuity():
    s = make_system("Lorenz63")
    cfg = TrajectoryConfig(0.01, 3000, burn_in=500, seed=2)
    spec = RegimeSwitchSpec(dict(REGIME_A), dict(REGIME_B), split_step=1500)
    train, test = integrate_regime_switch(s, spec, cfg)
    assert len(train) == 1500 and len(test) == 1000
    assert test.t0 == pytest.approx(15.0)
    sb = s.with_params(**REGIME_B)
    step = rk4(lambda t, y: vector_field(sb, y, t), train.values[-1], 0.01, 2)
    assert np.array_equal(step[1], test.values[0])
    # regime B occupies a larger attractor
    assert test.values[:, 2].mean() > train.values[:, 2].mean() + 5


def test_regime_switch_rejects_empty_test():
    cfg = TrajectoryConfig(0.01, 1000, burn_in=100)
    with pytest.raises(ValueError):
        integrate_regime_switch(make_system("Lorenz63"), RegimeSwitchSpec(split_step=900), cfg)
    with pytest.raises(ValueError):
        integrate_regime_switch(make_system("Rossler"), RegimeSwitchSpec(split_step=10), cfg)


def test_trajectory_config_validation():
    with pytest.raises(ValueError):
        TrajectoryConfig(0.0, 10)
    with pytest.raises(ValueError):
        TrajectoryConfig(0.1, 10, burn_in=10)
