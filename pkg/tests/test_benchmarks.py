import numpy as np
import pytest

from vpnewton import benchmarks as bm
from vpnewton.benchmarks import DAY, KM
from vpnewton.newton import NewtonConfig


def test_problem1_formula_values():
    # r(0, 0) = 0.04 - 0.0625 - 0.0625
    x = y = 0.0
    xs, ys = x / (1000 * KM), y / (1000 * KM)
    assert 0.04 - (xs - 0.25) ** 2 - (ys - 0.25) ** 2 == pytest.approx(-0.085)
    # at (250 km, 250 km): r = 0.04, r1 = 0.1 + 0.25 - 0.5 = -0.15
    A = bm.problem1_concentration(250 * KM, 250 * KM)
    expected = 1 - 0.5 * np.exp(-32.0) - 0.4 * np.exp(-90 * 0.15) - 0.4 * np.exp(-90 * 0.55)
    assert A == pytest.approx(expected, rel=1e-15)


def test_problem1_fields():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 512 * KM, size=(2, 200))
    A = bm.problem1_concentration(x, y)
    np.testing.assert_array_equal(bm.problem1_thickness(x, y), 2 * A)
    assert A.min() > 0 and A.max() <= 1


def test_problem1_spec():
    spec = bm.problem1_spec(4 * KM)
    assert spec.n == 128 and spec.L == 512 * KM and spec.single_step and spec.n_steps == 1
    assert spec.dt == 1800.0 and spec.delta_min == 2e-9
    va, vo = spec.forcing(0.0, np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(va, 5.0)
    np.testing.assert_array_equal(vo, 0.0)
    with pytest.raises(ValueError):
        bm.problem1_spec(3 * KM)


def test_problem2_ocean_and_center():
    va, vo = bm.problem2_forcing(0.0, np.array(256 * KM), np.array(256 * KM))
    np.testing.assert_allclose(vo, 0.0, atol=1e-18)
    _, vo = bm.problem2_forcing(0.0, np.array(0.0), np.array(0.0))
    np.testing.assert_allclose(vo, [-0.01, 0.01])


def test_wind_center_and_continuity():
    assert bm.cyclone_center(4.0) == pytest.approx(460.8)
    assert 665.6 - 51.2 * 4 == pytest.approx(460.8)
    assert bm.cyclone_center(4.0 - 1e-13) == pytest.approx(bm.cyclone_center(4.0 + 1e-13), abs=1e-10)
    assert abs(bm.wind_amplitude(4.0)) <= 1e-12
    assert abs(bm.wind_amplitude(4.0 + 1e-15)) <= 1e-12
    # the late branch evaluated exactly at day 4
    assert 15.0 * np.tanh((12.0 - 4.0) * (-4.0 + 4.0) / 2.0) == 0.0


def test_omega_at_center():
    # v_a = omega * amp * R (x - m): check |v_a| / (amp |x - m|) at 1 km from the center
    t = 2.0
    m = bm.cyclone_center(t) * KM
    va, _ = bm.problem2_forcing(t * DAY, np.array(m + KM), np.array(m))
    omega = np.linalg.norm(va) / abs(bm.wind_amplitude(t))
    assert omega == pytest.approx(np.exp(-1 / 100) / 50, rel=1e-12)
    va, _ = bm.problem2_forcing(t * DAY, np.array(m), np.array(m))
    np.testing.assert_array_equal(va, 0.0)


def test_wind_rotation_convention():
    t = 1.0
    m = bm.cyclone_center(t) * KM
    va, _ = bm.problem2_forcing(t * DAY, np.array(m + 10 * KM), np.array(m))
    a = np.deg2rad(72.0)
    scale = np.exp(-0.1) / 50 * bm.wind_amplitude(t) * 10
    np.testing.assert_allclose(va, scale * np.array([np.cos(a), -np.sin(a)]), rtol=1e-12)
    assert bm.wind_angle(4.0) == np.deg2rad(72.0)
    assert bm.wind_angle(4.5) == np.deg2rad(81.0)


def test_forcing_time_range():
    with pytest.raises(ValueError):
        bm.problem2_forcing(8.5 * DAY, np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        bm.problem2_forcing(-DAY, np.zeros(1), np.zeros(1))


def test_problem2_initial():
    g = bm.problem2_spec(32 * KM).grid()
    v, A, H = bm.problem2_initial(g)
    assert not v.any()
    np.testing.assert_array_equal(A, 1.0)
    assert H.min() >= 0.29 and H.max() <= 0.31
    assert bm.problem2_thickness(0.0, 0.0) == 0.3


def test_problem2_spec_steps():
    # half-hour steps: 48 per day, 384 over the whole 8-day forcing window
    assert bm.problem2_spec(4 * KM, days=4).n_steps == 192
    assert bm.problem2_spec(4 * KM, days=8).n_steps == 384
    assert bm.problem2_spec(4 * KM, days=1).n_steps == 48
    assert bm.problem2_spec(8 * KM, steps=3).n_steps == 3


def test_problem1_run_single_solve_no_transport():
    res = bm.run_simulation(bm.problem1_spec(32 * KM))
    assert len(res.steps) == 1 and res.transport == []
    assert res.all_converged


def test_problem2_two_steps_4km():
    res = bm.run_simulation(bm.problem2_spec(4 * KM, steps=2), NewtonConfig(method="sv"))
    assert len(res.steps) == 2 and len(res.transport) == 2
    assert res.all_converged
    assert 1 <= res.steps[0].stats.iterations <= 20
    assert res.A.min() >= 0 and res.A.max() <= 1 and res.H.min() >= 0


def test_ocean_driven_velocity_bound():
    def ocean_only(t, x, y):
        va, vo = bm.problem2_forcing(t, x, y)
        return np.zeros_like(va), vo

    spec = bm.problem2_spec(16 * KM, steps=1)
    spec.forcing = ocean_only
    res = bm.run_simulation(spec)
    speed = np.linalg.norm(res.v.reshape(-1, 2), axis=1)
    assert 0 < speed.max() < 0.01


def test_nonconvergence_policy():
    spec = bm.problem1_spec(16 * KM)
    cfg = NewtonConfig(method="std", max_iter=2)
    with pytest.raises(bm.NonConvergenceError):
        bm.run_simulation(spec, cfg)
    res = bm.run_simulation(spec, cfg, on_nonconvergence="continue")
    assert not res.all_converged
    with pytest.raises(ValueError):
        bm.run_simulation(spec, cfg, on_nonconvergence="ignore")
