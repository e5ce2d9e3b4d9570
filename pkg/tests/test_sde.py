import numpy as np
import pytest

from replangevin.potential import (potential, projected_gradient,
                                   sphere_potential, two_edge_matrix)
from replangevin.rngs import master_rng, run_rng
from replangevin.sde import (IntegratorConfig, deterministic_flow, simulate,
                             sqrt_lift, step, to_simplex)


def reference_step(y, M, dt, eps, w, descent=False):
    """Straight numpy transcription of the scheme, as an oracle for the kernel."""
    x = y * y
    grad = 2.0 * y * (M.entries @ x)
    proj = grad - (grad @ y) * y
    noise = w - (y @ w) * y
    sign = -1.0 if descent else 1.0
    yhat = y + sign * 0.25 * dt * proj + eps * np.sqrt(dt) * noise
    return yhat / np.linalg.norm(yhat)


def test_rng_streams_are_reproducible_and_independent():
    a = run_rng(42, 0, 1).standard_normal(5)
    b = run_rng(42, 0, 1).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    c = run_rng(42, 0, 2).standard_normal(5)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, master_rng(42).standard_normal(5))


def test_lift_and_selection_maps():
    x = np.array([0.2, 0.6, 0.2])
    y = sqrt_lift(x)
    assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(to_simplex(y), x, atol=1e-15)
    with pytest.raises(ValueError):
        sqrt_lift(np.array([0.2, 0.2]))


def test_step_matches_reference_implementation():
    M = two_edge_matrix()
    rng = master_rng(3)
    y = rng.standard_normal(3)
    y /= np.linalg.norm(y)
    for descent in (False, True):
        w = rng.standard_normal(3)
        got = step(y, M, dt=0.05, eps=0.1, noise=w, descent=descent)
        np.testing.assert_allclose(got, reference_step(y, M, 0.05, 0.1, w, descent),
                                   rtol=1e-13, atol=1e-15)
        assert np.linalg.norm(got) == pytest.approx(1.0, abs=1e-12)


def test_noiseless_step_ascends_and_descent_flag_flips_it():
    M = two_edge_matrix()
    y = sqrt_lift(np.array([0.3, 0.45, 0.25]))
    w = np.zeros(3)
    up = step(y, M, dt=0.05, eps=0.0, noise=w)
    down = step(y, M, dt=0.05, eps=0.0, noise=w, descent=True)
    f0 = sphere_potential(M, y)
    assert sphere_potential(M, up) > f0
    assert sphere_potential(M, down) < f0


def test_clique_lift_is_a_fixed_point_of_the_noiseless_flow():
    M = two_edge_matrix()
    y = np.sqrt(np.array([0.5, 0.5, 0.0]))
    y1 = step(y, M, dt=0.05, eps=0.0, noise=np.zeros(3))
    np.testing.assert_allclose(y1, y, atol=1e-14)


def test_simulate_recording_and_determinism():
    M = two_edge_matrix()
    cfg = IntegratorConfig(dt=0.05, eps=0.1, seed=9, max_steps=500)
    y0 = sqrt_lift(np.full(3, 1.0 / 3.0))
    traj = simulate(y0, M, cfg, record_stride=100, record_sphere=True)
    assert len(traj) == 6                       # t=0 plus 5 recordings
    np.testing.assert_allclose(traj.times, [0.0, 5.0, 10.0, 15.0, 20.0, 25.0])
    np.testing.assert_allclose(traj.states.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(traj.sphere_states, axis=1), 1.0,
                               atol=1e-12)
    traj2 = simulate(y0, M, cfg, record_stride=100)
    np.testing.assert_array_equal(traj.states, traj2.states)


def test_observer_path_is_bit_identical_to_kernel_path():
    M = two_edge_matrix()
    cfg = IntegratorConfig(dt=0.05, eps=0.15, seed=21, max_steps=300)
    y0 = sqrt_lift(np.full(3, 1.0 / 3.0))
    plain = simulate(y0, M, cfg, record_stride=50)
    seen = []
    watched = simulate(y0, M, cfg, record_stride=50,
                       observer=lambda k, y, x: seen.append(k) and False)
    np.testing.assert_array_equal(plain.states, watched.states)
    assert seen[-1] == 300


def test_observer_can_stop_early():
    M = two_edge_matrix()
    cfg = IntegratorConfig(dt=0.05, eps=0.1, seed=2, max_steps=10_000)
    y0 = sqrt_lift(np.full(3, 1.0 / 3.0))
    traj = simulate(y0, M, cfg, record_stride=100,
                    observer=lambda k, y, x: k >= 137)
    assert traj.times[-1] == pytest.approx(137 * 0.05)


def test_trajectory_csv(tmp_path):
    M = two_edge_matrix()
    cfg = IntegratorConfig(dt=0.05, eps=0.1, seed=4, max_steps=200)
    traj = simulate(sqrt_lift(np.full(3, 1.0 / 3.0)), M, cfg, record_stride=100)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_1,x_2,x_3"
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    np.testing.assert_allclose(data[:, 0], traj.times, rtol=1e-16)
    np.testing.assert_allclose(data[:, 1:], traj.states, rtol=1e-16)


def test_deterministic_flow_reaches_the_nearby_clique():
    M = two_edge_matrix()
    res = deterministic_flow(sqrt_lift(np.array([0.55, 0.35, 0.10])), M)
    assert res.converged
    np.testing.assert_allclose(res.x, [0.5, 0.5, 0.0], atol=1e-4)
    assert np.linalg.norm(projected_gradient(M, res.y)) < 1e-8


def test_deterministic_flow_increases_potential():
    M = two_edge_matrix()
    rng = master_rng(77)
    for _ in range(10):
        x0 = rng.dirichlet(np.ones(3))
        res = deterministic_flow(sqrt_lift(x0), M)
        assert potential(M, res.x / res.x.sum()) >= potential(M, x0) - 1e-12


def test_deterministic_flow_reports_non_convergence():
    M = two_edge_matrix()
    res = deterministic_flow(sqrt_lift(np.full(3, 1.0 / 3.0)), M, max_steps=3)
    assert not res.converged
    assert res.steps == 3


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=-0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(max_steps=0)
    cfg = IntegratorConfig(dt=0.01, eps=0.1)
    assert cfg.with_eps(0.2).eps == 0.2
    assert cfg.with_eps(0.2).dt == 0.01
