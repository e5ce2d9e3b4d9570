import math

import numpy as np
import pytest

from replangevin.potential import PayoffMatrix, sphere_potential, two_edge_matrix
from replangevin.stationary import (DEFAULT_EXPONENT_SCALE, TWO_PI,
                                    circle_drift, circle_potential,
                                    circle_stationary_oracle,
                                    closed_form_circle_density,
                                    density_bin_masses, empirical_density,
                                    gibbs_log_density_simplex,
                                    gibbs_log_density_sphere,
                                    sample_angle_histogram,
                                    select_exponent_scale, tv_distance)


def flat():
    # all-equal payoffs: F is constant on the circle, so the drift vanishes
    return PayoffMatrix(np.full((2, 2), 0.5))


def coupled():
    return PayoffMatrix(np.array([[0.5, 1.0], [1.0, 0.5]]))


def test_circle_potential_matches_sphere_lift():
    M = coupled()
    thetas = np.linspace(0.0, TWO_PI, 17)
    for th in thetas:
        y = np.array([math.cos(th), math.sin(th)])
        assert circle_potential(M, np.array([th]))[0] == pytest.approx(
            sphere_potential(M, y), abs=1e-14)


def test_circle_drift_is_quarter_potential_derivative():
    M = coupled()
    thetas = np.linspace(0.1, TWO_PI, 40)
    h = 1e-6
    dfd = (circle_potential(M, thetas + h) - circle_potential(M, thetas - h)) / (2 * h)
    np.testing.assert_allclose(circle_drift(M, thetas), 0.25 * dfd,
                               rtol=1e-7, atol=1e-9)


def test_circle_functions_require_n2():
    with pytest.raises(ValueError):
        circle_potential(two_edge_matrix(), np.array([0.0]))
    with pytest.raises(ValueError):
        circle_drift(two_edge_matrix(), np.array([0.0]))


def test_closed_form_density_normalizes():
    d = closed_form_circle_density(coupled(), 0.3)
    assert d.integral() == pytest.approx(1.0, abs=1e-12)
    assert d.normalized
    assert np.all(d.values > 0.0)


def test_zero_drift_oracle_is_uniform():
    d = circle_stationary_oracle(flat(), 0.3, grid_size=256)
    np.testing.assert_allclose(d.values, 1.0 / TWO_PI, rtol=1e-10)


def test_oracle_grid_refinement():
    M = coupled()
    coarse = circle_stationary_oracle(M, 0.35, grid_size=512)
    fine = circle_stationary_oracle(M, 0.35, grid_size=2048)
    # compare on the shared coarse nodes
    vals = np.interp(coarse.thetas, fine.thetas, fine.values)
    assert np.max(np.abs(coarse.values - vals)) / np.max(vals) < 5e-3


def test_oracle_agrees_with_gibbs_at_default_scale():
    M = coupled()
    for eps in (0.3, 0.4):
        oracle = circle_stationary_oracle(M, eps, grid_size=2048)
        gibbs = closed_form_circle_density(M, eps, grid_size=2048,
                                           exponent_scale=DEFAULT_EXPONENT_SCALE)
        err = np.max(np.abs(oracle.values - gibbs.values)) / np.max(oracle.values)
        assert err < 1e-3


def test_select_exponent_scale_picks_default():
    best, errors = select_exponent_scale(coupled(), 0.3)
    assert best == DEFAULT_EXPONENT_SCALE
    assert errors[best] < 1e-3
    # the alternative candidate constant is clearly rejected
    other = max(errors, key=errors.get)
    assert errors[other] > 50 * errors[best]


def test_gibbs_log_densities():
    M = coupled()
    y = np.array([math.cos(0.4), math.sin(0.4)])
    v = gibbs_log_density_sphere(M, 0.3, y)
    assert v == pytest.approx(sphere_potential(M, y) / (2.0 * 0.09), rel=1e-12)
    x = y * y
    x = x / x.sum()
    lv = gibbs_log_density_simplex(M, 0.3, x)
    assert lv == pytest.approx(-0.5 * np.sum(np.log(x))
                               + sphere_potential(M, y) / (2.0 * 0.09), rel=1e-10)
    assert gibbs_log_density_simplex(M, 0.3, np.array([1.0, 0.0])) == math.inf
    with pytest.raises(ValueError):
        gibbs_log_density_sphere(M, 0.0, y)


def test_empirical_density_and_tv():
    rng = np.random.default_rng(0)
    angles = rng.uniform(0.0, TWO_PI, 200_000)
    hist = empirical_density(angles, bins=32)
    assert hist.mass.sum() == pytest.approx(1.0)
    uniform = circle_stationary_oracle(flat(), 0.3, grid_size=256)
    assert tv_distance(hist, uniform) < 0.01
    with pytest.raises(ValueError):
        empirical_density(np.array([]))


def test_density_bin_masses_sum_to_one():
    d = closed_form_circle_density(coupled(), 0.3)
    edges = np.linspace(0.0, TWO_PI, 33)
    masses = density_bin_masses(d, edges)
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(masses > 0.0)


def test_sample_angle_histogram_reproducible():
    M = coupled()
    h1 = sample_angle_histogram(M, 0.4, 0.02, 30_000, seed=6)
    h2 = sample_angle_histogram(M, 0.4, 0.02, 30_000, seed=6)
    np.testing.assert_array_equal(h1.mass, h2.mass)
    assert h1.mass.sum() == pytest.approx(1.0)
    # chunk boundaries must not change the stream
    h3 = sample_angle_histogram(M, 0.4, 0.02, 30_000, seed=6, chunk=7_001)
    np.testing.assert_array_equal(h1.mass, h3.mass)


def test_sampled_histogram_approaches_oracle():
    # short version of the full validation: modest steps, loose tolerance
    M = coupled()
    hist = sample_angle_histogram(M, 0.4, 0.01, 1_000_000, seed=15, bins=32)
    oracle = circle_stationary_oracle(M, 0.4, grid_size=1024)
    assert tv_distance(hist, oracle) < 0.1


def test_density_csv(tmp_path):
    d = closed_form_circle_density(coupled(), 0.3, grid_size=64)
    d.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "theta,density"
    assert len(lines) == 65
