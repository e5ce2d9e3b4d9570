"""Gibbs stationary densities and their n=2 validation machinery.

The sphere diffusion is ergodic with a Gibbs stationary law proportional to
exp(Ft(y) / (scale * eps^2)) against surface measure.  The exponent scale is
kept explicit: detailed balance for drift (1/4) grad Ft and noise eps gives
scale 2, which the finite-difference Fokker-Planck oracle below confirms;
scale 8 is selectable for comparison against that oracle.  Quantitative
validation is restricted to n=2, where the angle
theta parametrizes the circle via y = (cos theta, sin theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from replangevin import _kernels
from replangevin.potential import PayoffMatrix, check_simplex, check_sphere
from replangevin.rngs import run_rng

DEFAULT_EXPONENT_SCALE = 2.0
NORMALIZATION_ATOL = 1e-8

TWO_PI = 2.0 * math.pi


@dataclass
class DensityOnCircle:
    """Density values on the uniform grid theta_i = i * 2pi/m, i = 0..m-1."""

    thetas: np.ndarray
    values: np.ndarray
    normalized: bool = False

    @property
    def h(self) -> float:
        return TWO_PI / len(self.thetas)

    def integral(self) -> float:
        # periodic trapezoid rule == h * sum
        return float(self.h * self.values.sum())

    def normalize(self) -> "DensityOnCircle":
        z = self.integral()
        if z <= 0.0:
            raise ValueError("cannot normalize a nonpositive density")
        return DensityOnCircle(self.thetas, self.values / z, normalized=True)

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("theta,density\n")
            for t, v in zip(self.thetas, self.values):
                f.write(f"{'%.17g' % t},{'%.17g' % v}\n")


@dataclass
class Histogram:
    """Normalized angle histogram: bin edges (len bins+1) and per-bin mass."""

    edges: np.ndarray
    mass: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("bin_left,bin_right,mass\n")
            for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.mass):
                f.write(f"{'%.17g' % lo},{'%.17g' % hi},{'%.17g' % m}\n")


def gibbs_log_density_sphere(M: PayoffMatrix, eps: float, y: np.ndarray,
                             exponent_scale: float = DEFAULT_EXPONENT_SCALE) -> float:
    """Unnormalized log-density Ft(y) / (scale * eps^2) against surface measure."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    y = check_sphere(y)
    x = y * y
    f = 0.5 * float(x @ M.entries @ x)
    return f / (exponent_scale * eps * eps)


def gibbs_log_density_simplex(M: PayoffMatrix, eps: float, x: np.ndarray,
                              exponent_scale: float = DEFAULT_EXPONENT_SCALE) -> float:
    """Unnormalized log-density on the simplex: -1/2 sum log x_m + F/(scale eps^2).

    The 1/sqrt(x_m) product is the Jacobian of x = y^2; on the boundary the
    log-density is +inf (integrable singularity), returned as math.inf.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    x = check_simplex(x)
    if np.any(x <= 0.0):
        return math.inf
    f = 0.5 * float(x @ M.entries @ x)
    return -0.5 * float(np.sum(np.log(x))) + f / (exponent_scale * eps * eps)


def circle_potential(M: PayoffMatrix, thetas: np.ndarray) -> np.ndarray:
    """Lifted potential Ft on the circle: F([cos^2, sin^2]) for a 2x2 matrix."""
    if M.n != 2:
        raise ValueError("circle reduction needs a 2x2 payoff matrix")
    c2 = np.cos(thetas) ** 2
    s2 = np.sin(thetas) ** 2
    a, b, d = M.entries[0, 0], M.entries[0, 1], M.entries[1, 1]
    return 0.5 * (a * c2 * c2 + 2.0 * b * c2 * s2 + d * s2 * s2)


def circle_drift(M: PayoffMatrix, thetas: np.ndarray) -> np.ndarray:
    """Angular drift b(theta) = (1/4) dFt/dtheta of the n=2 sphere diffusion."""
    if M.n != 2:
        raise ValueError("circle reduction needs a 2x2 payoff matrix")
    c2 = np.cos(thetas) ** 2
    s2 = np.sin(thetas) ** 2
    a, b, d = M.entries[0, 0], M.entries[0, 1], M.entries[1, 1]
    mx1 = a * c2 + b * s2
    mx2 = b * c2 + d * s2
    # dFt/dtheta = (Mx . dx/dtheta) with dx/dtheta = (-sin 2theta, sin 2theta)
    return 0.25 * np.sin(2.0 * thetas) * (mx2 - mx1)


def closed_form_circle_density(M: PayoffMatrix, eps: float, grid_size: int = 2048,
                               exponent_scale: float = DEFAULT_EXPONENT_SCALE) -> DensityOnCircle:
    """Normalized Gibbs density exp(Ft/(scale eps^2)) on the circle grid."""
    thetas = np.arange(grid_size) * TWO_PI / grid_size
    f = circle_potential(M, thetas)
    vals = np.exp((f - f.max()) / (exponent_scale * eps * eps))
    return DensityOnCircle(thetas, vals).normalize()


def circle_stationary_oracle(M: PayoffMatrix, eps: float,
                             grid_size: int = 2048) -> DensityOnCircle:
    """Stationary Fokker-Planck solution for d theta = b dt + eps dW, periodic.

    Conservative central discretization of the probability flux
    J = b rho - (eps^2/2) rho' on cell faces; the solution is the (normalized)
    kernel of the flux-difference operator.  Independent of any Gibbs formula,
    this arbitrates the exponent scale.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if grid_size < 16:
        raise ValueError("grid too coarse")
    m = grid_size
    h = TWO_PI / m
    thetas = np.arange(m) * h
    b_face = circle_drift(M, thetas + 0.5 * h)   # face i+1/2 between cells i, i+1
    d = 0.5 * eps * eps

    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j % m)
        vals.append(v)

    for i in range(m):
        # J_{i+1/2} - J_{i-1/2} = 0
        bp = b_face[i]
        bm = b_face[i - 1]
        add(i, i + 1, 0.5 * bp - d / h)
        add(i, i, 0.5 * (bp - bm) + 2.0 * d / h)
        add(i, i - 1, -(0.5 * bm) - d / h)
    a = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(m, m)).tolil()
    # replace one equation with the normalization h * sum(rho) = 1
    a[0, :] = h
    rhs = np.zeros(m)
    rhs[0] = 1.0
    try:
        sol = scipy.sparse.linalg.spsolve(a.tocsr(), rhs)
    except RuntimeError as e:
        raise ArithmeticError(f"singular Fokker-Planck system; refine the grid ({e})")
    if not np.all(np.isfinite(sol)):
        raise ArithmeticError("singular Fokker-Planck system; refine the grid")
    return DensityOnCircle(thetas, sol, normalized=True).normalize()


def select_exponent_scale(M: PayoffMatrix, eps: float, grid_size: int = 2048,
                          candidates=(2.0, 8.0)) -> tuple[float, dict]:
    """Pick the Gibbs exponent scale that matches the Fokker-Planck oracle.

    Returns the best candidate and the max relative pointwise error per
    candidate.
    """
    oracle = circle_stationary_oracle(M, eps, grid_size)
    errors = {}
    for s in candidates:
        g = closed_form_circle_density(M, eps, grid_size, exponent_scale=s)
        errors[s] = float(np.max(np.abs(g.values - oracle.values)
                                 / np.max(oracle.values)))
    best = min(errors, key=errors.get)
    return best, errors


def angles_from_sphere_states(states: np.ndarray) -> np.ndarray:
    """atan2 angles in [0, 2pi) from n=2 sphere states."""
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[1] != 2:
        raise ValueError("need an array of 2d sphere states")
    return np.mod(np.arctan2(states[:, 1], states[:, 0]), TWO_PI)


def empirical_density(angles: np.ndarray, bins: int = 64,
                      lo: float = 0.0, hi: float = TWO_PI) -> Histogram:
    """Normalized histogram of angles over [lo, hi)."""
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ValueError("empty sample")
    counts, edges = np.histogram(angles, bins=bins, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the histogram range")
    return Histogram(edges=edges, mass=counts / total)


def density_bin_masses(density: DensityOnCircle, edges: np.ndarray,
                       oversample: int = 32) -> np.ndarray:
    """Probability mass of a circle density in each [edges_i, edges_{i+1}) bin."""
    d = density if density.normalized else density.normalize()
    # periodic extension for interpolation
    th = np.append(d.thetas, d.thetas[0] + TWO_PI)
    vals = np.append(d.values, d.values[0])
    mass = np.empty(len(edges) - 1)
    for i in range(len(edges) - 1):
        pts = np.linspace(edges[i], edges[i + 1], oversample, endpoint=False)
        pts = pts + 0.5 * (edges[i + 1] - edges[i]) / oversample
        mass[i] = np.mean(np.interp(np.mod(pts, TWO_PI), th, vals)) * (edges[i + 1] - edges[i])
    return mass / mass.sum()


def tv_distance(hist: Histogram, density: DensityOnCircle) -> float:
    """Total-variation distance between a histogram and a density on matched bins."""
    q = density_bin_masses(density, hist.edges)
    return 0.5 * float(np.sum(np.abs(hist.mass - q)))


def sample_angle_histogram(M: PayoffMatrix, eps: float, dt: float, steps: int,
                           seed: int, bins: int = 64,
                           theta0: float = 0.3,
                           chunk: int = 100_000) -> Histogram:
    """Angle histogram of a long n=2 sphere simulation (every step counted)."""
    if M.n != 2:
        raise ValueError("angle sampling needs n=2")
    rng = run_rng(seed)
    y = np.array([math.cos(theta0), math.sin(theta0)])
    counts = np.zeros(bins, dtype=np.int64)
    edges = np.linspace(0.0, TWO_PI, bins + 1)
    done = 0
    buf = np.empty(chunk)
    while done < steps:
        b = min(chunk, steps - done)
        noise = rng.standard_normal((b, 2))
        r = _kernels.advance_angles(y, M.entries, dt, eps, noise, buf[:b])
        if r < 0:
            raise ArithmeticError("renormalization failed during sampling")
        c, _ = np.histogram(buf[:b], bins=bins, range=(0.0, TWO_PI))
        counts += c
        done += b
    return Histogram(edges=edges, mass=counts / counts.sum())
