"""Quasi-stationary (Q-process) machinery on the n=2 circle reduction.

The diffusion on the circle is d theta = b(theta) dt + eps dW with
b = (1/4) dFt/dtheta.  On a basin interval with absorption at the ends, the
Q-process (conditioned on never exiting) is the same diffusion with extra
drift eps^2 (log phi)', where (lambda0, phi) is the principal Dirichlet
eigenpair of -L, L = b d/dtheta + (eps^2/2) d2/dtheta2.  1/lambda0
approximates the mean exit time, and the Q-process stationary density is
proportional to phi^2 * Gibbs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from replangevin import _kernels
from replangevin.potential import PayoffMatrix
from replangevin.rngs import run_rng
from replangevin.stationary import (DEFAULT_EXPONENT_SCALE, Histogram,
                                    circle_drift, circle_potential,
                                    empirical_density)

RESIDUAL_RTOL = 1e-6
MIN_INTERIOR = 16


@dataclass
class CircleReduction:
    """Uniform grid on [a, b] with the lifted potential and angular drift."""

    grid: np.ndarray
    f_tilde: np.ndarray
    drift: np.ndarray

    @property
    def a(self) -> float:
        return float(self.grid[0])

    @property
    def b(self) -> float:
        return float(self.grid[-1])

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass
class TridiagonalOperator:
    """Finite-difference L on interior nodes, Dirichlet rows removed."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    thetas: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return len(self.diag)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.lower[1:] * v[:-1]
        out[:-1] += self.upper[:-1] * v[1:]
        return out


@dataclass
class EigenPair:
    """Principal Dirichlet eigenvalue of -L and its positive eigenfunction.

    phi lives on the interior grid nodes and is max-normalized to 1; it
    vanishes at both (removed) boundary nodes.
    """

    lambda0: float
    phi: np.ndarray
    thetas: np.ndarray
    residual: float

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("theta,phi\n")
            for t, p in zip(self.thetas, self.phi):
                f.write(f"{'%.17g' % t},{'%.17g' % p}\n")


def reduce_to_circle(M: PayoffMatrix, interval: tuple, grid_size: int) -> CircleReduction:
    """Closed uniform grid on the interval with Ft(theta) and b(theta)."""
    if M.n != 2:
        raise ValueError("circle reduction needs a 2x2 payoff matrix")
    if grid_size < 64:
        raise ValueError("need grid_size >= 64")
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError("degenerate interval")
    grid = np.linspace(a, b, grid_size)
    return CircleReduction(grid=grid, f_tilde=circle_potential(M, grid),
                           drift=circle_drift(M, grid))


def dirichlet_generator(red: CircleReduction, eps: float) -> TridiagonalOperator:
    """Central-difference L = b d/dtheta + (eps^2/2) d2/dtheta2 on interior nodes."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    m = len(red.grid) - 2
    if m < MIN_INTERIOR:
        raise ValueError(f"grid too coarse: {m} interior nodes, need {MIN_INTERIOR}")
    h = red.h
    d = 0.5 * eps * eps
    b = red.drift[1:-1]
    lower = d / h**2 - b / (2.0 * h)
    diag = np.full(m, -2.0 * d / h**2)
    upper = d / h**2 + b / (2.0 * h)
    return TridiagonalOperator(lower=lower, diag=diag, upper=upper,
                               thetas=red.grid[1:-1], h=h)


def principal_eigenpair(op: TridiagonalOperator, tol: float = 1e-12,
                        max_iter: int = 500) -> EigenPair:
    """Smallest eigenvalue of -L with its positive eigenvector.

    Inverse power iteration with zero shift; -L is an M-matrix for reasonable
    grids so the iteration preserves positivity and converges to the principal
    pair.
    """
    m = op.size
    # banded form of A = -L for solve_banded
    ab = np.zeros((3, m))
    ab[0, 1:] = -op.upper[:-1]
    ab[1, :] = -op.diag
    ab[2, :-1] = -op.lower[1:]
    v = np.sin(np.pi * np.arange(1, m + 1) / (m + 1))
    lam = 0.0
    for it in range(max_iter):
        w = scipy.linalg.solve_banded((1, 1), ab, v)
        w = w / np.max(np.abs(w))
        lam_new = float(-(op.apply(w) @ w) / (w @ w))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)) and it > 0:
            lam = lam_new
            v = w
            break
        lam = lam_new
        v = w
    else:
        raise ArithmeticError(f"inverse iteration did not converge in {max_iter} sweeps")
    if np.all(v <= 0.0):
        v = -v
    if np.any(v <= 0.0):
        raise ArithmeticError("principal eigenvector is not strictly positive")
    phi = v / v.max()
    resid = float(np.max(np.abs(-op.apply(phi) - lam * phi)) / lam)
    if resid > RESIDUAL_RTOL:
        raise ArithmeticError(f"eigen residual {resid:.2e} exceeds {RESIDUAL_RTOL}")
    return EigenPair(lambda0=lam, phi=phi, thetas=op.thetas.copy(), residual=resid)


def log_phi_derivative(eig: EigenPair) -> np.ndarray:
    """(log phi)' on the interior grid, central differences (one-sided at ends)."""
    return np.gradient(np.log(eig.phi), eig.thetas)


def qprocess_drift_grid(red: CircleReduction, eig: EigenPair, eps: float) -> np.ndarray:
    """Q-process drift b + eps^2 (log phi)' sampled on the interior grid.

    Near the boundary (log phi)' diverges; simulation kernels clamp to the end
    values of this grid, which acts as a one-cell guard band.
    """
    b = np.interp(eig.thetas, red.grid, red.drift)
    return b + eps * eps * log_phi_derivative(eig)


def qprocess_drift(red: CircleReduction, eig: EigenPair, eps: float,
                   theta: float) -> float:
    """Q-process drift at a point strictly inside the interval."""
    if not (red.a < theta < red.b):
        raise ValueError(f"theta {theta} not strictly inside ({red.a}, {red.b})")
    grid_drift = qprocess_drift_grid(red, eig, eps)
    return float(np.interp(theta, eig.thetas, grid_drift))


def mean_exit_time_fd(red: CircleReduction, eps: float,
                      theta0: float | None = None):
    """Expected exit time from (a, b): solve L u = -1 with u(a) = u(b) = 0.

    Returns u on the interior grid, or its interpolated value at theta0.
    """
    op = dirichlet_generator(red, eps)
    m = op.size
    ab = np.zeros((3, m))
    ab[0, 1:] = op.upper[:-1]
    ab[1, :] = op.diag
    ab[2, :-1] = op.lower[1:]
    u = scipy.linalg.solve_banded((1, 1), ab, -np.ones(m))
    if theta0 is None:
        return op.thetas, u
    return float(np.interp(theta0, op.thetas, u))


def mc_mean_exit_time(red: CircleReduction, eps: float, dt: float, runs: int,
                      seed: int, theta0: float,
                      max_steps: int = 50_000_000,
                      chunk: int = 100_000) -> tuple[float, int]:
    """Monte Carlo mean exit time of the uncorrected diffusion from (a, b).

    Returns (mean tau over uncensored runs, censored count).
    """
    taus = []
    censored = 0
    for run in range(runs):
        rng = run_rng(seed, run)
        theta = theta0
        done = 0
        while done < max_steps:
            b = min(chunk, max_steps - done)
            noise = rng.standard_normal(b)
            s, theta = _kernels.circle_run(theta, red.a, red.h, red.drift,
                                           eps, dt, noise, red.a, red.b)
            if s > 0:
                taus.append((done + s) * dt)
                break
            done += b
        else:
            censored += 1
    if not taus:
        raise ArithmeticError("all exit runs censored; increase max_steps")
    return float(np.mean(taus)), censored


def qprocess_stationary_density(red: CircleReduction, eig: EigenPair, eps: float,
                                exponent_scale: float = DEFAULT_EXPONENT_SCALE):
    """Unnormalized Q-process stationary density phi^2 exp(Ft/(scale eps^2)) on the interior grid."""
    f = np.interp(eig.thetas, red.grid, red.f_tilde)
    w = eig.phi ** 2 * np.exp((f - f.max()) / (exponent_scale * eps * eps))
    return eig.thetas, w


@dataclass
class QProcessReport:
    lambda0: float
    confined: bool
    n_escapes: int
    tv_distance: float
    fd_mean_exit: float
    mc_mean_exit: float
    inv_lambda0: float
    exit_ratio: float           # mc_mean_exit * lambda0
    passed_confinement: bool
    passed_density: bool
    passed_exit_match: bool

    @property
    def passed(self) -> bool:
        return self.passed_confinement and self.passed_density and self.passed_exit_match

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump({k: getattr(self, k) for k in
                       ("lambda0", "confined", "n_escapes", "tv_distance",
                        "fd_mean_exit", "mc_mean_exit", "inv_lambda0",
                        "exit_ratio", "passed_confinement", "passed_density",
                        "passed_exit_match")} | {"passed": self.passed},
                      f, indent=2)
            f.write("\n")


def validate_qprocess(red: CircleReduction, eig: EigenPair, eps: float,
                      dt: float = 0.001, steps: int = 1_000_000,
                      seeds: int = 20, seed0: int = 0, bins: int = 32,
                      record_stride: int = 10,
                      exponent_scale: float = DEFAULT_EXPONENT_SCALE,
                      exit_runs: int = 200, exit_dt: float = 0.002,
                      tv_tol: float = 0.1, exit_rtol: float = 0.25) -> QProcessReport:
    """Three-way validation of the Q-process construction.

    (i) the corrected diffusion stays inside (a, b) for `steps` steps across
    `seeds` independent runs; (ii) its empirical density matches
    phi^2 * Gibbs within tv_tol; (iii) 1/lambda0 matches the Monte Carlo mean
    exit time of the *uncorrected* diffusion within exit_rtol.
    """
    drift = qprocess_drift_grid(red, eig, eps)
    theta_start = float(eig.thetas[np.argmax(eig.phi)])
    n_escapes = 0
    recorded = []
    per_run = steps // record_stride
    for s in range(seeds):
        rng = run_rng(seed0, s)
        out = np.empty(per_run)
        noise = rng.standard_normal(steps)
        exit_step, _, w = _kernels.circle_run_record(
            theta_start, float(eig.thetas[0]), red.h, drift, eps, dt, noise,
            red.a, red.b, record_stride, out)
        if exit_step > 0:
            n_escapes += 1
        recorded.append(out[:w])
    angles = np.concatenate(recorded)
    hist = empirical_density(angles, bins=bins, lo=red.a, hi=red.b)

    th, w = qprocess_stationary_density(red, eig, eps, exponent_scale)
    # bin the reference density on the histogram's bins
    ref = np.empty(bins)
    for i in range(bins):
        pts = np.linspace(hist.edges[i], hist.edges[i + 1], 16)
        ref[i] = np.trapezoid(np.interp(pts, th, w, left=0.0, right=0.0), pts)
    ref = ref / ref.sum()
    tv = 0.5 * float(np.abs(hist.mass - ref).sum())

    fd = mean_exit_time_fd(red, eps, theta0=theta_start)
    mc, _ = mc_mean_exit_time(red, eps, exit_dt, exit_runs, seed0 + 1,
                              theta_start)
    inv_l = 1.0 / eig.lambda0
    ratio = mc * eig.lambda0
    return QProcessReport(
        lambda0=eig.lambda0, confined=(n_escapes == 0), n_escapes=n_escapes,
        tv_distance=tv, fd_mean_exit=float(fd), mc_mean_exit=mc,
        inv_lambda0=inv_l, exit_ratio=ratio,
        passed_confinement=(n_escapes == 0),
        passed_density=(tv < tv_tol),
        passed_exit_match=(abs(mc - inv_l) <= exit_rtol * inv_l))
