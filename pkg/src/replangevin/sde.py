"""Time discretization of the sphere Langevin dynamics.

The scheme is projected Euler-Maruyama with renormalization:

    yhat = y + (dt/4) * proj_grad(y) + eps*sqrt(dt) * (I - y y^T) w,
    y'   = yhat / ||yhat||,          x' = y'^2

with w a vector of i.i.d. standard normals.  The drift enters with a plus
sign (gradient ascent), which is what the continuous dynamics and all
experiments require; set descent=True for the literal descent variant.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from replangevin import _kernels
from replangevin.potential import PayoffMatrix, check_simplex, check_sphere
from replangevin.rngs import run_rng

DEFAULT_DT = 0.05
DEFAULT_RECORD_STRIDE = 100


class RenormalizationError(ArithmeticError):
    """The pre-renormalization iterate had zero norm."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    eps: float = 0.0
    seed: int = 0
    max_steps: int = 1_000_000
    descent: bool = False

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def with_eps(self, eps: float) -> "IntegratorConfig":
        return replace(self, eps=eps)


@dataclass
class TrajectoryRecord:
    """Subsampled trajectory: times t = k*dt, simplex states, optional sphere states."""

    times: np.ndarray
    states: np.ndarray
    sphere_states: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        header = "t," + ",".join(f"x_{i+1}" for i in range(n))
        with open(path, "w") as f:
            f.write(header + "\n")
            for t, row in zip(self.times, self.states):
                f.write(("%.17g," % t) + ",".join("%.17g" % v for v in row) + "\n")


@dataclass
class FlowResult:
    """Outcome of the noiseless flow: final point and a convergence flag."""

    y: np.ndarray
    converged: bool
    steps: int

    @property
    def x(self) -> np.ndarray:
        return self.y * self.y


def gaussian_increments(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. N(0,1) draws from the given stream."""
    return rng.standard_normal(n)


def to_simplex(y: np.ndarray) -> np.ndarray:
    """Selection map x = y^2; sums to 1 exactly when ||y|| = 1."""
    y = check_sphere(y)
    return y * y


def sqrt_lift(x: np.ndarray) -> np.ndarray:
    """Lift y = sqrt(x) into the positive orthant of the sphere."""
    x = check_simplex(x)
    return np.sqrt(np.clip(x, 0.0, None))


def step(y: np.ndarray, M: PayoffMatrix, dt: float, eps: float,
         noise: np.ndarray, descent: bool = False) -> np.ndarray:
    """One integrator step; returns the renormalized next sphere point."""
    y = check_sphere(y).copy()
    noise = np.asarray(noise, dtype=float)
    if noise.shape != y.shape:
        raise ValueError("noise vector must match state dimension")
    sign = -1.0 if descent else 1.0
    r = _kernels.advance(y, M.entries, dt, eps, sign, noise.reshape(1, -1))
    if r < 0:
        raise RenormalizationError("renormalization denominator vanished")
    return y


def simulate(y0: np.ndarray, M: PayoffMatrix, cfg: IntegratorConfig,
             observer=None, record_stride: int = DEFAULT_RECORD_STRIDE,
             record_sphere: bool = False,
             rng: np.random.Generator | None = None) -> TrajectoryRecord:
    """Iterate the scheme for cfg.max_steps, recording every record_stride steps.

    `observer`, if given, is called every step as observer(k, y, x) (k >= 1,
    after the step) and may return a truthy value to stop the run early.  The
    noise stream is consumed identically with or without an observer, so both
    paths produce bit-identical trajectories for the same seed.
    """
    y = check_sphere(y0).copy()
    if rng is None:
        rng = run_rng(cfg.seed)
    sign = -1.0 if cfg.descent else 1.0
    n = y.shape[0]

    rec_t = [0.0]
    rec_x = [y * y]
    rec_y = [y.copy()] if record_sphere else None

    def record(k):
        rec_t.append(k * cfg.dt)
        rec_x.append(y * y)
        if rec_y is not None:
            rec_y.append(y.copy())

    k = 0
    stopped = False
    while k < cfg.max_steps and not stopped:
        block = min(record_stride - (k % record_stride) or record_stride,
                    cfg.max_steps - k)
        noise = rng.standard_normal((block, n))
        if observer is None:
            r = _kernels.advance(y, M.entries, cfg.dt, cfg.eps, sign, noise)
            if r < 0:
                raise RenormalizationError(f"renormalization failed at step {k - r}")
            k += block
        else:
            for s in range(block):
                r = _kernels.advance(y, M.entries, cfg.dt, cfg.eps, sign,
                                     noise[s:s + 1])
                if r < 0:
                    raise RenormalizationError(f"renormalization failed at step {k + 1}")
                k += 1
                if observer(k, y.copy(), y * y):
                    stopped = True
                    break
        if k % record_stride == 0 or stopped or k == cfg.max_steps:
            record(k)

    return TrajectoryRecord(times=np.array(rec_t), states=np.array(rec_x),
                            sphere_states=np.array(rec_y) if rec_y is not None else None)


def deterministic_flow(y0: np.ndarray, M: PayoffMatrix, dt: float = DEFAULT_DT,
                       grad_tol: float = 1e-8, max_steps: int = 200_000) -> FlowResult:
    """Noiseless gradient ascent until the projected gradient norm drops below grad_tol.

    Non-convergence within max_steps is reported through the flag, not raised;
    the last iterate is still returned.
    """
    if grad_tol <= 0.0:
        raise ValueError("grad_tol must be positive")
    y = check_sphere(y0).copy()
    steps = _kernels.flow(y, M.entries, dt, grad_tol, max_steps)
    if steps < 0:
        return FlowResult(y=y, converged=False, steps=max_steps)
    return FlowResult(y=y, converged=True, steps=steps)
