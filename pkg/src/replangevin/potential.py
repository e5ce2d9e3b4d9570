"""Quadratic potentials on the simplex and their sphere-lifted forms.

The potential is F(x) = 1/2 x^T M x for a symmetric payoff matrix M, with x on
the probability simplex.  Its lift to the unit sphere is Ft(y) = F(y^2) with
componentwise squaring; all dynamics in this package run on the sphere and map
back to the simplex through x = y^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Tolerances shared across the package.
NORM_ATOL = 1e-9       # unit-norm check for sphere points, sum check for simplex points
SYM_ATOL = 1e-12       # symmetry check for payoff matrices
ORTHO_RTOL = 1e-12     # tangency of the projected gradient, relative to the gradient norm


class DimensionMismatchError(ValueError):
    """Vector and matrix dimensions disagree."""


class InvalidStateError(ValueError):
    """A point violates its simplex/sphere invariants beyond tolerance."""


@dataclass(frozen=True)
class PayoffMatrix:
    """Symmetric n x n payoff matrix defining F(x) = 1/2 x^T M x."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"payoff matrix must be square, got shape {m.shape}")
        if m.shape[0] < 2:
            raise ValueError("payoff matrix needs dimension n >= 2")
        if not np.allclose(m, m.T, atol=SYM_ATOL, rtol=0.0):
            raise ValueError("payoff matrix must be symmetric")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "entries": self.entries.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PayoffMatrix":
        obj = json.loads(text)
        m = np.asarray(obj["entries"], dtype=float)
        if m.shape != (obj["n"], obj["n"]):
            raise ValueError("entries shape does not match declared n")
        return cls(m)


def two_edge_matrix() -> PayoffMatrix:
    """Payoff matrix of the path graph 1-2-3, the smallest bistable example."""
    return PayoffMatrix(np.array([[0.5, 1.0, 0.0],
                                  [1.0, 0.5, 1.0],
                                  [0.0, 1.0, 0.5]]))


def check_simplex(x: np.ndarray, atol: float = NORM_ATOL) -> np.ndarray:
    """Validate a simplex point (nonnegative, sums to 1) and return it as float array."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -atol):
        raise InvalidStateError(f"simplex point has negative coordinate: min {x.min()}")
    s = x.sum()
    if abs(s - 1.0) > atol:
        raise InvalidStateError(f"simplex point sums to {s}, not 1")
    return x


def check_sphere(y: np.ndarray, atol: float | None = NORM_ATOL) -> np.ndarray:
    """Validate a sphere point (unit Euclidean norm) and return it as float array."""
    y = np.asarray(y, dtype=float)
    if atol is not None:
        nrm = float(np.linalg.norm(y))
        if abs(nrm - 1.0) > atol:
            raise InvalidStateError(f"sphere point has norm {nrm}, not 1")
    return y


def _check_dim(M: PayoffMatrix, v: np.ndarray) -> None:
    if v.shape != (M.n,):
        raise DimensionMismatchError(f"point of shape {v.shape} vs matrix dimension {M.n}")


def potential(M: PayoffMatrix, x: np.ndarray) -> float:
    """F(x) = 1/2 x^T M x for a simplex point x."""
    x = check_simplex(x)
    _check_dim(M, x)
    return 0.5 * float(x @ M.entries @ x)


def simplex_payoff(M: PayoffMatrix, x: np.ndarray) -> np.ndarray:
    """Payoff vector M x; equals the simplex gradient of F since M is symmetric."""
    x = check_simplex(x)
    _check_dim(M, x)
    return M.entries @ x


def sphere_potential(M: PayoffMatrix, y: np.ndarray, atol: float | None = NORM_ATOL) -> float:
    """Lifted potential Ft(y) = F(y^2); even in every coordinate of y.

    Pass atol=None to skip the unit-norm check (used by finite-difference
    probes that evaluate Ft slightly off the sphere).
    """
    y = check_sphere(y, atol)
    _check_dim(M, y)
    x = y * y
    return 0.5 * float(x @ M.entries @ x)


def sphere_gradient(M: PayoffMatrix, y: np.ndarray, atol: float | None = NORM_ATOL) -> np.ndarray:
    """Euclidean gradient of Ft: component i is 2 y_i [M y^2]_i."""
    y = check_sphere(y, atol)
    _check_dim(M, y)
    return 2.0 * y * (M.entries @ (y * y))


def projected_gradient(M: PayoffMatrix, y: np.ndarray, atol: float | None = NORM_ATOL) -> np.ndarray:
    """Gradient of Ft projected onto the tangent space of the sphere at y."""
    y = check_sphere(y, atol)
    g = sphere_gradient(M, y, atol=None)
    return g - float(g @ y) * y
