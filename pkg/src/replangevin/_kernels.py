"""Numba kernels for the inner integration loops.

Everything here is a serial recurrence; the kernels exist because exit-time
sweeps and grid classification run 10^7..10^9 steps, which is out of reach for
per-step Python.  All kernels take plain float64 arrays and mutate the state
in place; seeding and bookkeeping stay in the calling modules.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def advance(y, M, dt, eps, sign, noise):
    """Advance the sphere state through noise.shape[0] Euler steps in place.

    One step: yhat = y + sign*(dt/4)*proj_grad + eps*sqrt(dt)*(I - y y^T) w,
    then renormalize.  Returns the number of steps done, or -(k+1) if the
    renormalization denominator vanished at step k.
    """
    n = y.shape[0]
    x = np.empty(n)
    g = np.empty(n)
    yh = np.empty(n)
    sdt = np.sqrt(dt)
    for s in range(noise.shape[0]):
        for i in range(n):
            x[i] = y[i] * y[i]
        ip = 0.0
        for i in range(n):
            mi = 0.0
            for j in range(n):
                mi += M[i, j] * x[j]
            g[i] = 2.0 * y[i] * mi
            ip += g[i] * y[i]
        wy = 0.0
        for i in range(n):
            wy += noise[s, i] * y[i]
        nrm2 = 0.0
        for i in range(n):
            yh[i] = (y[i]
                     + sign * 0.25 * dt * (g[i] - ip * y[i])
                     + eps * sdt * (noise[s, i] - wy * y[i]))
            nrm2 += yh[i] * yh[i]
        if nrm2 == 0.0:
            return -(s + 1)
        inv = 1.0 / np.sqrt(nrm2)
        for i in range(n):
            y[i] = yh[i] * inv
    return noise.shape[0]


@njit(cache=True)
def advance_angles(y, M, dt, eps, noise, out):
    """advance() for n=2 that also records atan2(y_2, y_1) mod 2pi per step."""
    res = -1
    for s in range(noise.shape[0]):
        r = advance(y, M, dt, eps, 1.0, noise[s:s + 1])
        if r < 0:
            return -(s + 1)
        th = np.arctan2(y[1], y[0])
        if th < 0.0:
            th += 2.0 * np.pi
        out[s] = th
        res = s + 1
    return res


@njit(cache=True)
def flow(y, M, dt, grad_tol, max_steps):
    """Noiseless projected gradient ascent until ||proj_grad|| < grad_tol.

    Mutates y; returns the number of steps taken, or -1 if max_steps was
    reached without convergence.
    """
    n = y.shape[0]
    x = np.empty(n)
    g = np.empty(n)
    yh = np.empty(n)
    for s in range(max_steps + 1):
        for i in range(n):
            x[i] = y[i] * y[i]
        ip = 0.0
        for i in range(n):
            mi = 0.0
            for j in range(n):
                mi += M[i, j] * x[j]
            g[i] = 2.0 * y[i] * mi
            ip += g[i] * y[i]
        pg2 = 0.0
        for i in range(n):
            gi = g[i] - ip * y[i]
            yh[i] = gi
            pg2 += gi * gi
        if np.sqrt(pg2) < grad_tol:
            return s
        if s == max_steps:
            return -1
        nrm2 = 0.0
        for i in range(n):
            yh[i] = y[i] + 0.25 * dt * yh[i]
            nrm2 += yh[i] * yh[i]
        inv = 1.0 / np.sqrt(nrm2)
        for i in range(n):
            y[i] = yh[i] * inv
    return -1


@njit(cache=True)
def _l1_match(y, cliq):
    """Index and L1 distance of the clique point closest to x = y^2."""
    k = cliq.shape[0]
    n = cliq.shape[1]
    best = -1
    best_d = 1.0e300
    for c in range(k):
        d = 0.0
        for i in range(n):
            d += abs(y[i] * y[i] - cliq[c, i])
        if d < best_d:
            best_d = d
            best = c
    return best, best_d


@njit(cache=True)
def classify(y, M, dt, grad_tol, max_steps, cliq, tol_snap, early_tol, check_every):
    """Flow-based basin classification.

    Runs the noiseless flow from y (mutated).  Every check_every steps the
    current x is matched against the clique points; within early_tol the flow
    is already inside that clique's attracting neighborhood and the final label
    is decided.  On gradient convergence the match must be within tol_snap.

    Returns (label index or -1, snap L1 distance, converged flag 0/1).
    """
    n = y.shape[0]
    x = np.empty(n)
    g = np.empty(n)
    yh = np.empty(n)
    for s in range(max_steps + 1):
        if s % check_every == 0 and s > 0:
            c, d = _l1_match(y, cliq)
            if d < early_tol:
                return c, d, 1
        for i in range(n):
            x[i] = y[i] * y[i]
        ip = 0.0
        for i in range(n):
            mi = 0.0
            for j in range(n):
                mi += M[i, j] * x[j]
            g[i] = 2.0 * y[i] * mi
            ip += g[i] * y[i]
        pg2 = 0.0
        for i in range(n):
            gi = g[i] - ip * y[i]
            yh[i] = gi
            pg2 += gi * gi
        if np.sqrt(pg2) < grad_tol:
            c, d = _l1_match(y, cliq)
            if d < tol_snap:
                return c, d, 1
            return -1, d, 1
        if s == max_steps:
            c, d = _l1_match(y, cliq)
            return -1, d, 0
        nrm2 = 0.0
        for i in range(n):
            yh[i] = y[i] + 0.25 * dt * yh[i]
            nrm2 += yh[i] * yh[i]
        inv = 1.0 / np.sqrt(nrm2)
        for i in range(n):
            y[i] = yh[i] * inv
    return -1, 1.0e300, 0


@njit(cache=True)
def classify_grid3(res, M, dt, grad_tol, max_steps, cliq, tol_snap, early_tol):
    """Classify every node of the barycentric grid {(i,j,res-i-j)/res} (n=3).

    Returns an (res+1, res+1) int64 array of clique indices, -1 for
    unclassified nodes, -2 for nodes outside the simplex.
    """
    labels = np.full((res + 1, res + 1), -2, dtype=np.int64)
    y = np.empty(3)
    for i in range(res + 1):
        for j in range(res + 1 - i):
            k = res - i - j
            y[0] = np.sqrt(i / res)
            y[1] = np.sqrt(j / res)
            y[2] = np.sqrt(k / res)
            c, _, ok = classify(y, M, dt, grad_tol, max_steps, cliq,
                                tol_snap, early_tol, 50)
            labels[i, j] = c if ok == 1 else -1
    return labels


@njit(cache=True)
def circle_run(theta, grid_a, h, drift, eps, dt, noise, lo, hi):
    """1D Euler-Maruyama on [lo, hi] with drift linearly interpolated on a grid.

    Outside the grid the drift is clamped to the end values (guard band for
    the Q-process where d/dtheta log(phi) diverges at the boundary).

    Returns (exit step 1-based or -1 if confined, final theta).
    """
    m = drift.shape[0]
    sdt = np.sqrt(dt)
    for s in range(noise.shape[0]):
        t = (theta - grid_a) / h
        k = int(np.floor(t))
        if k < 0:
            b = drift[0]
        elif k >= m - 1:
            b = drift[m - 1]
        else:
            frac = t - k
            b = drift[k] * (1.0 - frac) + drift[k + 1] * frac
        theta = theta + b * dt + eps * sdt * noise[s]
        if theta <= lo or theta >= hi:
            return s + 1, theta
    return -1, theta


@njit(cache=True)
def circle_run_record(theta, grid_a, h, drift, eps, dt, noise, lo, hi, stride, out):
    """circle_run that records theta every `stride` steps into out."""
    m = drift.shape[0]
    sdt = np.sqrt(dt)
    w = 0
    for s in range(noise.shape[0]):
        t = (theta - grid_a) / h
        k = int(np.floor(t))
        if k < 0:
            b = drift[0]
        elif k >= m - 1:
            b = drift[m - 1]
        else:
            frac = t - k
            b = drift[k] * (1.0 - frac) + drift[k + 1] * frac
        theta = theta + b * dt + eps * sdt * noise[s]
        if (s + 1) % stride == 0 and w < out.shape[0]:
            out[w] = theta
            w += 1
        if theta <= lo or theta >= hi:
            return s + 1, theta, w
    return -1, theta, w
