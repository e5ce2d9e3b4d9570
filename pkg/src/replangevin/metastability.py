"""Basin classification, exit-time experiments, and exit statistics.

A basin is identified by the noiseless flow: a point belongs to the clique
whose characteristic vector the flow limit snaps to (L1 distance below
tol_snap).  Exit times are measured by classifying the noisy trajectory every
check_stride steps, so the time resolution is check_stride * dt.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from replangevin import _kernels
from replangevin.graphs import CliqueVector
from replangevin.potential import PayoffMatrix, potential, check_simplex
from replangevin.rngs import run_rng
from replangevin.sde import IntegratorConfig, sqrt_lift

TOL_SNAP = 1e-3          # L1 snap distance between flow limit and clique vector
EARLY_SNAP = 1e-6        # inside this L1 ball of a clique point the label is decided
FLOW_GRAD_TOL = 1e-8
FLOW_MAX_STEPS = 200_000
DEFAULT_CHECK_STRIDE = 100
DEFAULT_RUNS = 200       # runs per noise level in a sweep; enough for the mean
                         # exit time to stabilize to a few percent


@dataclass(frozen=True)
class FlowParams:
    dt: float = 0.05
    grad_tol: float = FLOW_GRAD_TOL
    max_steps: int = FLOW_MAX_STEPS


@dataclass(frozen=True)
class BasinLabel:
    """Clique the flow limit snapped to; clique=None means unclassified.

    A point whose flow limit is an equilibrium that is not a clique vector
    (e.g. the exact saddle between two basins, where the flow stalls in place)
    is deterministically unclassified.
    """

    clique: frozenset | None
    snap_distance: float
    converged: bool = True


@dataclass(frozen=True)
class ExitTimeSample:
    tau: float
    steps: int
    start: frozenset
    end: frozenset | None
    eps: float
    seed: int
    run: int = 0
    censored: bool = False


@dataclass
class ExitStats:
    """Aggregate exit statistics: mean, rate, empirical CCDF and log-linear fit."""

    taus: np.ndarray
    mean: float
    rate: float
    ccdf: np.ndarray          # rows (t, fraction > t)
    slope: float
    intercept: float
    r2_loglinear: float
    degenerate: bool = False


@dataclass
class SweepRow:
    eps: float
    mean_tau: float | None
    eps2_log_mean: float | None
    n_samples: int
    n_censored: int


@dataclass
class SweepResult:
    rows: list
    samples: list


def _clique_matrix(cliques: list[CliqueVector]) -> np.ndarray:
    if not cliques:
        raise ValueError("need at least one clique")
    return np.ascontiguousarray(np.vstack([c.point for c in cliques]))


def classify_basin(x: np.ndarray, M: PayoffMatrix, cliques: list[CliqueVector],
                   flow: FlowParams = FlowParams(),
                   tol_snap: float = TOL_SNAP) -> BasinLabel:
    """Label x with the clique whose basin contains it, via the noiseless flow."""
    x = check_simplex(x)
    y = sqrt_lift(x)
    cliq = _clique_matrix(cliques)
    idx, dist, ok = _kernels.classify(y, M.entries, flow.dt, flow.grad_tol,
                                      flow.max_steps, cliq, tol_snap,
                                      EARLY_SNAP, 50)
    if ok != 1:
        return BasinLabel(clique=None, snap_distance=float(dist), converged=False)
    if idx < 0:
        return BasinLabel(clique=None, snap_distance=float(dist))
    return BasinLabel(clique=cliques[idx].members, snap_distance=float(dist))


def measure_exit_time(M: PayoffMatrix, start: CliqueVector,
                      cliques: list[CliqueVector], cfg: IntegratorConfig,
                      check_stride: int = DEFAULT_CHECK_STRIDE,
                      flow: FlowParams = FlowParams(),
                      tol_snap: float = TOL_SNAP,
                      rng: np.random.Generator | None = None,
                      run: int = 0,
                      validate_start: bool = True) -> ExitTimeSample:
    """First time the trajectory from start's characteristic vector leaves its basin.

    The state is classified every check_stride steps; the returned tau is the
    step count at the first foreign label times dt.  If max_steps is exhausted
    first, the sample is censored (tau is then a lower bound, excluded from
    means).
    """
    if check_stride < 1:
        raise ValueError("check_stride must be positive")
    if validate_start:
        lab = classify_basin(start.point, M, cliques, flow=flow, tol_snap=tol_snap)
        if lab.clique != start.members:
            raise ValueError(f"start point does not classify to its own clique: {lab}")
    cliq = _clique_matrix(cliques)
    members = [c.members for c in cliques]
    if rng is None:
        rng = run_rng(cfg.seed, run)
    sign = -1.0 if cfg.descent else 1.0
    y = sqrt_lift(start.point)
    n = y.shape[0]
    k = 0
    while k < cfg.max_steps:
        block = min(check_stride, cfg.max_steps - k)
        noise = rng.standard_normal((block, n))
        r = _kernels.advance(y, M.entries, cfg.dt, cfg.eps, sign, noise)
        if r < 0:
            raise ArithmeticError(f"renormalization failed at step {k - r}")
        k += block
        idx, dist, ok = _kernels.classify(y.copy(), M.entries, flow.dt,
                                          flow.grad_tol, flow.max_steps, cliq,
                                          tol_snap, EARLY_SNAP, 50)
        label = members[idx] if (ok == 1 and idx >= 0) else None
        if label != start.members:
            return ExitTimeSample(tau=k * cfg.dt, steps=k, start=start.members,
                                  end=label, eps=cfg.eps, seed=cfg.seed, run=run)
    return ExitTimeSample(tau=cfg.max_steps * cfg.dt, steps=cfg.max_steps,
                          start=start.members, end=None, eps=cfg.eps,
                          seed=cfg.seed, run=run, censored=True)


def exit_time_sweep(M: PayoffMatrix, start: CliqueVector,
                    cliques: list[CliqueVector], eps_list, runs: int,
                    cfg: IntegratorConfig,
                    check_stride: int = DEFAULT_CHECK_STRIDE,
                    flow: FlowParams = FlowParams(),
                    map_runs=map) -> SweepResult:
    """Seeded exit-time experiment over a list of noise levels.

    Each (eps, run) pair gets an independent stream derived from cfg.seed, so
    results do not depend on execution order; `map_runs` may be a parallel map.
    Rows where every run was censored carry mean_tau=None.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("empty eps list")
    # validate the start label once, not per run
    lab = classify_basin(start.point, M, cliques, flow=flow)
    if lab.clique != start.members:
        raise ValueError("start point does not classify to its own clique")

    rows = []
    all_samples = []
    for ei, eps in enumerate(eps_list):
        cfg_e = cfg.with_eps(eps)

        def one(run, _ei=ei, _cfg=cfg_e):
            return measure_exit_time(M, start, cliques, _cfg,
                                     check_stride=check_stride, flow=flow,
                                     rng=run_rng(cfg.seed, _ei, run), run=run,
                                     validate_start=False)

        samples = sorted(map_runs(one, range(runs)), key=lambda s: s.run)
        taus = [s.tau for s in samples if not s.censored]
        n_cens = sum(1 for s in samples if s.censored)
        if taus:
            mean = float(np.mean(taus))
            rows.append(SweepRow(eps=eps, mean_tau=mean,
                                 eps2_log_mean=eps * eps * math.log(mean),
                                 n_samples=len(taus), n_censored=n_cens))
        else:
            rows.append(SweepRow(eps=eps, mean_tau=None, eps2_log_mean=None,
                                 n_samples=0, n_censored=n_cens))
        all_samples.extend(samples)
    return SweepResult(rows=rows, samples=all_samples)


def theoretical_exit_rate(F_star: float, F_saddle: float) -> float:
    """Small-noise limit of eps^2 log E[tau]: half the potential barrier."""
    if F_star < F_saddle:
        raise ValueError("negative barrier: F_star < F_saddle")
    return 0.5 * (F_star - F_saddle)


@dataclass
class SeparatrixResult:
    value: float
    point: np.ndarray


def estimate_separatrix_max(M: PayoffMatrix, cliques: list[CliqueVector],
                            grid_resolution: int,
                            flow: FlowParams = FlowParams()) -> SeparatrixResult | None:
    """Max of F over grid nodes adjacent to a differently-labeled node (n <= 3).

    Grids the simplex at spacing 1/grid_resolution, classifies every node, and
    scans grid edges for label changes.  Returns None when all nodes share one
    label (single basin).
    """
    n = M.n
    if n > 3:
        raise ValueError("separatrix grid search supports n <= 3 only")
    if grid_resolution < 2:
        raise ValueError("grid resolution too coarse")
    cliq = _clique_matrix(cliques)
    res = grid_resolution

    if n == 2:
        labels = np.empty(res + 1, dtype=np.int64)
        for i in range(res + 1):
            y = np.sqrt(np.array([i / res, 1.0 - i / res]))
            idx, _, ok = _kernels.classify(y, M.entries, flow.dt, flow.grad_tol,
                                           flow.max_steps, cliq, TOL_SNAP,
                                           EARLY_SNAP, 50)
            labels[i] = idx if ok == 1 else -1
        best = None
        for i in range(res):
            if labels[i] != labels[i + 1]:
                for j in (i, i + 1):
                    x = np.array([j / res, 1.0 - j / res])
                    v = potential(M, x)
                    if best is None or v > best.value:
                        best = SeparatrixResult(value=v, point=x)
        return best

    labels = _kernels.classify_grid3(res, M.entries, flow.dt, flow.grad_tol,
                                     flow.max_steps, cliq, TOL_SNAP, EARLY_SNAP)
    best = None
    # grid-graph neighbors on the triangular lattice (i,j) -> i+j <= res
    deltas = ((1, 0), (0, 1), (1, -1))
    for i in range(res + 1):
        for j in range(res + 1 - i):
            for di, dj in deltas:
                a, b = i + di, j + dj
                if a < 0 or b < 0 or a + b > res:
                    continue
                if labels[i, j] != labels[a, b]:
                    for (u, v) in ((i, j), (a, b)):
                        x = np.array([u / res, v / res, (res - u - v) / res])
                        val = potential(M, x)
                        if best is None or val > best.value:
                            best = SeparatrixResult(value=val, point=x)
    return best


def ccdf_and_fit(samples, min_samples: int = 10) -> ExitStats:
    """Empirical CCDF of exit times and a least-squares line fit to its log.

    Accepts ExitTimeSamples (censored ones are dropped) or raw times.  The
    final point, where the CCDF reaches 0, is excluded from the fit.
    """
    taus = np.sort(np.array([s.tau for s in samples if not getattr(s, "censored", False)]
                            if samples and isinstance(samples[0], ExitTimeSample)
                            else samples, dtype=float))
    if len(taus) < min_samples:
        raise ValueError(f"need at least {min_samples} uncensored samples, got {len(taus)}")
    ncount = len(taus)
    frac = 1.0 - np.arange(1, ncount + 1) / ncount   # P(tau > t_i)
    ccdf = np.column_stack([taus, frac])
    mean = float(taus.mean())

    t_fit = taus[:-1]
    log_c = np.log(frac[:-1])
    var_t = float(np.var(t_fit))
    if var_t == 0.0:
        return ExitStats(taus=taus, mean=mean, rate=1.0 / mean, ccdf=ccdf,
                         slope=0.0, intercept=0.0, r2_loglinear=0.0,
                         degenerate=True)
    slope, intercept = np.polyfit(t_fit, log_c, 1)
    pred = slope * t_fit + intercept
    ss_res = float(np.sum((log_c - pred) ** 2))
    ss_tot = float(np.sum((log_c - log_c.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    return ExitStats(taus=taus, mean=mean, rate=1.0 / mean, ccdf=ccdf,
                     slope=float(slope), intercept=float(intercept),
                     r2_loglinear=float(r2))


# --- file formats ---------------------------------------------------------

def _label_str(members: frozenset | None) -> str:
    if members is None:
        return "unclassified"
    return "|".join(str(v) for v in sorted(members))


def samples_to_csv(samples, path) -> None:
    with open(path, "w") as f:
        f.write("run,seed,eps,tau,steps,start,end,censored\n")
        for s in samples:
            f.write(f"{s.run},{s.seed},{'%.17g' % s.eps},{'%.17g' % s.tau},"
                    f"{s.steps},{_label_str(s.start)},{_label_str(s.end)},"
                    f"{int(s.censored)}\n")


def sweep_to_json(result: SweepResult, path) -> None:
    rows = [{"eps": r.eps, "mean_tau": r.mean_tau,
             "eps2_log_mean": r.eps2_log_mean, "n_samples": r.n_samples,
             "n_censored": r.n_censored} for r in result.rows]
    with open(path, "w") as f:
        json.dump({"rows": rows}, f, indent=2)
        f.write("\n")


def ccdf_to_csv(stats: ExitStats, path) -> None:
    with open(path, "w") as f:
        f.write("t,ccdf\n")
        for t, c in stats.ccdf:
            f.write(f"{'%.17g' % t},{'%.17g' % c}\n")
