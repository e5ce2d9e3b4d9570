"""Reproducible experiment harness.

Subcommands: simulate, exit-sweep, stationary, qprocess, bounds, cliques,
gen-graph.  Every experiment takes a flat JSON config file (--config) whose
values are overridden by command-line flags; the fully resolved config is
written next to the outputs so any run can be reproduced after the fact.
Exit codes: 0 success, 1 usage/config error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from replangevin import graphs, metastability, qprocess, sde, stationary
from replangevin.potential import PayoffMatrix, potential, two_edge_matrix
from replangevin.rngs import run_rng

DEFAULTS = {
    "graph": "two-edge",      # "two-edge" | path to graph .json / edge-list .txt
    "matrix": None,           # inline payoff matrix entries (overrides graph)
    "gnp_n": None,            # G(n,p) generation instead of a file
    "gnp_p": 0.25,
    "plant": 0,               # plant a clique on the first k vertices (0 = none)
    "dt": 0.05,
    "eps": 0.05,
    "eps_list": None,
    "steps": 1_000_000,
    "seed": None,             # auto-generated (and printed) when absent
    "runs": metastability.DEFAULT_RUNS,
    "check_stride": metastability.DEFAULT_CHECK_STRIDE,
    "stride": sde.DEFAULT_RECORD_STRIDE,
    "start": "uniform",       # "uniform" | "planted" | "clique:i,j,..." | "x:0.2,0.6,0.2"
    "bins": 64,
    "grid_size": 1024,
    "interval": None,         # [a, b] for the qprocess circle reduction
    "scale": stationary.DEFAULT_EXPONENT_SCALE,
    "jobs": 1,
    "out": "out",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):       # argparse would exit 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        try:
            with open(path) as f:
                file_cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {path}: {e}")
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if cfg["seed"] is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (2**63))
        print(f"auto-generated seed: {cfg['seed']}")
    return cfg


def resolve_graph(cfg: dict) -> tuple[graphs.Graph | None, PayoffMatrix]:
    """Build (graph, payoff matrix) from the config's graph spec."""
    if cfg["matrix"] is not None:
        return None, PayoffMatrix(np.asarray(cfg["matrix"], dtype=float))
    if cfg["gnp_n"] is not None:
        g = graphs.gnp(int(cfg["gnp_n"]), float(cfg["gnp_p"]), int(cfg["seed"]))
    elif cfg["graph"] == "two-edge":
        g = graphs.Graph(n=3, edges=((0, 1), (1, 2)))
    else:
        path = cfg["graph"]
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise UsageError(f"cannot read graph file {path}: {e}")
        if path.endswith(".json"):
            g = graphs.Graph.from_json(text)
        else:
            try:
                g = graphs.Graph.from_edge_list(text)
            except graphs.EdgeListParseError as e:
                raise UsageError(f"{path}: {e}")
    if cfg["plant"]:
        g = graphs.plant_clique(g, range(int(cfg["plant"])))
    return g, graphs.payoff_from_graph(g)


def resolve_start(cfg: dict, g: graphs.Graph | None, n: int) -> np.ndarray:
    spec = cfg["start"]
    if spec == "uniform":
        return np.full(n, 1.0 / n)
    if spec == "planted":
        if g is None or not g.planted:
            raise UsageError("start=planted requires a graph with a planted clique")
        return graphs.characteristic_vector(g.planted, n)
    if spec.startswith("clique:"):
        members = [int(v) for v in spec[len("clique:"):].split(",")]
        return graphs.characteristic_vector(members, n)
    if spec.startswith("x:"):
        x = np.array([float(v) for v in spec[2:].split(",")])
        if len(x) != n:
            raise UsageError(f"start vector has length {len(x)}, expected {n}")
        return x
    raise UsageError(f"unrecognized start spec {spec!r}")


def _prepare_outdir(cfg: dict) -> str:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")
    return out


# --- subcommands ----------------------------------------------------------

def cmd_gen_graph(cfg: dict) -> int:
    if cfg["gnp_n"] is None:
        raise UsageError("gen-graph requires --gnp-n")
    g, _ = resolve_graph(cfg)
    out = _prepare_outdir(cfg)
    path = os.path.join(out, "graph.json")
    with open(path, "w") as f:
        f.write(g.to_json() + "\n")
    print(f"wrote {path} ({g.n} vertices, {g.m} edges)")
    return 0


def cmd_cliques(cfg: dict) -> int:
    g, _ = resolve_graph(cfg)
    if g is None:
        raise UsageError("cliques requires a graph, not an inline matrix")
    cl = graphs.maximal_cliques(g)
    out = _prepare_outdir(cfg)
    path = os.path.join(out, "cliques.json")
    with open(path, "w") as f:
        json.dump({"n": g.n, "count": len(cl),
                   "cliques": [sorted(c) for c in cl]}, f, indent=2)
        f.write("\n")
    sizes = {}
    for c in cl:
        sizes[len(c)] = sizes.get(len(c), 0) + 1
    print(f"{len(cl)} maximal cliques; sizes: {dict(sorted(sizes.items()))}")
    print(f"wrote {path}")
    return 0


def cmd_bounds(cfg: dict) -> int:
    g, M = resolve_graph(cfg)
    result = {"bomze_lower_bound": graphs.bomze_lower_bound(M)}
    if g is not None:
        cl = graphs.maximal_cliques(g)
        kmax = max(len(c) for c in cl)
        result |= {
            "n": g.n,
            "max_clique_size": kmax,
            "clique_potential": {str(len(c)): graphs.clique_potential(len(c))
                                 for c in cl},
            "exit_bound": graphs.exit_bound(g.n, kmax),
            "consistent_exit_bound": graphs.consistent_exit_bound(g.n, kmax),
        }
    if cfg["gnp_n"] is not None:
        n, p = int(cfg["gnp_n"]), float(cfg["gnp_p"])
        result |= {
            "gnp_clique_estimate": graphs.gnp_max_clique_estimate(n, p),
            "gnp_exit_bound": graphs.gnp_exit_bound(n, p),
        }
    out = _prepare_outdir(cfg)
    path = os.path.join(out, "bounds.json")
    with open(path, "w") as f:
        json.dump(result, f, indent=2)
        f.write("\n")
    print(json.dumps(result, indent=2))
    return 0


def cmd_simulate(cfg: dict) -> int:
    g, M = resolve_graph(cfg)
    x0 = resolve_start(cfg, g, M.n)
    icfg = sde.IntegratorConfig(dt=float(cfg["dt"]), eps=float(cfg["eps"]),
                                seed=int(cfg["seed"]), max_steps=int(cfg["steps"]))
    traj = sde.simulate(sde.sqrt_lift(x0), M, icfg,
                        record_stride=int(cfg["stride"]))
    out = _prepare_outdir(cfg)
    traj.to_csv(os.path.join(out, "trajectory.csv"))

    fvals = np.array([potential(M, x) for x in traj.states])
    final_x = traj.states[-1]
    summary = {
        "final_x": final_x.tolist(),
        "final_potential": float(fvals[-1]),
        "potential_min": float(fvals.min()),
        "potential_max": float(fvals.max()),
    }
    if g is not None:
        cliques = graphs.clique_vectors(g)
        label = metastability.classify_basin(final_x, M, cliques)
        summary["final_basin"] = (sorted(label.clique)
                                  if label.clique is not None else None)
        summary["snap_distance"] = label.snap_distance
        if g.planted:
            summary["planted_mass"] = float(final_x[list(g.planted)].sum())
    with open(os.path.join(out, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    print(f"wrote {out}/trajectory.csv and summary.json")
    return 0


def _exit_task(payload):
    """Worker for parallel exit-time runs; payload is fully serializable."""
    (entries, start_members, clique_sets, n, cfg_fields, check_stride,
     master_seed, eps_idx, run) = payload
    M = PayoffMatrix(np.asarray(entries))
    cliques = [graphs.CliqueVector(members=frozenset(c), n=n,
                                   point=graphs.characteristic_vector(c, n))
               for c in clique_sets]
    start = graphs.CliqueVector(members=frozenset(start_members), n=n,
                                point=graphs.characteristic_vector(start_members, n))
    icfg = sde.IntegratorConfig(**cfg_fields)
    return metastability.measure_exit_time(
        M, start, cliques, icfg, check_stride=check_stride,
        rng=run_rng(master_seed, eps_idx, run), run=run, validate_start=False)


def cmd_exit_sweep(cfg: dict) -> int:
    g, M = resolve_graph(cfg)
    if g is None:
        raise UsageError("exit-sweep requires a graph, not an inline matrix")
    eps_list = cfg["eps_list"] if cfg["eps_list"] is not None else [cfg["eps"]]
    if not eps_list:
        raise UsageError("empty eps list")
    cliques = graphs.clique_vectors(g)
    if cfg["start"] == "uniform":        # default start: the largest clique
        start = max(cliques, key=lambda c: (c.size, tuple(sorted(c.members))))
    else:
        x0 = resolve_start(cfg, g, M.n)
        label = metastability.classify_basin(x0, M, cliques)
        if label.clique is None:
            raise UsageError("start point does not classify to any clique basin")
        start = next(c for c in cliques if c.members == label.clique)
    runs = int(cfg["runs"])
    seed = int(cfg["seed"])
    icfg = sde.IntegratorConfig(dt=float(cfg["dt"]), eps=float(eps_list[0]),
                                seed=seed, max_steps=int(cfg["steps"]))
    jobs = int(cfg["jobs"])
    check_stride = int(cfg["check_stride"])

    if jobs > 1:
        clique_sets = [sorted(c.members) for c in cliques]
        cfg_fields = dict(dt=icfg.dt, seed=seed, max_steps=icfg.max_steps)
        rows, all_samples = [], []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for ei, eps in enumerate(eps_list):
                payloads = [(M.entries, sorted(start.members), clique_sets, M.n,
                             cfg_fields | {"eps": float(eps)}, check_stride,
                             seed, ei, r) for r in range(runs)]
                samples = sorted(pool.map(_exit_task, payloads),
                                 key=lambda s: s.run)
                taus = [s.tau for s in samples if not s.censored]
                cens = sum(1 for s in samples if s.censored)
                if taus:
                    mean = float(np.mean(taus))
                    rows.append(metastability.SweepRow(
                        eps=eps, mean_tau=mean,
                        eps2_log_mean=eps * eps * math.log(mean),
                        n_samples=len(taus), n_censored=cens))
                else:
                    rows.append(metastability.SweepRow(
                        eps=eps, mean_tau=None, eps2_log_mean=None,
                        n_samples=0, n_censored=cens))
                all_samples.extend(samples)
        result = metastability.SweepResult(rows=rows, samples=all_samples)
    else:
        result = metastability.exit_time_sweep(M, start, cliques, eps_list,
                                               runs, icfg,
                                               check_stride=check_stride)
    out = _prepare_outdir(cfg)
    metastability.samples_to_csv(result.samples, os.path.join(out, "samples.csv"))
    metastability.sweep_to_json(result, os.path.join(out, "sweep.json"))
    if len(eps_list) == 1:
        uncensored = [s for s in result.samples if not s.censored]
        if len(uncensored) >= 10:
            stats = metastability.ccdf_and_fit(uncensored)
            metastability.ccdf_to_csv(stats, os.path.join(out, "ccdf.csv"))
    for r in result.rows:
        print(f"eps={r.eps}: mean_tau={r.mean_tau}, "
              f"eps^2 log mean = {r.eps2_log_mean}, "
              f"samples={r.n_samples}, censored={r.n_censored}")
    print(f"wrote {out}/samples.csv, sweep.json")
    return 0


def cmd_stationary(cfg: dict) -> int:
    _, M = resolve_graph(cfg)
    if M.n != 2:
        raise UsageError("stationary validation supports n=2 only")
    eps = float(cfg["eps"])
    oracle = stationary.circle_stationary_oracle(M, eps, int(cfg["grid_size"]))
    hist = stationary.sample_angle_histogram(M, eps, float(cfg["dt"]),
                                             int(cfg["steps"]), int(cfg["seed"]),
                                             bins=int(cfg["bins"]))
    tv = stationary.tv_distance(hist, oracle)
    scale, errors = stationary.select_exponent_scale(M, eps, int(cfg["grid_size"]))
    out = _prepare_outdir(cfg)
    oracle.to_csv(os.path.join(out, "density.csv"))
    hist.to_csv(os.path.join(out, "histogram.csv"))
    with open(os.path.join(out, "report.json"), "w") as f:
        json.dump({"tv_distance": tv, "selected_exponent_scale": scale,
                   "scale_errors": {str(k): v for k, v in errors.items()}},
                  f, indent=2)
        f.write("\n")
    print(f"TV distance: {tv:.4f}; matching exponent scale: {scale}")
    print(f"wrote {out}/density.csv, histogram.csv, report.json")
    return 0


def cmd_qprocess(cfg: dict) -> int:
    _, M = resolve_graph(cfg)
    if M.n != 2:
        raise UsageError("qprocess validation supports n=2 only")
    if cfg["interval"] is None:
        interval = (math.pi / 4.0, 3.0 * math.pi / 4.0)
    else:
        interval = tuple(float(v) for v in cfg["interval"])
    eps = float(cfg["eps"])
    red = qprocess.reduce_to_circle(M, interval, int(cfg["grid_size"]))
    op = qprocess.dirichlet_generator(red, eps)
    eig = qprocess.principal_eigenpair(op)
    report = qprocess.validate_qprocess(red, eig, eps, seed0=int(cfg["seed"]),
                                        exponent_scale=float(cfg["scale"]))
    out = _prepare_outdir(cfg)
    eig.to_csv(os.path.join(out, "eigenpair.csv"))
    report.to_json(os.path.join(out, "report.json"))
    print(f"lambda0={report.lambda0:.6g}, confined={report.confined}, "
          f"TV={report.tv_distance:.4f}, "
          f"1/lambda0={report.inv_lambda0:.4g} vs MC exit {report.mc_mean_exit:.4g}")
    print(f"wrote {out}/eigenpair.csv, report.json")
    return 0 if report.passed else 2


COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "cliques": cmd_cliques,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "exit-sweep": cmd_exit_sweep,
    "stationary": cmd_stationary,
    "qprocess": cmd_qprocess,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="replangevin",
                description="Stochastic replicator dynamics on graphs: "
                            "simulation and metastability experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--graph", help="'two-edge' or a graph file (.json or edge list)")
        sp.add_argument("--gnp-n", dest="gnp_n", type=int)
        sp.add_argument("--gnp-p", dest="gnp_p", type=float)
        sp.add_argument("--plant", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--eps-list", dest="eps_list", type=float, nargs="+")
        sp.add_argument("--steps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--runs", type=int)
        sp.add_argument("--check-stride", dest="check_stride", type=int)
        sp.add_argument("--stride", type=int)
        sp.add_argument("--start")
        sp.add_argument("--bins", type=int)
        sp.add_argument("--grid-size", dest="grid_size", type=int)
        sp.add_argument("--interval", type=float, nargs=2)
        sp.add_argument("--scale", type=float)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ArithmeticError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
