"""Shared fixtures, plus the experiment harness behind the acceptance tests.

The longer acceptance experiments (exit sweeps, Gibbs sampling, planted-clique
runs) are executed through the CLI or small library drivers that write their
results to files.  Each experiment runs at most once per session and is cached
by name; the determinism test replays the same configs into a second directory
and compares bytes.
"""

import json
import math

import numpy as np
import pytest

from replangevin import cli, qprocess
from replangevin.potential import PayoffMatrix

QUARTER_CIRCLE = (math.pi / 4.0, 3.0 * math.pi / 4.0)


def half_identity(n=2):
    return PayoffMatrix(0.5 * np.eye(n))


# --- acceptance experiment drivers ---------------------------------------

def run_circle_exit_oracle(out):
    """MC vs finite-difference mean exit time on the zero-drift circle basin."""
    red = qprocess.reduce_to_circle(half_identity(), QUARTER_CIRCLE, 1024)
    theta0 = math.pi / 2.0
    fd = qprocess.mean_exit_time_fd(red, 0.2, theta0=theta0)
    mc, censored = qprocess.mc_mean_exit_time(red, 0.2, dt=0.005, runs=500,
                                              seed=777, theta0=theta0)
    with open(out / "exit_oracle.json", "w") as f:
        json.dump({"fd_mean_exit": fd, "mc_mean_exit": mc,
                   "censored": censored, "runs": 500}, f, indent=2)
        f.write("\n")


def run_gibbs_validation(out):
    cli_run("stationary",
            "--eps", "0.3", "--dt", "0.01", "--steps", "5000000",
            "--seed", "101", "--bins", "64", "--grid-size", "2048",
            "--out", str(out), config={"matrix": [[0.5, 0.0], [0.0, 0.5]]},
            config_dir=out.parent)


def run_exponential_exits(out):
    cli_run("exit-sweep", "--eps", "0.1", "--runs", "200",
            "--steps", "1000000", "--seed", "404", "--check-stride", "100",
            "--out", str(out))


def run_asymptotic_sweep(out):
    cli_run("exit-sweep", "--eps-list", "0.10", "0.09", "0.08", "0.07",
            "--runs", "200", "--steps", "10000000", "--seed", "909",
            "--check-stride", "100", "--out", str(out))


def run_planted_clique(out):
    cli_run("gen-graph", "--gnp-n", "100", "--gnp-p", "0.25",
            "--seed", "2024", "--out", str(out / "graph"))
    graph_path = str(out / "graph" / "graph.json")
    for run in range(20):
        cli_run("simulate", "--graph", graph_path, "--plant", "10",
                "--eps", "0.02", "--dt", "0.05", "--steps", "7000",
                "--seed", str(500 + run), "--start", "uniform",
                "--out", str(out / f"run_{run:02d}"))


RUNNERS = {
    "circle_exit_oracle": run_circle_exit_oracle,
    "gibbs_validation": run_gibbs_validation,
    "exponential_exits": run_exponential_exits,
    "asymptotic_sweep": run_asymptotic_sweep,
    "planted_clique": run_planted_clique,
}


def cli_run(*args, config=None, config_dir=None):
    argv = list(args[:1])
    if config is not None:
        path = config_dir / "input_config.json"
        if not path.exists():
            with open(path, "w") as f:
                json.dump(config, f)
        argv += ["--config", str(path)]
    argv += list(args[1:])
    rc = cli.main(argv)
    assert rc == 0, f"CLI {args[0]} exited with {rc}"


class ExperimentCache:
    def __init__(self, base):
        self.base = base
        self._done = {}

    def results(self, name):
        """Directory with the (cached) outputs of one named experiment."""
        if name not in self._done:
            d = self.base / name / "first"
            d.mkdir(parents=True)
            RUNNERS[name](d)
            self._done[name] = d
        return self._done[name]

    def rerun(self, name):
        """Fresh replay of the same experiment into a sibling directory."""
        d = self.base / name / "replay"
        d.mkdir(parents=True)
        RUNNERS[name](d)
        return d


@pytest.fixture(scope="session")
def experiments(tmp_path_factory):
    return ExperimentCache(tmp_path_factory.mktemp("experiments"))
