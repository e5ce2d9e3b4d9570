"""Stochastic replicator dynamics as a Langevin diffusion on the unit sphere.

Quadratic potentials F(x) = 1/2 x^T M x on the probability simplex, lifted to
the sphere by y = sqrt(x), are simulated with a projected Euler-Maruyama scheme
with renormalization.  The package covers graph-derived payoff matrices and
clique structure, exit-time experiments and their small-noise asymptotics,
Gibbs stationary densities, and the quasi-stationary (Q-process) diffusion on
the n=2 circle reduction.
"""

from replangevin.potential import (
    PayoffMatrix,
    potential,
    simplex_payoff,
    sphere_potential,
    sphere_gradient,
    projected_gradient,
)
from replangevin.graphs import (
    Graph,
    CliqueVector,
    gnp,
    plant_clique,
    payoff_from_graph,
    maximal_cliques,
    characteristic_vector,
    clique_vector,
    clique_potential,
    bomze_lower_bound,
    exit_bound,
    consistent_exit_bound,
    gnp_exit_bound,
)
from replangevin.sde import (
    IntegratorConfig,
    TrajectoryRecord,
    FlowResult,
    step,
    simulate,
    deterministic_flow,
    to_simplex,
    sqrt_lift,
)

__all__ = [
    "PayoffMatrix",
    "potential",
    "simplex_payoff",
    "sphere_potential",
    "sphere_gradient",
    "projected_gradient",
    "Graph",
    "CliqueVector",
    "gnp",
    "plant_clique",
    "payoff_from_graph",
    "maximal_cliques",
    "characteristic_vector",
    "clique_vector",
    "clique_potential",
    "bomze_lower_bound",
    "exit_bound",
    "consistent_exit_bound",
    "gnp_exit_bound",
    "IntegratorConfig",
    "TrajectoryRecord",
    "FlowResult",
    "step",
    "simulate",
    "deterministic_flow",
    "to_simplex",
    "sqrt_lift",
]

__version__ = "0.1.0"
