"""Graphs, cliques, and the exit-time bound formulas for M = A + I/2.

With the payoff matrix M = A + I/2 built from a graph's adjacency matrix A,
strict local maxima of F over the simplex are exactly the characteristic
vectors of maximal cliques, with value F(x_C) = 1/2 (1 - 1/(2|C|)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from replangevin.potential import PayoffMatrix
from replangevin.rngs import master_rng


class CliqueLimitError(RuntimeError):
    """Maximal-clique enumeration exceeded the configured output cap."""


class EdgeListParseError(ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1.

    Edges are stored as a sorted tuple of (i, j) pairs with i < j, which makes
    serialization deterministic.  `planted` optionally records a clique that
    was inserted by plant_clique.
    """

    n: int
    edges: tuple = ()
    planted: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        norm = set()
        for (i, j) in self.edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "planted", tuple(sorted(set(self.planted))))

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for (i, j) in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbors(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for (i, j) in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return nbrs

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in set(self.edges)

    def to_json(self) -> str:
        obj = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if self.planted:
            obj["planted"] = list(self.planted)
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        obj = json.loads(text)
        return cls(n=obj["n"],
                   edges=tuple(tuple(e) for e in obj["edges"]),
                   planted=tuple(obj.get("planted", ())))

    @classmethod
    def from_edge_list(cls, text: str, n: int | None = None) -> "Graph":
        """Parse plain-text edge lists: one "i j" pair per line, '#' comments."""
        edges = []
        max_v = -1
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise EdgeListParseError(lineno, f"expected two vertex indices, got {raw!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListParseError(lineno, f"non-integer vertex in {raw!r}") from None
            if i < 0 or j < 0:
                raise EdgeListParseError(lineno, "negative vertex index")
            if i == j:
                raise EdgeListParseError(lineno, f"self-loop at vertex {i}")
            edges.append((i, j))
            max_v = max(max_v, i, j)
        size = n if n is not None else max_v + 1
        if size < 1:
            raise ValueError("empty edge list and no vertex count given")
        return cls(n=size, edges=tuple(edges))


@dataclass(frozen=True)
class CliqueVector:
    """A clique with its characteristic simplex vector (mass 1/|C| on members)."""

    members: frozenset
    n: int
    point: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).copy()
        p.setflags(write=False)
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "members", frozenset(self.members))

    @property
    def size(self) -> int:
        return len(self.members)


def gnp(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p) sample, deterministic given the seed.

    Consumes exactly C(n,2) uniforms in row-major pair order (0,1), (0,2), ...
    so the generated graph is reproducible across platforms.
    """
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"edge probability {p} outside [0, 1]")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = master_rng(seed)
    draws = rng.random(n * (n - 1) // 2)
    edges = []
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            if draws[k] < p:
                edges.append((i, j))
            k += 1
    return Graph(n=n, edges=tuple(edges))


def plant_clique(g: Graph, members) -> Graph:
    """Add all missing edges among `members`; records them as the planted clique."""
    members = sorted(set(members))
    for v in members:
        if not (0 <= v < g.n):
            raise ValueError(f"vertex {v} out of range for n={g.n}")
    extra = [(i, j) for a, i in enumerate(members) for j in members[a + 1:]]
    return Graph(n=g.n, edges=g.edges + tuple(extra), planted=tuple(members))


def payoff_from_graph(g: Graph) -> PayoffMatrix:
    """M = A + I/2: adjacency matrix plus half the identity."""
    return PayoffMatrix(g.adjacency() + 0.5 * np.eye(g.n))


def maximal_cliques(g: Graph, cap: int = 1_000_000) -> list[frozenset]:
    """All maximal cliques via Bron-Kerbosch with pivoting.

    Output is sorted by (size, member tuple) for determinism.  Raises
    CliqueLimitError when more than `cap` cliques are found; enumeration can be
    exponential, intended use is n up to a few hundred.
    """
    nbrs = g.neighbors()
    out: list[frozenset] = []

    def expand(r: set, p: set, x: set):
        if not p and not x:
            out.append(frozenset(r))
            if len(out) > cap:
                raise CliqueLimitError(f"more than {cap} maximal cliques")
            return
        pivot = max(p | x, key=lambda v: len(nbrs[v] & p))
        for v in sorted(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(range(g.n)), set())
    return sorted(out, key=lambda c: (len(c), tuple(sorted(c))))


def characteristic_vector(members, n: int) -> np.ndarray:
    """Simplex point with mass 1/|C| on the members of C, 0 elsewhere."""
    members = sorted(set(members))
    if not members:
        raise ValueError("empty vertex set")
    if members[0] < 0 or members[-1] >= n:
        raise ValueError(f"vertex out of range for n={n}")
    x = np.zeros(n)
    x[members] = 1.0 / len(members)
    return x


def clique_vector(g: Graph, members) -> CliqueVector:
    """CliqueVector for a vertex set, validating pairwise adjacency in g."""
    members = sorted(set(members))
    edge_set = set(g.edges)
    for a, i in enumerate(members):
        for j in members[a + 1:]:
            if (i, j) not in edge_set:
                raise ValueError(f"vertices {i},{j} not adjacent; not a clique")
    return CliqueVector(members=frozenset(members), n=g.n,
                        point=characteristic_vector(members, g.n))


def clique_vectors(g: Graph, cap: int = 1_000_000) -> list[CliqueVector]:
    """CliqueVectors of all maximal cliques of g."""
    return [CliqueVector(members=c, n=g.n, point=characteristic_vector(c, g.n))
            for c in maximal_cliques(g, cap=cap)]


def clique_potential(k: int) -> float:
    """F at the characteristic vector of a size-k clique under M = A + I/2."""
    if k < 1:
        raise ValueError("clique size must be >= 1")
    return 0.5 * (1.0 - 1.0 / (2.0 * k))


def bomze_lower_bound(M: PayoffMatrix) -> float:
    """Lower bound for F over the simplex: 1/2 (sum_i 1/m_ii)^-1.

    For graph matrices (m_ii = 1/2) this is 1/(4n).
    """
    d = np.diag(M.entries)
    if np.any(d <= 0.0):
        raise ValueError("bound requires strictly positive diagonal entries")
    return 0.5 / float(np.sum(1.0 / d))


def exit_bound(n: int, k: int) -> float:
    """Exit-time asymptotics bound in the form 1/2 [(1 - 1/(2k)) - 1/(4n)].

    Note: with F(x_C) = 1/2 (1 - 1/(2k)) the self-consistent barrier value is
    half of the first term; see consistent_exit_bound.  Both conventions are
    exposed since they differ by that factor of 2 in the clique term.
    """
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return 0.5 * ((1.0 - 1.0 / (2.0 * k)) - 1.0 / (4.0 * n))


def consistent_exit_bound(n: int, k: int) -> float:
    """Companion bound 1/2 [F(x_C) - 1/(4n)] using the clique potential itself."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return 0.5 * (clique_potential(k) - 1.0 / (4.0 * n))


def gnp_max_clique_estimate(n: int, p: float) -> int:
    """Typical max clique size in G(n,p): ceil(2 log_{1/p} n) (upper of the two w.h.p. values)."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"edge probability {p} outside (0, 1)")
    if n < 2:
        raise ValueError("need n >= 2")
    return max(1, math.ceil(2.0 * math.log(n) / math.log(1.0 / p)))


def gnp_exit_bound(n: int, p: float) -> float:
    """exit_bound evaluated at the typical G(n,p) max clique size."""
    return exit_bound(n, gnp_max_clique_estimate(n, p))
