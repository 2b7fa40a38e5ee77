"""
Graph families for the walk simulators.

Node ids are dense integers 0..A-1.

- torus_kd / ring: mixed-radix bijection with dimension 0 varying fastest,
  ``id = x0 + s0*(x1 + s1*(x2 + ...))``.
- hypercube: ``id`` is the integer whose k-bit binary string (most
  significant bit first) is the node label.
- explicit: ids are the positions in the adjacency list.

Neighbor lists are stored in ascending id order (CSR arrays), so stepping
by "index into the neighbor list" is reproducible across runs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import linalg, sparse

from collision_census.core.config import settings
from collision_census.errors import ConfigError, OracleGuardError, TopologyError
from collision_census.models import TopologySpec

logger = logging.getLogger(__name__)

Coordinates = Union[Tuple[int, ...], str]


@dataclass(frozen=True)
class GraphStats:
    """Exact degree statistics; avg_degree is the rational 2|E|/|V|"""

    node_count: int
    edge_count: int
    min_degree: int
    max_degree: int
    avg_degree: Fraction

    @property
    def avg_degree_float(self) -> float:
        return float(self.avg_degree)


class Topology:
    """Immutable finite undirected graph with CSR neighbor storage"""

    def __init__(self, family: str, params: Dict, indptr: np.ndarray, indices: np.ndarray):
        self.family = family
        self.params = dict(params)
        self._indptr = np.asarray(indptr, dtype=np.int64)
        self._indices = np.asarray(indices, dtype=np.int64)
        self._indptr.setflags(write=False)
        self._indices.setflags(write=False)

        self.node_count = len(self._indptr) - 1
        self.degrees = np.diff(self._indptr)
        self.degrees.setflags(write=False)
        self.edge_count = int(self.degrees.sum()) // 2

    # -- basic access -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        """Side lengths (tori and rings only)"""
        return tuple(self.params.get("sides", ()))

    @property
    def regular(self) -> bool:
        return bool(self.degrees.min() == self.degrees.max())

    def check_node(self, v: int) -> int:
        if not 0 <= int(v) < self.node_count:
            raise TopologyError(
                "NODE_OUT_OF_RANGE",
                f"node {v} outside [0, {self.node_count})",
                field="node",
            )
        return int(v)

    def neighbors(self, v: int) -> List[int]:
        v = self.check_node(v)
        return self._indices[self._indptr[v]:self._indptr[v + 1]].tolist()

    def neighbor_array(self, v: int) -> np.ndarray:
        v = self.check_node(v)
        return self._indices[self._indptr[v]:self._indptr[v + 1]]

    def neighbor_block(self, nodes: np.ndarray) -> np.ndarray:
        """Concatenated neighbor lists of ``nodes``, in order"""
        nodes = np.asarray(nodes, dtype=np.int64)
        lengths = self.degrees[nodes]
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        return self._indices[np.repeat(self._indptr[nodes], lengths) + offsets]

    def degree(self, v: int) -> int:
        return int(self.degrees[self.check_node(v)])

    def edges(self) -> np.ndarray:
        """(|E|, 2) array of edges with u < v"""
        src = np.repeat(np.arange(self.node_count), self.degrees)
        keep = src < self._indices
        return np.column_stack([src[keep], self._indices[keep]])

    def adjacency_matrix(self) -> sparse.csr_matrix:
        data = np.ones(len(self._indices), dtype=float)
        return sparse.csr_matrix(
            (data, self._indices, self._indptr),
            shape=(self.node_count, self.node_count),
        )

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges().tolist())
        return g

    def stationary(self) -> np.ndarray:
        """Degree-proportional stationary law deg(v)/(2|E|)"""
        return self.degrees / (2.0 * self.edge_count)

    def describe(self) -> str:
        if self.family in ("torus_kd", "ring"):
            return f"{self.family}(sides={'x'.join(str(s) for s in self.shape)})"
        if self.family == "hypercube":
            return f"hypercube(k={self.params['k']})"
        name = self.params.get("name", "explicit")
        return f"{name}(A={self.node_count},E={self.edge_count})"

    def __repr__(self) -> str:
        return f"Topology<{self.describe()}>"

    # -- internals used by the simulators -----------------------------

    def step_many(self, nodes: np.ndarray, rng: np.random.Generator, lazy: bool = False) -> np.ndarray:
        """Uniform-neighbor step for every walker in ``nodes``.

        Draws: with ``lazy`` one uniform float per walker (hold if < 1/2),
        then always one bounded integer per walker (neighbor index).
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        hold = rng.random(nodes.shape) < 0.5 if lazy else None
        offsets = rng.integers(0, self.degrees[nodes])
        moved = self._indices[self._indptr[nodes] + offsets]
        if hold is not None:
            return np.where(hold, nodes, moved)
        return moved


# -- coordinate bijections ---------------------------------------------


def coordinates(t: Topology, v: int) -> Coordinates:
    """Torus: mixed-radix tuple (dim 0 fastest). Hypercube: k-bit string."""
    v = t.check_node(v)
    if t.family in ("torus_kd", "ring"):
        return tuple(int(c) for c in np.unravel_index(v, t.shape, order="F"))
    if t.family == "hypercube":
        return format(v, f"0{t.params['k']}b")
    return (v,)


def node_at(t: Topology, coords: Coordinates) -> int:
    if t.family in ("torus_kd", "ring"):
        if len(coords) != len(t.shape):
            raise TopologyError("BAD_DIMENSION", f"expected {len(t.shape)} coordinates, got {len(coords)}", field="coords")
        wrapped = [int(c) % s for c, s in zip(coords, t.shape)]
        return int(np.ravel_multi_index(wrapped, t.shape, order="F"))
    if t.family == "hypercube":
        bits = str(coords)
        if len(bits) != t.params["k"] or set(bits) - {"0", "1"}:
            raise TopologyError("BAD_DIMENSION", f"expected a {t.params['k']}-bit string, got {bits!r}", field="coords")
        return t.check_node(int(bits, 2))
    return t.check_node(int(coords[0]))


def shift(t: Topology, nodes: np.ndarray, dim: int, delta: int) -> np.ndarray:
    """Move every node by ``delta`` along torus dimension ``dim`` (wrapping)"""
    if t.family not in ("torus_kd", "ring"):
        raise TopologyError("UNKNOWN_FAMILY", f"shift needs a torus, got {t.family}", field="family")
    sides = t.shape
    stride = int(np.prod(sides[:dim])) if dim else 1
    side = sides[dim]
    nodes = np.asarray(nodes, dtype=np.int64)
    coord = (nodes // stride) % side
    return nodes + (((coord + delta) % side) - coord) * stride


# -- builders ----------------------------------------------------------


def _csr_from_rows(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.sort(rows, axis=1)
    count, width = rows.shape
    indptr = np.arange(0, count * width + 1, width, dtype=np.int64)
    return indptr, rows.ravel()


def build_torus(sides: Sequence[int], family: str = "torus_kd") -> Topology:
    sides = [int(s) for s in sides]
    if len(sides) < 1:
        raise TopologyError("BAD_DIMENSION", "torus needs at least one dimension", field="dims")
    for s in sides:
        if s < 3:
            raise TopologyError("SIDE_TOO_SMALL", f"side length {s} < 3", field="side")

    count = int(np.prod(sides))
    ids = np.arange(count, dtype=np.int64)
    coords = np.unravel_index(ids, sides, order="F")
    columns = []
    for dim in range(len(sides)):
        for delta in (1, -1):
            moved = list(coords)
            moved[dim] = (coords[dim] + delta) % sides[dim]
            columns.append(np.ravel_multi_index(moved, sides, order="F"))

    indptr, indices = _csr_from_rows(np.column_stack(columns))
    return Topology(family, {"k": len(sides), "sides": sides}, indptr, indices)


def build_hypercube(k: int) -> Topology:
    if k < 1:
        raise TopologyError("BAD_DIMENSION", f"hypercube needs k >= 1, got {k}", field="dims")
    ids = np.arange(2 ** k, dtype=np.int64)
    rows = np.column_stack([ids ^ (1 << bit) for bit in range(k)])
    indptr, indices = _csr_from_rows(rows)
    return Topology("hypercube", {"k": k}, indptr, indices)


def build_explicit(adjacency: Sequence[Iterable[int]], name: str = "explicit") -> Topology:
    """Validate adjacency lists eagerly (O(|E|)) and build the graph"""
    lists = [sorted(int(u) for u in row) for row in adjacency]
    count = len(lists)
    if count < 2:
        raise TopologyError("EMPTY_GRAPH", "explicit graph needs at least 2 nodes", field="adjacency")

    for v, row in enumerate(lists):
        for u in row:
            if not 0 <= u < count:
                raise TopologyError("NODE_OUT_OF_RANGE", f"node {v} lists neighbor {u}", field="adjacency")
            if u == v:
                raise TopologyError("SELF_LOOP", f"self-loop at node {v}", field="adjacency")
        if len(set(row)) != len(row):
            raise TopologyError("PARALLEL_EDGE", f"repeated neighbor at node {v}", field="adjacency")

    sets = [set(row) for row in lists]
    for v, row in enumerate(lists):
        for u in row:
            if v not in sets[u]:
                raise TopologyError("ASYMMETRIC", f"{u} in N({v}) but {v} not in N({u})", field="adjacency")

    g = nx.Graph()
    g.add_nodes_from(range(count))
    g.add_edges_from((v, u) for v, row in enumerate(lists) for u in row if v < u)
    if not nx.is_connected(g):
        raise TopologyError("DISCONNECTED", "explicit graph is not connected", field="adjacency")

    indptr = np.zeros(count + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(row) for row in lists])
    indices = np.fromiter((u for row in lists for u in row), dtype=np.int64, count=int(indptr[-1]))
    return Topology("explicit", {"name": name}, indptr, indices)


def load_edge_list(path: Union[str, Path]) -> Topology:
    """Edge-list file: first line "A |E|", then one "u v" pair per line, '#' comments"""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as e:
        raise TopologyError("BAD_EDGE_FILE", f"cannot read {path}: {e}", field="edge_file")

    rows = []
    for line in raw.splitlines():
        content = line.split("#", 1)[0].strip()
        if content:
            rows.append(content.split())

    try:
        if not rows or len(rows[0]) != 2:
            raise ValueError("missing 'A |E|' header")
        count, edge_count = int(rows[0][0]), int(rows[0][1])
        pairs = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as e:
        raise TopologyError("BAD_EDGE_FILE", f"{path}: {e}", field="edge_file")

    if len(pairs) != edge_count:
        raise TopologyError(
            "BAD_EDGE_FILE",
            f"{path}: header declares {edge_count} edges, found {len(pairs)}",
            field="edge_file",
        )

    adjacency: List[List[int]] = [[] for _ in range(count)]
    for u, v in pairs:
        if not (0 <= u < count and 0 <= v < count):
            raise TopologyError("NODE_OUT_OF_RANGE", f"edge ({u}, {v}) outside [0, {count})", field="edge_file")
        adjacency[u].append(v)
        if u != v:
            adjacency[v].append(u)

    logger.info(f"✅ Loaded {count} nodes / {edge_count} edges from {path.name}")
    return build_explicit(adjacency, name=path.stem)


def complete_graph(count: int) -> Topology:
    return build_explicit([[u for u in range(count) if u != v] for v in range(count)], name=f"K{count}")


def star_graph(leaves: int) -> Topology:
    """K_{1,leaves} with the center at node 0"""
    adjacency = [list(range(1, leaves + 1))] + [[0] for _ in range(leaves)]
    return build_explicit(adjacency, name=f"K1_{leaves}")


def cycle_graph(count: int) -> Topology:
    """Cycle C_count as an explicit graph"""
    if count < 3:
        raise TopologyError("SIDE_TOO_SMALL", f"cycle length {count} < 3", field="nodes")
    return build_explicit([[(v - 1) % count, (v + 1) % count] for v in range(count)], name=f"C{count}")


def random_regular_graph(
    degree: int,
    count: int,
    seed: int = 0,
    non_bipartite: bool = True,
    max_attempts: int = 100,
) -> Topology:
    """Connected random regular graph; resamples (seed, seed+1, ...) until valid"""
    if not 1 <= degree < count or (degree * count) % 2:
        raise TopologyError(
            "BAD_DEGREE",
            f"no {degree}-regular graph on {count} nodes (need 1 <= degree < nodes and degree*nodes even)",
            field="degree",
        )
    for attempt in range(max_attempts):
        g = nx.random_regular_graph(degree, count, seed=seed + attempt)
        if not nx.is_connected(g):
            continue
        if non_bipartite and nx.is_bipartite(g):
            continue
        adjacency = [sorted(g.neighbors(v)) for v in range(count)]
        return build_explicit(adjacency, name=f"rr{degree}_{count}_s{seed + attempt}")

    raise TopologyError(
        "DISCONNECTED",
        f"no connected {degree}-regular graph on {count} nodes after {max_attempts} attempts",
        field="graph_seed",
    )


def _require(value, name: str):
    if value is None:
        raise ConfigError("MISSING_FIELD", f"--{name.replace('_', '-')} is required for this family", field=name)
    return value


def build_topology(spec: TopologySpec) -> Topology:
    """Construct the topology a spec describes; every type invariant is checked"""
    family = spec.family

    if family == "torus2d":
        if spec.sides is not None:
            if len(spec.sides) != 2:
                raise TopologyError("BAD_DIMENSION", "torus2d takes exactly two sides", field="sides")
            return build_torus(spec.sides)
        side = _require(spec.side, "side")
        return build_torus([side, side])

    if family == "torus_kd":
        if spec.sides is not None:
            return build_torus(spec.sides)
        dims = _require(spec.dims, "dims")
        if dims < 1:
            raise TopologyError("BAD_DIMENSION", f"torus needs k >= 1, got {dims}", field="dims")
        side = _require(spec.side, "side")
        return build_torus([side] * dims)

    if family == "ring":
        side = spec.side if spec.side is not None else spec.nodes
        side = _require(side, "side")
        return build_torus([side], family="ring")

    if family == "hypercube":
        return build_hypercube(_require(spec.dims, "dims"))

    if family == "complete":
        return complete_graph(_require(spec.nodes, "nodes"))

    if family == "star":
        return star_graph(_require(spec.nodes, "nodes") - 1)

    if family == "random_regular":
        return random_regular_graph(
            _require(spec.degree, "degree"),
            _require(spec.nodes, "nodes"),
            seed=spec.graph_seed or 0,
        )

    if family == "explicit":
        if spec.adjacency is not None:
            return build_explicit(spec.adjacency)
        return load_edge_list(_require(spec.edge_file, "edge_file"))

    raise TopologyError("UNKNOWN_FAMILY", f"unknown family {family}", field="family")


# -- operations --------------------------------------------------------


def neighbors(t: Topology, v: int) -> List[int]:
    """All adjacent nodes, ascending id"""
    return t.neighbors(v)


def random_step(t: Topology, v: int, rng: np.random.Generator) -> int:
    """Uniform neighbor of ``v``; consumes exactly one bounded-integer draw"""
    row = t.neighbor_array(v)
    return int(row[rng.integers(len(row))])


def random_steps(t: Topology, nodes: np.ndarray, rng: np.random.Generator, lazy: bool = False) -> np.ndarray:
    return t.step_many(nodes, rng, lazy=lazy)


def stationary_sample(t: Topology, rng: np.random.Generator) -> int:
    """Node drawn with probability deg(v)/(2|E|) (uniform on regular graphs)"""
    return int(stationary_samples(t, 1, rng)[0])


def stationary_samples(t: Topology, size: int, rng: np.random.Generator) -> np.ndarray:
    """Regular graphs: one bounded integer per sample. Otherwise ``rng.choice`` with p."""
    if t.regular:
        return rng.integers(0, t.node_count, size=size)
    return rng.choice(t.node_count, size=size, p=t.stationary())


def is_bipartite(t: Topology) -> bool:
    if t.family in ("torus_kd", "ring"):
        return all(s % 2 == 0 for s in t.shape)
    if t.family == "hypercube":
        return True
    return nx.is_bipartite(t.to_networkx())


def check_size_guard(t: Topology, limit: Optional[int] = None) -> None:
    limit = settings.oracle_max_nodes if limit is None else limit
    if t.node_count > limit:
        raise OracleGuardError(
            "SIZE_GUARD",
            f"{t.describe()} has {t.node_count} nodes; exact computations allow at most {limit}",
            field="topology",
        )


def spectral_lambda(t: Topology, positive_only: bool = False) -> float:
    """max{|λ₂|, |λ_A|} of W = M/k for a regular graph.

    ``positive_only`` returns max(λ₂, 0), ignoring the negative end of the
    spectrum (the hypercube treatment: 1 − 2/k instead of 1).
    Dense symmetric eigensolve; values within ``spectral_tolerance`` of 0 or 1
    are snapped.
    """
    check_size_guard(t)
    if not t.regular:
        raise TopologyError("IRREGULAR", f"{t.describe()} is not regular", field="topology")

    walk = t.adjacency_matrix().toarray() / float(t.degrees[0])
    eigenvalues = np.sort(linalg.eigvalsh(walk))[::-1]
    rest = eigenvalues[1:]
    if positive_only:
        lam = max(0.0, float(rest.max()))
    else:
        lam = float(np.abs(rest).max())

    tol = settings.spectral_tolerance
    if abs(lam - 1.0) < tol:
        lam = 1.0
    elif lam < tol:
        lam = 0.0
    return min(1.0, lam)


def graph_stats(t: Topology) -> GraphStats:
    return GraphStats(
        node_count=t.node_count,
        edge_count=t.edge_count,
        min_degree=int(t.degrees.min()),
        max_degree=int(t.degrees.max()),
        avg_degree=Fraction(2 * t.edge_count, t.node_count),
    )
