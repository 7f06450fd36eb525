"""Per-window developer networks and their node and graph metrics."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .entities import EntityChange

TEMPORAL_ENTITY = "temporal_entity"
LINE_OWNERSHIP = "line_ownership"
BIPARTITE_PROJECTION = "bipartite_projection"
VARIANTS = (TEMPORAL_ENTITY, LINE_OWNERSHIP, BIPARTITE_PROJECTION)

COUNT_PER_PRIOR_DEV = "count_per_prior_dev"
COUNT_ONCE = "count_once"
WEIGHT_SCHEMES = (COUNT_PER_PRIOR_DEV, COUNT_ONCE)

EDGES_HEADER = ("src_dev", "dst_dev", "weight", "multiplicity")
ADJACENCY_HEADER = ("src_dev", "dst_dev", "weight")

EVCENT_TOL = 1e-10
EVCENT_MAX_ITER = 10000


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int):
        super().__init__(f"eigenvector centrality did not converge after {iterations} iterations")
        self.iterations = iterations


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    weight: float
    multiplicity: int = 1


@dataclass(frozen=True)
class DevNetwork:
    window: int
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    directed: bool
    variant: str
    weight_scheme: Optional[str] = None

    def __post_init__(self):
        nodes = set(self.nodes)
        for e in self.edges:
            if e.src not in nodes or e.dst not in nodes:
                raise ValueError(f"edge {e.src}->{e.dst} has an endpoint outside the node set")
            if e.weight <= 0:
                raise ValueError("edge weights must be positive")

    def edge_rows(self) -> list[tuple]:
        return [(e.src, e.dst, _num(e.weight), e.multiplicity) for e in self.edges]

    def adjacency_rows(self) -> list[tuple]:
        """Edge list with parallel edges collapsed by summing weights."""
        acc: dict[tuple[str, str], float] = defaultdict(float)
        for e in self.edges:
            acc[(e.src, e.dst)] += e.weight
        return [(s, d, _num(w)) for (s, d), w in sorted(acc.items())]


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def _finish(window, nodes: Iterable[str], edges: list[Edge], directed: bool, variant: str,
            scheme: Optional[str] = None) -> DevNetwork:
    allnodes = set(nodes)
    for e in edges:
        allnodes.update((e.src, e.dst))
    return DevNetwork(window, tuple(sorted(allnodes)), tuple(edges), directed, variant, scheme)


def build_temporal_entity_network(entity_changes: Sequence[EntityChange],
                                  weight_scheme: str = COUNT_PER_PRIOR_DEV, window: int = 0,
                                  active_devs: Iterable[str] = ()) -> DevNetwork:
    """Directed edges from a developer to earlier contributors of the same entity.

    ``entity_changes`` must already be in (commit_time, hash) order.
    """
    if weight_scheme not in WEIGHT_SCHEMES:
        raise ValueError(f"unknown weight scheme {weight_scheme!r}")
    # prior contributors per entity, most recent last
    history: dict[tuple[str, str], list[str]] = defaultdict(list)
    weights: dict[tuple[str, str], float] = defaultdict(float)
    devs = set(active_devs)
    for ch in entity_changes:
        devs.add(ch.dev)
        key = (ch.path, ch.entity_name)
        prior = history[key]
        others = [d for d in prior if d != ch.dev]
        if others:
            if weight_scheme == COUNT_PER_PRIOR_DEV:
                for d in others:
                    weights[(ch.dev, d)] += ch.lines_changed
            else:
                weights[(ch.dev, others[-1])] += ch.lines_changed
        if ch.dev in prior:
            prior.remove(ch.dev)
        prior.append(ch.dev)
    edges = [Edge(s, d, w) for (s, d), w in sorted(weights.items())]
    return _finish(window, devs, edges, True, TEMPORAL_ENTITY, weight_scheme)


@dataclass(frozen=True)
class LineModification:
    """A pre-image line changed by a commit, with its prior owner if known."""

    commit: str
    path: str
    line_no: int
    modifier: str
    owner: Optional[str]


def build_line_ownership_network(modifications: Sequence[LineModification], window: int = 0,
                                 active_devs: Iterable[str] = ()) -> DevNetwork:
    """One parallel edge modifier→owner per modified foreign-owned line."""
    counts: dict[tuple[str, str], int] = defaultdict(int)
    devs = set(active_devs)
    for m in modifications:
        devs.add(m.modifier)
        if m.owner is not None and m.owner != m.modifier:
            counts[(m.modifier, m.owner)] += 1
    edges = [Edge(s, d, 1, k + 1) for (s, d), n in sorted(counts.items()) for k in range(n)]
    return _finish(window, devs, edges, True, LINE_OWNERSHIP)


def build_bipartite_projection(dev_file_changes: Iterable[tuple[str, str]], window: int = 0,
                               active_devs: Iterable[str] = ()) -> DevNetwork:
    """Undirected co-editing graph from (dev, path) change events.

    Weight of d1–d2 is the sum over shared files of min(changes by d1, changes by d2).
    """
    per_file: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    devs = set(active_devs)
    for dev, path in dev_file_changes:
        devs.add(dev)
        per_file[path][dev] += 1
    weights: dict[tuple[str, str], int] = defaultdict(int)
    for path in sorted(per_file):
        editors = sorted(per_file[path])
        for i, a in enumerate(editors):
            for b in editors[i + 1:]:
                weights[(a, b)] += min(per_file[path][a], per_file[path][b])
    edges = [Edge(a, b, w) for (a, b), w in sorted(weights.items())]
    return _finish(window, devs, edges, False, BIPARTITE_PROJECTION)


# -- metrics ------------------------------------------------------------------

@dataclass(frozen=True)
class NodeMetrics:
    dev: str
    degree: int
    in_degree: Optional[int]
    evcent: float
    clustering: Optional[float]
    hierarchy: float


def default_hierarchy(degree: int, clustering: Optional[float]) -> float:
    return degree * (1.0 - (clustering or 0.0))


HIERARCHY_FORMULAS: dict[str, Callable[[int, Optional[float]], float]] = {
    "degree_times_one_minus_clustering": default_hierarchy,
    "degree_over_clustering": lambda k, c: k / c if c else float(k),
}


def symmetrized(net: DevNetwork) -> tuple[list[str], np.ndarray]:
    """Simple undirected weighted adjacency: parallel edges and directions summed."""
    nodes = list(net.nodes)
    pos = {n: i for i, n in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)))
    for e in net.edges:
        if e.src == e.dst:
            continue
        i, j = pos[e.src], pos[e.dst]
        w[i, j] += e.weight
        w[j, i] += e.weight
    return nodes, w


def eigenvector_centrality(w: np.ndarray, tol: float = EVCENT_TOL,
                           max_iter: int = EVCENT_MAX_ITER) -> np.ndarray:
    """Dominant eigenvector of a symmetric non-negative matrix, unit L2 norm.

    Iterates on ``w + I`` from the uniform vector; the shift keeps bipartite
    graphs from oscillating without changing the eigenvectors.
    """
    n = w.shape[0]
    if n == 0:
        return np.zeros(0)
    x = np.full(n, 1.0 / math.sqrt(n))
    for it in range(1, max_iter + 1):
        y = w @ x + x
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < tol:
            return y
        x = y
    raise ConvergenceError(max_iter)


def local_clustering(adj: np.ndarray) -> list[Optional[float]]:
    a = (adj > 0).astype(float)
    np.fill_diagonal(a, 0.0)
    deg = a.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    out = []
    for k, t in zip(deg, tri):
        out.append(None if k < 2 else float(t / (k * (k - 1) / 2.0)))
    return out


def in_degrees(net: DevNetwork) -> dict[str, int]:
    """Incoming edge count, parallel edges included; undirected graphs use degree."""
    counts = {n: 0 for n in net.nodes}
    for e in net.edges:
        if e.src == e.dst:
            continue
        counts[e.dst] += 1
        if not net.directed:
            counts[e.src] += 1
    return counts


def node_metrics(net: DevNetwork, hierarchy: str = "degree_times_one_minus_clustering",
                 weighted_evcent: bool = True) -> list[NodeMetrics]:
    if not net.nodes:
        raise ValueError("node metrics need a non-empty network")
    formula = HIERARCHY_FORMULAS[hierarchy]
    nodes, w = symmetrized(net)
    simple = (w > 0).astype(float)
    degree = simple.sum(axis=1).astype(int)
    ev = eigenvector_centrality(w if weighted_evcent else simple)
    clus = local_clustering(w)
    indeg = in_degrees(net) if net.directed else None
    out = []
    for i, n in enumerate(nodes):
        out.append(NodeMetrics(n, int(degree[i]), None if indeg is None else indeg[n],
                               float(ev[i]), clus[i], formula(int(degree[i]), clus[i])))
    return out


@dataclass(frozen=True)
class GraphMetrics:
    n_nodes: int
    n_edges: int
    density: float
    diameter: int
    global_clustering: float
    mean_in_degree: float


def _components(simple: np.ndarray) -> list[list[int]]:
    n = simple.shape[0]
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp, queue = [], deque([s])
        seen[s] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.flatnonzero(simple[u]):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def _eccentricity(simple: np.ndarray, s: int) -> int:
    dist = {s: 0}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(simple[u]):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return max(dist.values())


def graph_metrics(net: DevNetwork) -> GraphMetrics:
    if not net.nodes:
        raise ValueError("graph metrics need a non-empty network")
    _, w = symmetrized(net)
    simple = (w > 0).astype(float)
    n = len(net.nodes)
    simple_edges = int(simple.sum() // 2)
    density = simple_edges / (n * (n - 1) / 2.0) if n > 1 else 0.0
    largest = max(_components(simple), key=lambda c: (len(c), -c[0]))
    diameter = max(_eccentricity(simple, s) for s in largest)
    a = simple
    triangles = np.trace(a @ a @ a) / 6.0
    deg = a.sum(axis=1)
    triples = float((deg * (deg - 1) / 2.0).sum())
    global_clustering = 3.0 * triangles / triples if triples else 0.0
    if net.directed:
        n_edges = sum(1 for e in net.edges if e.src != e.dst)
    else:
        n_edges = simple_edges
    indeg = in_degrees(net)
    mean_in = sum(indeg.values()) / n
    return GraphMetrics(n, n_edges, float(density), int(diameter), float(global_clustering),
                        float(mean_in))


@dataclass(frozen=True)
class FModR:
    per_dev: dict
    mean: Optional[float]


def foreign_modification_ratio(modifications: Iterable[LineModification]) -> FModR:
    known: dict[str, int] = defaultdict(int)
    foreign: dict[str, int] = defaultdict(int)
    for m in modifications:
        if m.owner is None:
            continue
        known[m.modifier] += 1
        if m.owner != m.modifier:
            foreign[m.modifier] += 1
    per_dev = {d: foreign[d] / known[d] for d in sorted(known)}
    mean = sum(per_dev.values()) / len(per_dev) if per_dev else None
    return FModR(per_dev, mean)
