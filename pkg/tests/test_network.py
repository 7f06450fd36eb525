from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repomine.entities import SUMMARISE, EntityChange
from repomine.network import (COUNT_ONCE, COUNT_PER_PRIOR_DEV, ConvergenceError, DevNetwork, Edge,
                              LineModification, build_bipartite_projection,
                              build_line_ownership_network, build_temporal_entity_network,
                              eigenvector_centrality, foreign_modification_ratio, graph_metrics,
                              node_metrics, symmetrized)


def ec(commit, dev, lines, entity="e", path="f.c"):
    return EntityChange(commit, path, entity, dev, lines, None, SUMMARISE)


def undirected(nodes, pairs, weights=None):
    weights = weights or [1] * len(pairs)
    return DevNetwork(0, tuple(nodes), tuple(Edge(a, b, w) for (a, b), w in zip(pairs, weights)),
                      False, "bipartite_projection")


def by_dev(metrics):
    return {m.dev: m for m in metrics}


# -- construction ------------------------------------------------------------

def test_temporal_examples():
    assert build_temporal_entity_network([ec("1", "A", 3), ec("2", "A", 2)]).edges == ()
    net = build_temporal_entity_network([ec("1", "A", 3), ec("2", "B", 4)])
    assert net.edges == (Edge("B", "A", 4),)
    changes = [ec("1", "A", 2), ec("2", "B", 2), ec("3", "C", 5)]
    per = build_temporal_entity_network(changes, COUNT_PER_PRIOR_DEV)
    assert set(per.edges) == {Edge("B", "A", 2), Edge("C", "A", 5), Edge("C", "B", 5)}
    once = build_temporal_entity_network(changes, COUNT_ONCE)
    assert set(once.edges) == {Edge("B", "A", 2), Edge("C", "B", 5)}


def random_changes(rng, n=30):
    return [ec(str(k), rng.choice("ABCDE"), rng.randint(1, 9), rng.choice(["x", "y", "z"]))
            for k in range(n)]


def test_temporal_order_and_weight_schemes():
    rng = random.Random(5)
    for _ in range(200):
        changes = random_changes(rng)
        per = build_temporal_entity_network(changes, COUNT_PER_PRIOR_DEV)
        once = build_temporal_entity_network(changes, COUNT_ONCE)
        assert sum(e.weight for e in per.edges) >= sum(e.weight for e in once.edges)
        # every edge src->dst needs a change by dst on a shared entity before a change by src
        for e in per.edges:
            assert any(a.dev == e.dst and b.dev == e.src and a.entity_name == b.entity_name
                       for i, a in enumerate(changes) for b in changes[i + 1:])
        assert all(e.src != e.dst for e in per.edges)


def lm(mod, owner, line=1):
    return LineModification("c", "f.c", line, mod, owner)


def test_ownership_examples():
    net = build_line_ownership_network([lm("A", "B", i) for i in range(3)])
    assert [(e.src, e.dst, e.multiplicity) for e in net.edges] == [("A", "B", 1), ("A", "B", 2), ("A", "B", 3)]
    assert build_line_ownership_network([lm("A", "A")] * 3).edges == ()
    net = build_line_ownership_network([lm("A", "B"), lm("A", "B", 2), lm("A", "C")])
    assert sorted((e.src, e.dst) for e in net.edges) == [("A", "B"), ("A", "B"), ("A", "C")]
    assert net.adjacency_rows() == [("A", "B", 2), ("A", "C", 1)]
    assert build_line_ownership_network([lm("A", None)]).edges == ()


def test_bipartite_examples():
    net = build_bipartite_projection([("A", "f"), ("B", "f")])
    assert net.edges == (Edge("A", "B", 1),) and not net.directed
    net = build_bipartite_projection([("A", "f")] * 3 + [("B", "f")] * 2)
    assert net.edges == (Edge("A", "B", 2),)
    assert build_bipartite_projection([("A", "f"), ("B", "g")]).edges == ()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABCD"), st.sampled_from("fgh")), max_size=20))
def test_bipartite_symmetric(events):
    fwd = build_bipartite_projection(events)
    per_file = {}
    for d, f in events:
        per_file.setdefault(f, {}).setdefault(d, 0)
        per_file[f][d] += 1
    for e in fwd.edges:
        expect = sum(min(c.get(e.src, 0), c.get(e.dst, 0)) for c in per_file.values())
        assert e.weight == expect
    _, w = symmetrized(fwd)
    assert np.array_equal(w, w.T)


# -- metrics -------------------------------------------------------------------

def test_triangle_and_star():
    k3 = undirected("ABC", [("A", "B"), ("B", "C"), ("A", "C")])
    m = node_metrics(k3)
    assert len({x.evcent for x in m}) == 1  # exact symmetry
    assert m[0].evcent == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert all(x.clustering == 1.0 for x in m)
    star = by_dev(node_metrics(undirected("CXYZ", [("C", "X"), ("C", "Y"), ("C", "Z")])))
    assert star["C"].clustering == 0.0 and star["C"].hierarchy == 3.0
    assert star["X"].clustering is None and star["X"].hierarchy == 1.0
    assert abs(np.linalg.norm([x.evcent for x in star.values()]) - 1) < 1e-12


def test_graph_metrics_examples():
    k3 = graph_metrics(undirected("ABC", [("A", "B"), ("B", "C"), ("A", "C")]))
    assert (k3.density, k3.diameter, k3.global_clustering) == (1.0, 1, 1.0)
    path = graph_metrics(undirected("ABC", [("A", "B"), ("B", "C")]))
    assert path.density == pytest.approx(2 / 3) and path.diameter == 2
    par = build_line_ownership_network([lm("A", "B", i) for i in range(5)])
    gm = graph_metrics(par)
    assert (gm.n_edges, gm.density, gm.n_nodes) == (5, 1.0, 2)
    assert gm.mean_in_degree == 2.5
    assert by_dev(node_metrics(par))["B"].in_degree == 5


def test_fmodr_examples():
    mods = [lm("d", "d")] * 6 + [lm("d", "x")] * 4
    assert foreign_modification_ratio(mods).per_dev["d"] == pytest.approx(0.4)
    assert foreign_modification_ratio([lm("s", "s")] * 3).mean == 0.0
    r = foreign_modification_ratio([lm("n", None)] * 3 + [lm("a", "b")])
    assert "n" not in r.per_dev and r.mean == 1.0


def random_graph(rng, n):
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                w[i, j] = w[j, i] = rng.randint(1, 5)
    return w


def baseline_512(w):
    x = np.full(w.shape[0], 1.0 / math.sqrt(w.shape[0]))
    m = w + np.eye(w.shape[0])
    for _ in range(512):
        x = m @ x
        x /= np.linalg.norm(x)
    return x


def cosine_distance(a, b):
    return 1 - float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))


def centrality_oracle_failures(n_graphs=200, seed=2024):
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(n_graphs):
        w = random_graph(rng, rng.randint(2, 7))
        if not w.any():
            w[0, 1] = w[1, 0] = 1
        worst = max(worst, cosine_distance(eigenvector_centrality(w), baseline_512(w)))
    return worst


def test_centrality_oracle_200_graphs():
    assert centrality_oracle_failures() < 1e-8


def test_centrality_matches_eigh_on_connected():
    rng = random.Random(9)
    checked = 0
    while checked < 50:
        w = random_graph(rng, rng.randint(3, 7))
        lap = np.diag((w > 0).sum(1)) - (w > 0)
        if np.sort(np.linalg.eigvalsh(lap))[1] < 1e-9:
            continue  # disconnected
        vals, vecs = np.linalg.eigh(w)
        ref = np.abs(vecs[:, np.argmax(vals)])
        assert cosine_distance(eigenvector_centrality(w), ref) < 1e-8
        checked += 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 50))
def test_weight_scaling_invariance(seed, c):
    rng = random.Random(seed)
    nodes = "ABCDEF"
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:] if rng.random() < 0.5]
    if not pairs:
        pairs = [("A", "B")]
    ws = [rng.randint(1, 6) for _ in pairs]
    m1 = node_metrics(undirected(nodes, pairs, ws))
    m2 = node_metrics(undirected(nodes, pairs, [x * c for x in ws]))
    for a, b in zip(m1, m2):
        assert a.evcent == pytest.approx(b.evcent, abs=1e-7)
        assert a.clustering == b.clustering and a.degree == b.degree


def test_non_convergence_reported():
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ConvergenceError) as exc:
        eigenvector_centrality(np.array([[0.0, 2.0, 0.0], [2.0, 0.0, 1.0], [0.0, 1.0, 0.0]]), max_iter=2)
    assert exc.value.iterations == 2
    assert eigenvector_centrality(w) == pytest.approx([1 / math.sqrt(2)] * 2)
