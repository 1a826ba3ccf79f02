"""Shared oracles and fixtures.

The oracles here are deliberately independent of the package: d-separation
comes from networkx, and Markov equivalence is decided by comparing the full
set of d-separation statements rather than by any CPDAG construction.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations, product

import networkx as nx
import numpy as np
import pytest

from pagfuse.dataset import DatasetBundle, DiscreteTable, InterventionalEntry, VariableSpec
from pagfuse.graphcore import MixedGraph
from pagfuse.synth import simulate

# acceptance criteria record their verdicts here; printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# ---------------------------------------------------------------------------
# graph oracles


def to_nx(dag: MixedGraph) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(dag.n_nodes))
    g.add_edges_from(dag.directed_arcs())
    return g


def d_separated(g: nx.DiGraph, a: int, b: int, z) -> bool:
    return nx.is_d_separator(g, {a}, {b}, set(z))


def dsep_statements(dag: MixedGraph) -> frozenset:
    """Every (a, b, Z) with a < b and a, b d-separated by Z."""
    g = to_nx(dag)
    n = dag.n_nodes
    out = set()
    for a, b in combinations(range(n), 2):
        rest = [v for v in range(n) if v not in (a, b)]
        for k in range(len(rest) + 1):
            for z in combinations(rest, k):
                if d_separated(g, a, b, z):
                    out.add((a, b, z))
    return frozenset(out)


@lru_cache(maxsize=None)
def all_dags(n: int) -> tuple[MixedGraph, ...]:
    """Every labelled DAG on ``n`` nodes (1, 3, 25, 543 for n = 1..4)."""
    names = [f"N{i}" for i in range(n)]
    pairs = list(combinations(range(n), 2))
    out = []
    for choice in product((None, 0, 1), repeat=len(pairs)):
        arcs = []
        for (a, b), c in zip(pairs, choice):
            if c == 0:
                arcs.append((a, b))
            elif c == 1:
                arcs.append((b, a))
        g = nx.DiGraph(arcs)
        g.add_nodes_from(range(n))
        if nx.is_directed_acyclic_graph(g):
            out.append(MixedGraph.from_directed(names, arcs))
    return tuple(out)


@lru_cache(maxsize=None)
def markov_classes(n: int) -> tuple[tuple[MixedGraph, ...], ...]:
    """DAGs on ``n`` nodes grouped by identical d-separation statements."""
    groups: dict[frozenset, list[MixedGraph]] = {}
    for dag in all_dags(n):
        groups.setdefault(dsep_statements(dag), []).append(dag)
    return tuple(tuple(g) for g in groups.values())


def random_dag(rng: np.random.Generator, n: int, p: float = 0.4, prefix: str = "V") -> MixedGraph:
    order = rng.permutation(n)
    arcs = [
        (int(order[i]), int(order[j]))
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    ]
    return MixedGraph.from_directed([f"{prefix}{i}" for i in range(n)], arcs)


# ---------------------------------------------------------------------------
# data helpers


def binary_vars(*names: str) -> list[VariableSpec]:
    return [VariableSpec(n, ("0", "1")) for n in names]


def table_from_rows(rows, names=None, cards=None) -> DiscreteTable:
    arr = np.asarray(rows, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[:, None]
    k = arr.shape[1]
    names = names or [f"C{i}" for i in range(k)]
    cards = cards or [max(2, int(arr[:, i].max()) + 1) for i in range(k)]
    variables = [VariableSpec(nm, tuple(str(s) for s in range(c))) for nm, c in zip(names, cards)]
    return DiscreteTable(variables, arr)


def table_from_counts(counts) -> DiscreteTable:
    """Two-column table whose (a, b) contingency is ``counts``."""
    counts = np.asarray(counts)
    rows = [(i, j) for (i, j), c in np.ndenumerate(counts) for _ in range(int(c))]
    return table_from_rows(rows, ["A", "B"], list(counts.shape))


def bundle_from_plan(spec, plan) -> DatasetBundle:
    tables = simulate(spec, plan)
    names = tables[0].names
    entries = [
        InterventionalEntry(t, frozenset(names.index(v) for v in e.targets))
        for t, e in zip(tables[1:], plan.interventional)
    ]
    return DatasetBundle(tables[0], entries)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
