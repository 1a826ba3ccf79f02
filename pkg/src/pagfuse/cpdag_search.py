"""Greedy score-based CPDAG learner.

Tabu-assisted hill climbing over DAGs with add / delete / reverse moves
under BDeu, followed by compelled-edge labelling.  The learner sees a table only; it is
never told which variables were intervened on.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dataset import DiscreteTable
from .deadline import NO_DEADLINE, Deadline
from .graphcore import MixedGraph, dag_to_cpdag
from .score import DEFAULT_BDEU, BdeuParams, local_bdeu

ADD, DELETE, REVERSE = 0, 1, 2


@dataclass(frozen=True)
class SearchConfig:
    max_indegree: int = 6
    tabu_length: int = 10
    restarts: int = 0
    params: BdeuParams = DEFAULT_BDEU
    seed: int = 0
    min_improvement: float = 1e-9

    def __post_init__(self):
        if self.max_indegree < 1:
            raise ValueError("max in-degree must be >= 1")
        if self.tabu_length < 0 or self.restarts < 0:
            raise ValueError("tabu length and restarts must be >= 0")


@dataclass
class SearchResult:
    dag: MixedGraph
    score: float
    trajectory: list[float] = field(default_factory=list)

    @property
    def cpdag(self) -> MixedGraph:
        return dag_to_cpdag(self.dag)


class _State:
    def __init__(self, table, params, parents):
        self.table = table
        self.params = params
        self.parents = [set(p) for p in parents]
        self.children = [set() for _ in parents]
        for v, ps in enumerate(self.parents):
            for p in ps:
                self.children[p].add(v)

    def local(self, v, ps):
        return local_bdeu(self.table, v, tuple(sorted(ps)), self.params)

    def score(self):
        return sum(self.local(v, ps) for v, ps in enumerate(self.parents))

    def reaches(self, src, dst, skip=None) -> bool:
        """Directed path src => dst, optionally ignoring the arc ``skip``."""
        stack = [src]
        seen = {src}
        while stack:
            v = stack.pop()
            for w in self.children[v]:
                if skip == (v, w):
                    continue
                if w == dst:
                    return True
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def arcs(self) -> frozenset:
        return frozenset((p, v) for v, ps in enumerate(self.parents) for p in ps)

    def apply(self, kind, u, v):
        if kind == ADD:
            self.parents[v].add(u)
            self.children[u].add(v)
        elif kind == DELETE:
            self.parents[v].discard(u)
            self.children[u].discard(v)
        else:
            self.parents[v].discard(u)
            self.children[u].discard(v)
            self.parents[u].add(v)
            self.children[v].add(u)

    def arcs_after(self, kind, u, v) -> frozenset:
        arcs = set(self.arcs())
        if kind == ADD:
            arcs.add((u, v))
        elif kind == DELETE:
            arcs.discard((u, v))
        else:
            arcs.discard((u, v))
            arcs.add((v, u))
        return frozenset(arcs)

    def moves(self, max_indegree):
        """Legal moves with score deltas, in (source, target, kind) order."""
        n = len(self.parents)
        for u in range(n):
            for v in range(n):
                if u == v:
                    continue
                pv = self.parents[v]
                if u in pv:
                    base_v = self.local(v, pv)
                    yield DELETE, u, v, self.local(v, pv - {u}) - base_v
                    pu = self.parents[u]
                    if len(pu) < max_indegree and not self.reaches(u, v, skip=(u, v)):
                        delta = self.local(v, pv - {u}) - base_v
                        delta += self.local(u, pu | {v}) - self.local(u, pu)
                        yield REVERSE, u, v, delta
                elif v not in self.parents[u]:
                    if len(pv) < max_indegree and not self.reaches(v, u):
                        yield ADD, u, v, self.local(v, pv | {u}) - self.local(v, pv)


def _climb(state: _State, config: SearchConfig, deadline: Deadline, trajectory: list[float]):
    """Tabu walk: always take the best non-tabu move, improving or not, and stop
    after ``tabu_length`` steps without a new best (or when nothing improves
    and the tabu list is disabled).  Leaves ``state`` at the best DAG seen."""
    tabu: deque = deque(maxlen=config.tabu_length or None)
    if config.tabu_length:
        tabu.append(state.arcs())
    current = best = state.score()
    best_parents = [set(p) for p in state.parents]
    trajectory.append(best)
    stall = 0
    while True:
        deadline.check()
        pick = None
        for kind, u, v, delta in state.moves(config.max_indegree):
            key = (u, v, kind)
            if pick is None or delta > pick[0] or (delta == pick[0] and key < pick[1]):
                if config.tabu_length and state.arcs_after(kind, u, v) in tabu:
                    continue
                pick = (delta, key)
        if pick is None:
            break
        if current + pick[0] <= best + config.min_improvement:
            if stall >= config.tabu_length:
                break
            stall += 1
        u, v, kind = pick[1]
        state.apply(kind, u, v)
        if config.tabu_length:
            tabu.append(state.arcs())
        current = state.score()
        if current > best + config.min_improvement:
            best = current
            best_parents = [set(p) for p in state.parents]
            trajectory.append(best)
            stall = 0
    state.__init__(state.table, state.params, best_parents)
    return best


def hill_climb(
    table: DiscreteTable,
    config: SearchConfig = SearchConfig(),
    deadline: Deadline = NO_DEADLINE,
) -> SearchResult:
    """Greedy ascent from the empty DAG, with optional perturbed restarts."""
    n = len(table.variables)
    state = _State(table, config.params, [set() for _ in range(n)])
    trajectory: list[float] = []
    best_score = _climb(state, config, deadline, trajectory)
    best_parents = [set(p) for p in state.parents]

    rng = np.random.default_rng(config.seed)
    for _ in range(config.restarts):
        state = _State(table, config.params, best_parents)
        for _ in range(max(1, n // 2)):
            legal = [(k, u, v) for k, u, v, _ in state.moves(config.max_indegree)]
            if not legal:
                break
            kind, u, v = legal[int(rng.integers(len(legal)))]
            state.apply(kind, u, v)
        score = _climb(state, config, deadline, [])
        if score > best_score + config.min_improvement:
            best_score = score
            best_parents = [set(p) for p in state.parents]

    dag = MixedGraph.from_parents(table.names, {v: ps for v, ps in enumerate(best_parents)})
    return SearchResult(dag, best_score, trajectory)


def learn_cpdag(
    table: DiscreteTable,
    config: SearchConfig = SearchConfig(),
    deadline: Deadline = NO_DEADLINE,
) -> MixedGraph:
    if table.n_rows == 0:
        raise ValueError("cannot learn from an empty table")
    return hill_climb(table, config, deadline).cpdag
