"""Edge-probability fusion over one observational and several interventional data sets.

Each ordered pair ``(a, b)`` carries a prior for ``a --> b`` built from three
sources of evidence:

* occurrence of the edge across the CPDAGs learnt so far (factor 1),
* collider evidence from the share of Sepsets containing the middle node of
  unshielded triples in the observational skeleton (factor 2),
* relative changes of the marginal BDeu score of ``b`` after interventions
  on ``a`` (factor 3).

The prior is turned into a posterior with the two-node BDeu likelihood of
``a --> b`` against ``b --> a`` (or, optionally, against the disconnected
pair), one data set at a time, and the final posteriors are thresholded into
a PAG.  BDeu is score equivalent, so with the default alternative the update
leaves the prior unchanged and direction information comes from the factors.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from itertools import permutations
from typing import Iterable, Mapping, Sequence

from .cpdag_search import SearchConfig, learn_cpdag
from .dataset import DatasetBundle, DiscreteTable
from .deadline import NO_DEADLINE, Deadline
from .graphcore import (
    ARROW,
    CIRCLE,
    TAIL,
    MixedGraph,
    format_graph,
    has_almost_directed_cycle,
)
from .indep import (
    DEFAULT_CELL_CAP,
    SepsetCatalog,
    TripleRatio,
    learn_skeleton,
    pair_sepsets,
    sepset_ratio,
    unshielded_triples,
)
from .score import DEFAULT_BDEU, BdeuParams, local_bdeu, pair_marginals, relative_change

log = logging.getLogger(__name__)

ALL_FACTORS = frozenset({1, 2, 3})
NEUTRAL = 0.5
# log-likelihood gaps this small relative to the scores are rounding noise
RELATIVE_TIE = 1e-10


@dataclass(frozen=True)
class HyperParams:
    significance: float = 0.05
    cutoff: float = 0.5
    max_sepset: int = 10
    bdeu: BdeuParams = DEFAULT_BDEU
    factors: frozenset = ALL_FACTORS
    # factor 3 only for pairs joined by an undirected edge in the interventional
    # CPDAG; False records a change for every non-target b
    factor3_requires_edge: bool = True
    # score b with its parents from the observational CPDAG instead of none
    factor3_cpdag_parents: bool = False
    cell_cap: int = DEFAULT_CELL_CAP
    adjust_dof: bool = False
    # structure a --> b is weighed against in the update: "reverse" (b --> a)
    # or "empty" (a, b disconnected)
    alternative: str = "reverse"

    def __post_init__(self):
        if self.alternative not in ("reverse", "empty"):
            raise ValueError("alternative must be 'reverse' or 'empty'")
        object.__setattr__(self, "factors", frozenset(int(f) for f in self.factors))
        if not 0 < self.significance < 1 or not 0 < self.cutoff < 1:
            raise ValueError("significance and cutoff must lie in (0, 1)")
        if self.max_sepset < 0:
            raise ValueError("max_sepset must be >= 0")
        if not self.factors <= ALL_FACTORS:
            raise ValueError("factors must be a subset of {1, 2, 3}")


# ---------------------------------------------------------------------------
# factors


def factor1(cpdags: Sequence[tuple[MixedGraph, Iterable[int]]], a: int, b: int) -> float:
    """Occurrence rate of ``a --> b`` over learnt CPDAGs and their target sets.

    A directed edge counts fully.  An undirected edge counts half towards the
    direction leaving an intervened endpoint, and fully towards the
    denominator of that direction.  Undirected edges with no intervened
    endpoint are ignored.
    """
    num = den = 0.0
    for g, targets in cpdags:
        targets = set(targets)
        if g.is_directed(a, b):
            num += 1.0
            den += 1.0
        elif g.is_directed(b, a):
            den += 1.0
        elif g.is_undirected(a, b):
            if a in targets:
                num += 0.5
                den += 1.0
            if b in targets:
                den += 1.0
    return num / den if den > 0 else 0.0


def factor2_from_ratios(ratios: Iterable[TripleRatio]) -> dict[tuple[int, int], float]:
    """Per-ordered-pair collider probabilities, maximised over triples.

    For ``a - b - c`` with Sepset ratio ``r``: the edges into ``b`` get
    ``1 - r`` when ``r < 0.5`` and 0.5 otherwise; edges out of ``b`` get 0.5.
    Triples without any Sepset are neutral (0.5 everywhere).  Pairs in no
    triple are absent from the map, meaning 0.
    """
    out: dict[tuple[int, int], float] = {}

    def bump(key, value):
        if value > out.get(key, -1.0):
            out[key] = value

    for tr in ratios:
        a, b, c = tr.triple
        if tr.ratio is None:
            into = NEUTRAL
        elif tr.ratio < 0.5:
            into = 1.0 - tr.ratio
        else:
            into = NEUTRAL
        bump((a, b), into)
        bump((c, b), into)
        bump((b, a), NEUTRAL)
        bump((b, c), NEUTRAL)
    return out


@dataclass(frozen=True)
class ScoreChange:
    source: int  # intervened variable
    target: int  # node whose local score changed
    dataset: int  # 1-based interventional index
    value: float


def factor3(changes: Iterable[ScoreChange], a: int, b: int, upto: int | None = None) -> float:
    """Sum of recorded relative changes for ``a --> b`` from data sets ``<= upto``."""
    return float(
        sum(
            c.value
            for c in changes
            if c.source == a and c.target == b and (upto is None or c.dataset <= upto)
        )
    )


def combine_prior(
    f1: float,
    f2: float,
    f3: float,
    previous: float = 0.0,
    factors: Iterable[int] = ALL_FACTORS,
) -> float:
    """``max(f1, f2) + f3`` clamped to [0, 1], then at least ``previous``."""
    factors = set(factors)
    f1 = f1 if 1 in factors else 0.0
    f2 = f2 if 2 in factors else 0.0
    f3 = f3 if 3 in factors else 0.0
    raw = min(1.0, max(0.0, max(f1, f2) + f3))
    return max(raw, previous)


def posterior_update(prior: float, log_directed: float, log_alternative: float) -> float:
    """Two-hypothesis Bayes update of a directed-edge probability.

    ``1 - (1-p) m0 / ((1-p) m0 + p m1)`` with ``m1`` the marginal likelihood of
    the directed structure and ``m0`` that of the alternative, evaluated as a
    logistic function of ``logit(p) + log m1 - log m0``.
    """
    if prior <= 0.0:
        return 0.0
    if prior >= 1.0:
        return 1.0
    x = math.log(prior) - math.log1p(-prior) + (log_directed - log_alternative)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# edge probability table


@dataclass
class EdgeProb:
    factor1: float = 0.0
    factor2: float = 0.0
    factor3_sum: float = 0.0
    prior: float = 0.0
    posterior: float = 0.0


class EdgeProbTable:
    """Factor breakdown, prior and posterior for every ordered pair."""

    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)
        n = len(self.names)
        self._rows = {(a, b): EdgeProb() for a, b in permutations(range(n), 2)}

    def __getitem__(self, pair: tuple[int, int]) -> EdgeProb:
        return self._rows[pair]

    def __iter__(self):
        return iter(sorted(self._rows))

    def posterior(self, a: int, b: int) -> float:
        return self._rows[(a, b)].posterior

    def prior(self, a: int, b: int) -> float:
        return self._rows[(a, b)].prior

    def posteriors(self) -> dict[tuple[int, int], float]:
        return {k: v.posterior for k, v in self._rows.items()}

    def to_json(self) -> list[dict]:
        return [
            {"source": self.names[a], "target": self.names[b], **asdict(self._rows[(a, b)])}
            for a, b in sorted(self._rows)
        ]


# ---------------------------------------------------------------------------
# PAG construction


def build_pag(
    posteriors: Mapping[tuple[int, int], float],
    skeleton: MixedGraph,
    cutoff: float = 0.5,
    names: Sequence[str] | None = None,
) -> MixedGraph:
    """Threshold posteriors into edges, then break cycles by weakest edge.

    Both directions above ``cutoff`` give ``<->``, one gives ``-->``, and a
    skeleton edge with neither gives ``o-o``.  While a directed or almost
    directed cycle remains, the participating edge with the lowest posterior
    is dropped (ties by node pair).  A bidirected edge's posterior is the
    smaller of its two directions.
    """
    names = tuple(names) if names is not None else skeleton.names
    n = len(names)
    edges: dict[tuple[int, int], tuple] = {}
    weight: dict[tuple[int, int], float] = {}
    for a in range(n):
        for b in range(a + 1, n):
            pab = posteriors.get((a, b), 0.0)
            pba = posteriors.get((b, a), 0.0)
            if pab > cutoff and pba > cutoff:
                edges[(a, b)] = (ARROW, ARROW)
                weight[(a, b)] = min(pab, pba)
            elif pab > cutoff:
                edges[(a, b)] = (TAIL, ARROW)
                weight[(a, b)] = pab
            elif pba > cutoff:
                edges[(a, b)] = (ARROW, TAIL)
                weight[(a, b)] = pba
            elif skeleton.adjacent(a, b):
                edges[(a, b)] = (CIRCLE, CIRCLE)

    g = MixedGraph(names, edges)
    while has_almost_directed_cycle(g):
        involved = cycle_edges(g)
        drop = min(involved, key=lambda e: (weight[e], e))
        del edges[drop]
        g = MixedGraph(names, edges)
    return g


def cycle_edges(g: MixedGraph) -> set[tuple[int, int]]:
    """Edges (as sorted pairs) lying on a directed or almost directed cycle."""
    n = g.n_nodes
    desc = [g.descendants([v]) for v in range(n)]
    involved = set()
    for u, v in g.directed_arcs():
        # u -> v on a directed cycle iff u reachable from v
        if u in desc[v]:
            involved.add((min(u, v), max(u, v)))
    for (a, b), m in g.edges().items():
        if m != (ARROW, ARROW):
            continue
        for x, y in ((a, b), (b, a)):
            # x <-> y with y an ancestor of x: directed y => x path plus the edge
            if x in desc[y]:
                involved.add((a, b))
                for u, v in g.directed_arcs():
                    if u in desc[y] and x in desc[v]:
                        involved.add((min(u, v), max(u, v)))
    return involved


# ---------------------------------------------------------------------------
# the full procedure


@dataclass
class PagResult:
    pag: MixedGraph
    probs: EdgeProbTable
    skeleton: MixedGraph
    catalog: SepsetCatalog
    cpdags: list[tuple[MixedGraph, frozenset]]
    changes: list[ScoreChange]
    diagnostics: dict = field(default_factory=dict)


def _triple_ratios(table, skel, catalog, hyper, deadline) -> list[TripleRatio]:
    # Sepsets depend only on the outer pair, so triples sharing it share tests
    cache: dict[tuple[int, int], list[frozenset]] = {}
    out = []
    for a, b, c in unshielded_triples(skel):
        if (a, c) not in cache:
            cache[(a, c)] = pair_sepsets(
                table,
                a,
                c,
                skel,
                hyper.significance,
                hyper.max_sepset,
                catalog,
                cell_cap=hyper.cell_cap,
                adjust_dof=hyper.adjust_dof,
                deadline=deadline,
            )
        sets = cache[(a, c)]
        ratio, hits = sepset_ratio(sets, b)
        out.append(TripleRatio((a, b, c), ratio, len(sets), hits))
    return out


def _score_changes(obs, tab, targets, cpdag, dataset, hyper, obs_cpdag) -> list[ScoreChange]:
    out = []
    n = len(obs.variables)
    for a in sorted(targets):
        for b in range(n):
            if b == a:
                continue
            if hyper.factor3_requires_edge and not cpdag.is_undirected(a, b):
                continue
            parents = tuple(obs_cpdag.parents(b)) if hyper.factor3_cpdag_parents else ()
            z_obs = local_bdeu(obs, b, parents, hyper.bdeu)
            z_int = local_bdeu(tab, b, parents, hyper.bdeu)
            out.append(ScoreChange(a, b, dataset, relative_change(z_obs, z_int)))
    return out


def learn_pag(
    bundle: DatasetBundle,
    hyper: HyperParams = HyperParams(),
    search: SearchConfig | None = None,
    deadline: Deadline = NO_DEADLINE,
) -> PagResult:
    """Learn a PAG from the bundle, processing interventional sets in order."""
    search = search or SearchConfig(params=hyper.bdeu)
    obs = bundle.observational
    names = obs.names
    n = len(names)
    ints = bundle.interventional
    timings: dict[str, float] = {}
    stages: list[dict] = []

    def tick(label, t0):
        timings[label] = timings.get(label, 0.0) + time.perf_counter() - t0

    # skeleton and collider evidence from observational data
    t0 = time.perf_counter()
    skel = learn_skeleton(
        obs,
        hyper.significance,
        hyper.max_sepset,
        cell_cap=hyper.cell_cap,
        adjust_dof=hyper.adjust_dof,
        deadline=deadline,
    )
    tick("skeleton", t0)

    t0 = time.perf_counter()
    ratios: list[TripleRatio] = []
    if 2 in hyper.factors:
        ratios = _triple_ratios(obs, skel.graph, skel.catalog, hyper, deadline)
    f2map = factor2_from_ratios(ratios)
    tick("triples", t0)

    t0 = time.perf_counter()
    cpdags: list[tuple[MixedGraph, frozenset]] = [(learn_cpdag(obs, search, deadline), frozenset())]
    tick("cpdag_search", t0)

    probs = EdgeProbTable(names)
    changes: list[ScoreChange] = []
    pairs = list(permutations(range(n), 2))

    def update(scoring: DiscreteTable, label: str):
        t0 = time.perf_counter()
        marg = {}
        for a, b in pairs:
            deadline.check()
            key = (min(a, b), max(a, b))
            if key not in marg:
                marg[key] = pair_marginals(scoring, key[0], key[1], hyper.bdeu)
            m = marg[key]
            log_dir, log_rev = (m.log_ab, m.log_ba) if a < b else (m.log_ba, m.log_ab)
            log_alt = log_rev if hyper.alternative == "reverse" else m.log_empty
            if abs(log_dir - log_alt) <= RELATIVE_TIE * max(abs(log_dir), abs(log_alt)):
                log_alt = log_dir
            row = probs[(a, b)]
            row.posterior = posterior_update(row.prior, log_dir, log_alt)
        tick("posterior", t0)
        stages.append(
            {
                "scored_against": label,
                "prior": [[probs[(a, b)].prior if a != b else 0.0 for b in range(n)] for a in range(n)],
                "posterior": [
                    [probs[(a, b)].posterior if a != b else 0.0 for b in range(n)] for a in range(n)
                ],
            }
        )

    # initial priors from the observational CPDAG and collider evidence
    for a, b in pairs:
        row = probs[(a, b)]
        row.factor1 = factor1(cpdags, a, b)
        row.factor2 = f2map.get((a, b), 0.0)
        row.factor3_sum = 0.0
        row.prior = combine_prior(row.factor1, row.factor2, 0.0, 0.0, hyper.factors)

    if not ints:
        update(obs, obs.name or "observational")
    else:
        update(ints[0].table, ints[0].table.name or "interventional 1")
        for i in range(1, len(ints)):
            entry = ints[i - 1]
            t0 = time.perf_counter()
            cpdag = learn_cpdag(entry.table, search, deadline)
            tick("cpdag_search", t0)
            cpdags.append((cpdag, entry.targets))
            if 3 in hyper.factors:
                changes.extend(
                    _score_changes(obs, entry.table, entry.targets, cpdag, i, hyper, cpdags[0][0])
                )
            for a, b in pairs:
                row = probs[(a, b)]
                row.factor1 = factor1(cpdags, a, b)
                row.factor3_sum = factor3(changes, a, b)
                row.prior = combine_prior(
                    row.factor1, row.factor2, row.factor3_sum, row.posterior, hyper.factors
                )
            nxt = ints[i].table
            update(nxt, nxt.name or f"interventional {i + 1}")

    t0 = time.perf_counter()
    pag = build_pag(probs.posteriors(), skel.graph, hyper.cutoff, names)
    tick("build_pag", t0)

    diagnostics = {
        "skeleton": format_graph(skel.graph),
        "n_ci_tests": skel.n_tests,
        "sepsets": skel.catalog.to_json(names),
        "triples": [
            {
                "triple": [names[v] for v in tr.triple],
                "ratio": tr.ratio,
                "n_sepsets": tr.n_sepsets,
            }
            for tr in ratios
        ],
        "cpdags": [
            {"targets": sorted(names[t] for t in tg), "graph": format_graph(g)} for g, tg in cpdags
        ],
        "score_changes": [
            {"source": names[c.source], "target": names[c.target], "dataset": c.dataset, "value": c.value}
            for c in changes
        ],
        "stages": stages,
        "timings": timings,
    }
    return PagResult(pag, probs, skel.graph, skel.catalog, cpdags, changes, diagnostics)

