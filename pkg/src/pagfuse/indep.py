"""G-squared conditional independence tests, skeleton search and Sepset ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from .dataset import DiscreteTable
from .deadline import NO_DEADLINE, Deadline
from .graphcore import TAIL, MixedGraph

DEFAULT_CELL_CAP = 10**6


@dataclass(frozen=True)
class CiResult:
    g2: float
    dof: int
    p_value: float
    skipped: bool = False

    def independent(self, alpha: float) -> bool:
        return not self.skipped and self.p_value > alpha


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail of the chi-square distribution, ``Q(dof/2, x/2)``."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(special.gammaincc(0.5 * dof, 0.5 * x))


def _stratified_counts(table: DiscreteTable, a: int, b: int, z: tuple[int, ...]):
    cz, qz = table.config_index(z)
    ra, rb = int(table.cardinalities[a]), int(table.cardinalities[b])
    flat = (cz * ra + table.data[:, a]) * rb + table.data[:, b]
    return np.bincount(flat, minlength=qz * ra * rb).reshape(qz, ra, rb)


def g2_test(
    table: DiscreteTable,
    a: int,
    b: int,
    z: Iterable[int] = (),
    *,
    cell_cap: int = DEFAULT_CELL_CAP,
    adjust_dof: bool = False,
) -> CiResult:
    """Likelihood-ratio test of ``a`` independent of ``b`` given ``z``.

    Cells with zero count contribute nothing.  The nominal degrees of freedom
    ``(|A|-1)(|B|-1) prod |Z_j|`` are used unless ``adjust_dof`` is set, in
    which case empty rows and columns within each stratum are discounted.
    Tables with more than ``cell_cap`` cells are not evaluated; the result is
    flagged ``skipped`` with p = 0 so callers keep the dependence.
    """
    if a == b:
        raise ValueError("cannot test a variable against itself")
    a, b = min(a, b), max(a, b)
    z = tuple(sorted(set(z)))
    if a in z or b in z:
        raise ValueError("conditioning set must exclude the tested pair")

    def compute():
        ra, rb = int(table.cardinalities[a]), int(table.cardinalities[b])
        qz = int(np.prod([table.cardinalities[c] for c in z])) if z else 1
        dof = (ra - 1) * (rb - 1) * qz
        if ra * rb * qz > cell_cap:
            return CiResult(math.inf, dof, 0.0, skipped=True)
        n = _stratified_counts(table, a, b, z).astype(np.float64)
        n_z = n.sum(axis=(1, 2))
        n_az = n.sum(axis=2)
        n_bz = n.sum(axis=1)
        expected = n_az[:, :, None] * n_bz[:, None, :]
        mask = n > 0
        observed = n * n_z[:, None, None]
        g2 = 2.0 * float(np.sum(n[mask] * np.log(observed[mask] / expected[mask])))
        g2 = max(0.0, g2)
        if adjust_dof:
            dof = int(
                sum(
                    max(0, (np.count_nonzero(n_az[s]) - 1) * (np.count_nonzero(n_bz[s]) - 1))
                    for s in range(qz)
                )
            )
            if dof == 0:
                return CiResult(g2, 0, 1.0)
        return CiResult(g2, dof, chi2_sf(g2, dof))

    return table.memo(("g2", a, b, z, cell_cap, adjust_dof), compute)


# ---------------------------------------------------------------------------
# skeleton


class SepsetCatalog:
    """All separating sets recorded for each unordered pair."""

    def __init__(self):
        self._sets: dict[frozenset, list[frozenset]] = {}

    def add(self, a: int, b: int, z: Iterable[int]) -> None:
        z = frozenset(z)
        lst = self._sets.setdefault(frozenset((a, b)), [])
        if z not in lst:
            lst.append(z)

    def get(self, a: int, b: int) -> list[frozenset]:
        return list(self._sets.get(frozenset((a, b)), ()))

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(p)) for p in self._sets)

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._sets

    def __len__(self) -> int:
        return len(self._sets)

    def to_json(self, names: Sequence[str]) -> list[dict]:
        out = []
        for a, b in self.pairs():
            sets = sorted(sorted(names[v] for v in z) for z in self.get(a, b))
            out.append({"pair": [names[a], names[b]], "sepsets": sets})
        return out


@dataclass
class SkeletonResult:
    graph: MixedGraph
    catalog: SepsetCatalog
    n_tests: int = 0
    levels: list[int] = field(default_factory=list)


def learn_skeleton(
    table: DiscreteTable,
    alpha: float = 0.05,
    max_sepset: int = 10,
    *,
    cell_cap: int = DEFAULT_CELL_CAP,
    adjust_dof: bool = False,
    deadline: Deadline = NO_DEADLINE,
    independent: Callable[[int, int, tuple], bool] | None = None,
) -> SkeletonResult:
    """Order-independent adjacency search starting from the complete graph.

    For each conditioning size ``0..max_sepset``, every remaining edge is
    tested against the subsets of that size drawn from the neighbourhoods
    fixed at the start of the level.  An edge is removed when some subset
    gives ``p > alpha``; every such subset at that level is recorded.
    ``independent(a, b, z)`` replaces the G² decision when given (for
    example by a d-separation oracle).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if max_sepset < 0:
        raise ValueError("max_sepset must be >= 0")
    n = len(table.variables)
    adj = [set(range(n)) - {v} for v in range(n)]
    catalog = SepsetCatalog()
    n_tests = 0
    levels = []

    for size in range(max_sepset + 1):
        snapshot = [frozenset(s) for s in adj]
        pairs = [(a, b) for a in range(n) for b in sorted(snapshot[a]) if a < b]
        if not any(len(snapshot[a]) - 1 >= size or len(snapshot[b]) - 1 >= size for a, b in pairs):
            break
        levels.append(size)
        removals = []
        for a, b in pairs:
            deadline.check()
            found = []
            seen = set()
            for pool in (snapshot[a] - {b}, snapshot[b] - {a}):
                for z in combinations(sorted(pool), size):
                    if z in seen:
                        continue
                    seen.add(z)
                    n_tests += 1
                    if independent is not None:
                        indep = independent(a, b, z)
                    else:
                        res = g2_test(table, a, b, z, cell_cap=cell_cap, adjust_dof=adjust_dof)
                        indep = res.independent(alpha)
                    if indep:
                        found.append(z)
            if found:
                removals.append((a, b, found))
        for a, b, found in removals:
            adj[a].discard(b)
            adj[b].discard(a)
            for z in found:
                catalog.add(a, b, z)

    edges = {(a, b): (TAIL, TAIL) for a in range(n) for b in adj[a] if a < b}
    return SkeletonResult(MixedGraph(table.names, edges), catalog, n_tests, levels)


# ---------------------------------------------------------------------------
# unshielded triples


@dataclass(frozen=True)
class TripleRatio:
    triple: tuple[int, int, int]
    ratio: float | None  # None when no Sepset was found
    n_sepsets: int
    n_containing: int

    @property
    def defined(self) -> bool:
        return self.ratio is not None


def unshielded_triples(u: MixedGraph) -> list[tuple[int, int, int]]:
    """Triples ``(a, b, c)`` with ``a - b - c`` in ``u``, a < c non-adjacent."""
    out = []
    for b in range(u.n_nodes):
        for a, c in combinations(sorted(u.neighbors(b)), 2):
            if not u.adjacent(a, c):
                out.append((a, b, c))
    return sorted(out, key=lambda t: (t[0], t[2], t[1]))


def sepset_ratio(sepsets: Sequence[Iterable], middle) -> tuple[float | None, int]:
    """Fraction of ``sepsets`` containing ``middle``; None when there are none."""
    sets = [frozenset(s) for s in sepsets]
    if not sets:
        return None, 0
    hits = sum(1 for s in sets if middle in s)
    return hits / len(sets), hits


def pair_sepsets(
    table: DiscreteTable,
    a: int,
    c: int,
    u: MixedGraph,
    alpha: float,
    max_sepset: int,
    catalog: SepsetCatalog | None = None,
    *,
    cell_cap: int = DEFAULT_CELL_CAP,
    adjust_dof: bool = False,
    deadline: Deadline = NO_DEADLINE,
) -> list[frozenset]:
    """Every ``S`` within the joint neighbourhood of a and c with ``p > alpha``.

    Step-1 Sepsets from ``catalog`` are merged in; duplicates count once.
    """
    pool = sorted((u.neighbors(a) | u.neighbors(c)) - {a, c})
    found: list[frozenset] = list(catalog.get(a, c)) if catalog is not None else []
    for size in range(min(max_sepset, len(pool)) + 1):
        for s in combinations(pool, size):
            deadline.check()
            fs = frozenset(s)
            if fs in found:
                continue
            if g2_test(table, a, c, s, cell_cap=cell_cap, adjust_dof=adjust_dof).independent(alpha):
                found.append(fs)
    return found


def triple_sepset_ratio(
    table: DiscreteTable,
    triple: tuple[int, int, int],
    u: MixedGraph,
    alpha: float = 0.05,
    max_sepset: int = 10,
    catalog: SepsetCatalog | None = None,
    **kwargs,
) -> TripleRatio:
    a, b, c = triple
    if not (u.adjacent(a, b) and u.adjacent(b, c)):
        raise ValueError(f"{triple} is not a triple of the skeleton")
    if u.adjacent(a, c):
        raise ValueError(f"triple {triple} is shielded")
    sets = pair_sepsets(table, a, c, u, alpha, max_sepset, catalog, **kwargs)
    ratio, hits = sepset_ratio(sets, b)
    return TripleRatio(triple, ratio, len(sets), hits)
