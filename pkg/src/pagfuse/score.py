"""BDeu marginal likelihoods (natural log) and the interventional relative change."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .dataset import DiscreteTable, count
from .graphcore import MixedGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BdeuParams:
    alpha: float = 1.0  # equivalent sample size

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("BDeu equivalent sample size must be positive")


DEFAULT_BDEU = BdeuParams()


@dataclass(frozen=True)
class PairMarginals:
    log_empty: float  # A and B disconnected
    log_ab: float  # A -> B
    log_ba: float  # A <- B


def local_bdeu(
    table: DiscreteTable,
    node: int,
    parents: Sequence[int] = (),
    params: BdeuParams = DEFAULT_BDEU,
) -> float:
    """Log BDeu contribution of ``node`` given ``parents``.

    Parent configurations that never occur contribute exactly zero and are
    dropped before summation.
    """
    if table.n_rows == 0:
        raise ValueError("cannot score an empty table")
    parents = tuple(sorted(int(p) for p in parents))
    if node in parents:
        raise ValueError("node cannot be its own parent")

    def compute():
        counts = count(table, node, parents).counts
        q, r = counts.shape
        a_j = params.alpha / q
        a_jk = a_j / r
        n_ij = counts.sum(axis=1)
        seen = n_ij > 0
        n_ij = n_ij[seen].astype(np.float64)
        n_ijk = counts[seen].astype(np.float64)
        total = np.sum(gammaln(a_j) - gammaln(a_j + n_ij))
        total += np.sum(gammaln(a_jk + n_ijk) - gammaln(a_jk))
        return float(total)

    return table.memo(("bdeu", node, parents, params.alpha), compute)


def graph_bdeu(table: DiscreteTable, dag: MixedGraph, params: BdeuParams = DEFAULT_BDEU) -> float:
    if not dag.is_dag():
        raise ValueError("graph_bdeu needs a DAG")
    return float(sum(local_bdeu(table, v, dag.parents(v), params) for v in range(dag.n_nodes)))


def pair_marginals(
    table: DiscreteTable, a: int, b: int, params: BdeuParams = DEFAULT_BDEU
) -> PairMarginals:
    """Two-node log marginal likelihoods of the empty, a->b and b->a structures."""
    if a == b:
        raise ValueError("pair needs two distinct nodes")
    za, zb = local_bdeu(table, a, (), params), local_bdeu(table, b, (), params)
    return PairMarginals(
        log_empty=za + zb,
        log_ab=za + local_bdeu(table, b, (a,), params),
        log_ba=local_bdeu(table, a, (b,), params) + zb,
    )


def relative_change(z_obs: float, z_int: float) -> float:
    """``|(z_obs - z_int) / z_obs|``; 0 (with a warning) when ``z_obs`` is 0."""
    if z_obs == 0:
        log.warning("relative change undefined for a zero reference score; using 0")
        return 0.0
    return abs((z_obs - z_int) / z_obs)
