"""Ground-truth Bayesian networks, sampling under perfect interventions, latents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import DiscreteTable, VariableSpec
from .graphcore import MixedGraph, latent_project, topological_order


class SpecError(ValueError):
    """Invalid network specification or intervention plan."""


@dataclass
class BayesNetSpec:
    """Discrete network: variables, parent lists and one CPT per node.

    ``cpts[v]`` has one row per parent configuration (mixed radix over
    ``parents[v]`` in listed order, last parent fastest) and one column per
    state of ``v``.
    """

    variables: list[VariableSpec]
    parents: dict[int, tuple[int, ...]]
    cpts: dict[int, np.ndarray]

    def __post_init__(self):
        n = len(self.variables)
        self.parents = {v: tuple(self.parents.get(v, ())) for v in range(n)}
        self.cpts = {v: np.asarray(self.cpts[v], dtype=np.float64) for v in range(n) if v in self.cpts}
        names = [v.name for v in self.variables]
        if len(set(names)) != n:
            raise SpecError("variable names must be unique")
        for v in range(n):
            if v not in self.cpts:
                raise SpecError(f"missing CPT for {names[v]}")
            q = int(np.prod([self.variables[p].cardinality for p in self.parents[v]]))
            cpt = self.cpts[v]
            if cpt.shape != (q, self.variables[v].cardinality):
                raise SpecError(
                    f"CPT of {names[v]} has shape {cpt.shape}, expected "
                    f"{(q, self.variables[v].cardinality)}"
                )
            if (cpt < 0).any() or not np.allclose(cpt.sum(axis=1), 1.0, atol=1e-9, rtol=0):
                raise SpecError(f"CPT rows of {names[v]} must be probability vectors")
        try:
            self._order = topological_order(self.dag())
        except ValueError:
            raise SpecError("parent structure contains a cycle") from None

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SpecError(f"unknown variable {name!r}") from None

    def dag(self) -> MixedGraph:
        return MixedGraph.from_parents(self.names, self.parents)

    @property
    def order(self) -> list[int]:
        return list(self._order)

    # JSON -----------------------------------------------------------------

    @classmethod
    def from_json(cls, obj: Mapping) -> "BayesNetSpec":
        try:
            variables = [VariableSpec(v["name"], v["states"]) for v in obj["variables"]]
            index = {v.name: i for i, v in enumerate(variables)}
            parents = {}
            for child, ps in obj.get("parents", {}).items():
                if child not in index:
                    raise SpecError(f"parents given for unknown variable {child!r}")
                for p in ps:
                    if p not in index:
                        raise SpecError(f"unknown parent {p!r} of {child!r}")
                parents[index[child]] = tuple(index[p] for p in ps)
            cpts = {}
            for child, rows in obj["cpts"].items():
                if child not in index:
                    raise SpecError(f"CPT given for unknown variable {child!r}")
                cpts[index[child]] = np.asarray(rows, dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed network JSON: {exc}") from None
        return cls(variables, parents, cpts)

    def to_json(self) -> dict:
        names = self.names
        return {
            "variables": [{"name": v.name, "states": list(v.states)} for v in self.variables],
            "parents": {names[v]: [names[p] for p in ps] for v, ps in self.parents.items() if ps},
            "cpts": {names[v]: self.cpts[v].tolist() for v in range(len(names))},
        }

    @classmethod
    def load(cls, path) -> "BayesNetSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def shipped_network(name: str) -> BayesNetSpec:
    """One of the bundled example networks (``clinic8``, ``confounded5``, ``collider3``)."""
    res = resources.files("pagfuse") / "networks" / f"{name}.json"
    if not res.is_file():
        raise SpecError(f"no shipped network called {name!r}")
    return BayesNetSpec.from_json(json.loads(res.read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# sampling


def _sample(spec: BayesNetSpec, n: int, seed, targets: frozenset[int]) -> DiscreteTable:
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = np.random.default_rng(seed)
    data = np.zeros((n, len(spec.variables)), dtype=np.int64)
    for v in spec.order:
        r = spec.variables[v].cardinality
        u = rng.random(n)
        if v in targets:
            cum = np.arange(1, r, dtype=np.float64) / r
            data[:, v] = (u[:, None] >= cum[None, :]).sum(axis=1)
            continue
        ps = spec.parents[v]
        if ps:
            dims = tuple(spec.variables[p].cardinality for p in ps)
            cfg = np.ravel_multi_index(tuple(data[:, p] for p in ps), dims)
        else:
            cfg = np.zeros(n, dtype=np.int64)
        cum = np.cumsum(spec.cpts[v], axis=1)[:, :-1]
        data[:, v] = (u[:, None] >= cum[cfg]).sum(axis=1)
    return DiscreteTable(spec.variables, data)


def forward_sample(spec: BayesNetSpec, n: int, seed=None) -> DiscreteTable:
    """Ancestral sampling; the same seed gives the same table."""
    return _sample(spec, n, seed, frozenset())


def intervene_sample(spec: BayesNetSpec, targets: Iterable, n: int, seed=None) -> DiscreteTable:
    """Sample after cutting the targets' incoming edges and forcing them uniform."""
    tg = frozenset(spec.index(t) if isinstance(t, str) else int(t) for t in targets)
    for t in tg:
        if not 0 <= t < len(spec.variables):
            raise SpecError(f"target index {t} out of range")
    return _sample(spec, n, seed, tg)


def mask_latents(table: DiscreteTable, latents: Iterable) -> DiscreteTable:
    """Drop latent columns, keeping the order of the rest."""
    idx = [table.index(v) if isinstance(v, str) else int(v) for v in latents]
    return table.drop_columns(idx)


def export_ground_truth(spec: BayesNetSpec, latents: Iterable) -> tuple[MixedGraph, MixedGraph]:
    """True DAG over all variables and its MAG over the observed ones."""
    idx = [spec.index(v) if isinstance(v, str) else int(v) for v in latents]
    dag = spec.dag()
    return dag, latent_project(dag, idx)


# ---------------------------------------------------------------------------
# plans


@dataclass
class PlanEntry:
    path: str
    targets: tuple[str, ...] = ()
    n: int = 1000
    seed: int = 0


@dataclass
class InterventionPlan:
    observational: PlanEntry
    interventional: list[PlanEntry] = field(default_factory=list)
    latents: tuple[str, ...] = ()

    def validate(self, spec: BayesNetSpec) -> None:
        names = set(spec.names)
        for v in self.latents:
            if v not in names:
                raise SpecError(f"unknown latent variable {v!r}")
        if self.observational.targets:
            raise SpecError("the observational entry cannot have targets")
        for k, e in enumerate(self.interventional, 1):
            for t in e.targets:
                if t not in names:
                    raise SpecError(f"interventional entry {k}: unknown target {t!r}")
                if t in self.latents:
                    raise SpecError(f"interventional entry {k}: target {t!r} is latent")
        for e in self.entries:
            if e.n < 1:
                raise SpecError(f"entry {e.path!r}: sample size must be >= 1")

    @property
    def entries(self) -> list[PlanEntry]:
        return [self.observational, *self.interventional]

    @classmethod
    def from_json(cls, obj: Mapping) -> "InterventionPlan":
        def entry(e, default_path):
            if isinstance(e, str):
                return PlanEntry(e)
            return PlanEntry(
                str(e.get("path", default_path)),
                tuple(e.get("targets", ())),
                int(e.get("n", 1000)),
                int(e.get("seed", 0)),
            )

        try:
            obs = entry(obj["observational"], "obs.csv")
            ints = [entry(e, f"int{k}.csv") for k, e in enumerate(obj.get("interventional", []), 1)]
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed plan JSON: {exc}") from None
        return cls(obs, ints, tuple(obj.get("latents", ())))

    def to_json(self) -> dict:
        def entry(e):
            return {"path": e.path, "targets": list(e.targets), "n": e.n, "seed": e.seed}

        return {
            "observational": entry(self.observational),
            "interventional": [entry(e) for e in self.interventional],
            "latents": list(self.latents),
        }

    @classmethod
    def load(cls, path) -> "InterventionPlan":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def simulate(spec: BayesNetSpec, plan: InterventionPlan) -> list[DiscreteTable]:
    """Observed tables for every plan entry, observational first."""
    plan.validate(spec)
    out = []
    for e in plan.entries:
        tab = intervene_sample(spec, e.targets, e.n, e.seed)
        out.append(mask_latents(tab, plan.latents))
    return out


def random_plan(
    spec: BayesNetSpec,
    n_interventional: int,
    n: int,
    seed,
    targets_per_set: int = 1,
    latents: Sequence[str] = (),
) -> InterventionPlan:
    """Uniformly random targets among observed variables, one seed per entry."""
    ss = np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss.spawn(1)[0])
    candidates = [v for v in spec.names if v not in set(latents)]
    if targets_per_set > len(candidates):
        raise SpecError("more targets per set than observed variables")
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(n_interventional + 1)]
    ints = []
    for k in range(n_interventional):
        tg = rng.choice(len(candidates), size=targets_per_set, replace=False)
        ints.append(
            PlanEntry(f"int{k + 1}.csv", tuple(candidates[i] for i in sorted(tg)), n, seeds[k + 1])
        )
    return InterventionPlan(PlanEntry("obs.csv", (), n, seeds[0]), ints, tuple(latents))


# ---------------------------------------------------------------------------
# random networks


def random_network(
    n_nodes: int,
    n_edges: int,
    seed,
    max_indegree: int = 2,
    cardinality: int | tuple[int, int] = 2,
    strength: tuple[float, float] = (0.75, 0.92),
    prefix: str = "X",
) -> BayesNetSpec:
    """Random DAG with strongly informative CPTs.

    Each CPT row puts mass ``uniform(*strength)`` on one dominant state; the
    dominant states vary across parent configurations so every parent
    matters.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_nodes)
    candidates = [(int(order[i]), int(order[j])) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    rng.shuffle(candidates)
    parents: dict[int, list[int]] = {v: [] for v in range(n_nodes)}
    added = 0
    for u, v in candidates:
        if added >= n_edges:
            break
        if len(parents[v]) < max_indegree:
            parents[v].append(u)
            added += 1
    lo, hi = (cardinality, cardinality) if isinstance(cardinality, int) else cardinality
    cards = [int(rng.integers(lo, hi + 1)) for _ in range(n_nodes)]
    variables = [
        VariableSpec(f"{prefix}{v}", tuple(f"s{k}" for k in range(cards[v]))) for v in range(n_nodes)
    ]
    cpts = {}
    for v in range(n_nodes):
        ps = sorted(parents[v])
        parents[v] = ps
        q = int(np.prod([cards[p] for p in ps])) if ps else 1
        r = cards[v]
        dominant = rng.integers(r, size=q)
        if q > 1 and len(set(dominant.tolist())) == 1:
            dominant[int(rng.integers(q))] = (dominant[0] + 1 + int(rng.integers(r - 1))) % r
        rows = np.zeros((q, r))
        for j in range(q):
            top = rng.uniform(*strength)
            rest = rng.dirichlet(np.ones(r - 1)) * (1 - top) if r > 2 else np.array([1 - top])
            rows[j, np.arange(r) != dominant[j]] = rest
            rows[j, dominant[j]] = top
        cpts[v] = rows
    return BayesNetSpec(variables, {v: tuple(ps) for v, ps in parents.items()}, cpts)
