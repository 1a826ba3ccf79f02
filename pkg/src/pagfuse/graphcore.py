"""Mixed graphs with endpoint marks.

A single :class:`MixedGraph` type covers DAGs, CPDAGs, MAGs and PAGs; the
family is a matter of which mark pairs appear.  Nodes are dense integer
indices with unique string names.  Graph values are immutable: every
modifier returns a new graph.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence


class InvalidGraphError(ValueError):
    """Raised when a graph violates the structural contract of an operation."""


class Mark(enum.Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


TAIL, ARROW, CIRCLE = Mark.TAIL, Mark.ARROW, Mark.CIRCLE

class MixedGraph:
    """Nodes plus one optional edge per unordered pair, each carrying two marks.

    ``edges`` maps an ordered pair ``(a, b)`` to ``(mark at a, mark at b)``.
    Internally every edge is stored once under ``(min, max)``.
    """

    __slots__ = ("_names", "_index", "_edges", "_adj")

    def __init__(
        self,
        names: Sequence[str],
        edges: Mapping[tuple[int, int], tuple[Mark, Mark]] | Iterable = (),
    ):
        names = tuple(str(n) for n in names)
        if len(set(names)) != len(names):
            raise InvalidGraphError("node names must be unique")
        self._names = names
        self._index = {n: i for i, n in enumerate(names)}
        items = edges.items() if isinstance(edges, Mapping) else edges
        store: dict[tuple[int, int], tuple[Mark, Mark]] = {}
        adj: list[set[int]] = [set() for _ in names]
        n = len(names)
        for (a, b), (ma, mb) in items:
            if a == b:
                raise InvalidGraphError(f"self-loop on {names[a]}")
            if not (0 <= a < n and 0 <= b < n):
                raise InvalidGraphError(f"edge ({a}, {b}) references unknown node")
            key, marks = ((a, b), (ma, mb)) if a < b else ((b, a), (mb, ma))
            if key in store:
                raise InvalidGraphError(
                    f"more than one edge between {names[a]} and {names[b]}"
                )
            store[key] = (Mark(marks[0]), Mark(marks[1]))
            adj[a].add(b)
            adj[b].add(a)
        self._edges = store
        self._adj = tuple(frozenset(s) for s in adj)

    # construction helpers -------------------------------------------------

    @classmethod
    def from_directed(cls, names: Sequence[str], arcs: Iterable[tuple[int, int]]):
        return cls(names, [((a, b), (TAIL, ARROW)) for a, b in arcs])

    @classmethod
    def from_parents(cls, names: Sequence[str], parents: Mapping[int, Iterable[int]]):
        return cls.from_directed(names, [(p, c) for c, ps in parents.items() for p in ps])

    def with_edge(self, a: int, b: int, ma: Mark, mb: Mark) -> "MixedGraph":
        edges = dict(self.edges())
        edges.pop((a, b), None)
        edges.pop((b, a), None)
        edges[(a, b)] = (ma, mb)
        return MixedGraph(self._names, edges)

    def without_edge(self, a: int, b: int) -> "MixedGraph":
        key = (min(a, b), max(a, b))
        edges = {k: v for k, v in self._edges.items() if k != key}
        return MixedGraph(self._names, edges)

    def induced(self, keep: Iterable[int]) -> "MixedGraph":
        keep = sorted(set(keep))
        remap = {old: new for new, old in enumerate(keep)}
        edges = {
            (remap[a], remap[b]): m
            for (a, b), m in self._edges.items()
            if a in remap and b in remap
        }
        return MixedGraph([self._names[i] for i in keep], edges)

    # queries ----------------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def n_nodes(self) -> int:
        return len(self._names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown node {name!r}") from None

    def edges(self) -> dict[tuple[int, int], tuple[Mark, Mark]]:
        """Edges keyed by ``(a, b)`` with ``a < b``."""
        return dict(self._edges)

    def n_edges(self) -> int:
        return len(self._edges)

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def neighbors(self, a: int) -> frozenset[int]:
        return self._adj[a]

    def marks(self, a: int, b: int) -> tuple[Mark, Mark] | None:
        """Marks ``(at a, at b)`` of the edge between a and b, or None."""
        if a < b:
            return self._edges.get((a, b))
        m = self._edges.get((b, a))
        return None if m is None else (m[1], m[0])

    def is_directed(self, a: int, b: int) -> bool:
        """True iff ``a --> b``."""
        return self.marks(a, b) == (TAIL, ARROW)

    def is_bidirected(self, a: int, b: int) -> bool:
        return self.marks(a, b) == (ARROW, ARROW)

    def is_undirected(self, a: int, b: int) -> bool:
        return self.marks(a, b) == (TAIL, TAIL)

    def parents(self, v: int) -> list[int]:
        return sorted(u for u in self._adj[v] if self.is_directed(u, v))

    def children(self, v: int) -> list[int]:
        return sorted(u for u in self._adj[v] if self.is_directed(v, u))

    def directed_arcs(self) -> list[tuple[int, int]]:
        out = []
        for (a, b), (ma, mb) in sorted(self._edges.items()):
            if (ma, mb) == (TAIL, ARROW):
                out.append((a, b))
            elif (ma, mb) == (ARROW, TAIL):
                out.append((b, a))
        return out

    def ancestors(self, targets: Iterable[int]) -> set[int]:
        """Nodes with a directed path into ``targets`` (targets included)."""
        seen = set(targets)
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for u in self._adj[v]:
                if u not in seen and self.is_directed(u, v):
                    seen.add(u)
                    queue.append(u)
        return seen

    def descendants(self, sources: Iterable[int]) -> set[int]:
        seen = set(sources)
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for u in self._adj[v]:
                if u not in seen and self.is_directed(v, u):
                    seen.add(u)
                    queue.append(u)
        return seen

    def skeleton(self) -> "MixedGraph":
        return MixedGraph(self._names, {k: (TAIL, TAIL) for k in self._edges})

    def is_dag(self) -> bool:
        if any(m != (TAIL, ARROW) and m != (ARROW, TAIL) for m in self._edges.values()):
            return False
        return not _has_directed_cycle(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self._names == other._names and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._names, frozenset(self._edges.items())))

    def __repr__(self) -> str:
        body = ", ".join(
            f"{self._names[a]} {render_marks(m)} {self._names[b]}"
            for (a, b), m in sorted(self._edges.items())
        )
        return f"MixedGraph([{body}])"


# ---------------------------------------------------------------------------
# acyclicity


def _has_directed_cycle(g: MixedGraph) -> bool:
    indeg = [0] * g.n_nodes
    arcs = g.directed_arcs()
    out: list[list[int]] = [[] for _ in range(g.n_nodes)]
    for a, b in arcs:
        out[a].append(b)
        indeg[b] += 1
    queue = deque(v for v in range(g.n_nodes) if indeg[v] == 0)
    seen = 0
    while queue:
        v = queue.popleft()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return seen != g.n_nodes


def has_almost_directed_cycle(g: MixedGraph) -> bool:
    """True if ``g`` has a directed cycle, or ``A <-> B`` with B an ancestor of A."""
    if _has_directed_cycle(g):
        return True
    for (a, b), m in g.edges().items():
        if m == (ARROW, ARROW):
            if b in g.ancestors([a]) or a in g.ancestors([b]):
                return True
    return False


def topological_order(dag: MixedGraph) -> list[int]:
    """Kahn's algorithm; ties go to the lowest index."""
    if any(m not in ((TAIL, ARROW), (ARROW, TAIL)) for m in dag.edges().values()):
        raise InvalidGraphError("topological order requires a DAG")
    indeg = [0] * dag.n_nodes
    out: list[list[int]] = [[] for _ in range(dag.n_nodes)]
    for a, b in dag.directed_arcs():
        out[a].append(b)
        indeg[b] += 1
    heap = [v for v in range(dag.n_nodes) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) != dag.n_nodes:
        raise InvalidGraphError("graph contains a directed cycle")
    return order


def _require_dag(g: MixedGraph) -> list[int]:
    return topological_order(g)  # raises on cycles and non-directed marks


# ---------------------------------------------------------------------------
# DAG -> CPDAG


def dag_to_cpdag(dag: MixedGraph) -> MixedGraph:
    """Label every edge compelled or reversible (order-edges / find-compelled).

    Compelled edges keep their direction, reversible ones become ``---``.
    """
    order = _require_dag(dag)
    pos = {v: i for i, v in enumerate(order)}
    parents = [set(dag.parents(v)) for v in range(dag.n_nodes)]

    # order-edges: children by ascending topological position; for each child
    # parents by descending position.
    ordered: list[tuple[int, int]] = []
    for y in order:
        for x in sorted(parents[y], key=lambda p: -pos[p]):
            ordered.append((x, y))

    label: dict[tuple[int, int], str] = {e: "unknown" for e in ordered}
    for x, y in ordered:
        if label[(x, y)] != "unknown":
            continue
        done = False
        for w in parents[x]:
            if label[(w, x)] != "compelled":
                continue
            if w not in parents[y]:
                for p in parents[y]:
                    label[(p, y)] = "compelled"
                done = True
                break
            label[(w, y)] = "compelled"
        if done:
            continue
        has_z = any(z != x and z not in parents[x] for z in parents[y])
        status = "compelled" if has_z else "reversible"
        for p in parents[y]:
            if label[(p, y)] == "unknown":
                label[(p, y)] = status

    edges = {}
    for (x, y), lab in label.items():
        edges[(x, y)] = (TAIL, ARROW) if lab == "compelled" else (TAIL, TAIL)
    return MixedGraph(dag.names, edges)


# ---------------------------------------------------------------------------
# latent projection


def latent_project(dag: MixedGraph, latents: Iterable[int | str]) -> MixedGraph:
    """Marginalise ``latents`` out of ``dag`` into a MAG over the observed nodes.

    Observed A, B are adjacent iff an inducing path relative to the latents
    joins them; the edge is ``A --> B`` when A is an ancestor of B in the DAG
    and ``A <-> B`` when neither is an ancestor of the other.
    """
    lat = set()
    for v in latents:
        if isinstance(v, str):
            if v not in dag.names:
                raise ValueError(f"latent {v!r} is not a node of the graph")
            v = dag.index(v)
        if not 0 <= v < dag.n_nodes:
            raise ValueError(f"latent index {v} is not a node of the graph")
        lat.add(v)
    _require_dag(dag)
    observed = [v for v in range(dag.n_nodes) if v not in lat]
    if not lat:
        return MixedGraph(dag.names, dag.edges())

    anc = [frozenset(dag.ancestors([v])) for v in range(dag.n_nodes)]
    remap = {old: new for new, old in enumerate(observed)}
    edges = {}
    for a, b in combinations(observed, 2):
        if not _has_inducing_path(dag, a, b, lat, anc):
            continue
        if a in anc[b]:
            m = (TAIL, ARROW)
        elif b in anc[a]:
            m = (ARROW, TAIL)
        else:
            m = (ARROW, ARROW)
        edges[(remap[a], remap[b])] = m
    return MixedGraph([dag.names[v] for v in observed], edges)


def _has_inducing_path(dag, a, b, latents, anc) -> bool:
    """Depth-first enumeration of simple paths from a to b, pruned locally.

    Interior observed nodes must be colliders; every collider must be an
    ancestor of a or b.
    """
    if dag.adjacent(a, b):
        return True
    target_anc = anc[a] | anc[b]

    def arrow_into(u, v):  # edge u - v has an arrowhead at v
        return dag.is_directed(u, v)

    path = [a]
    on_path = {a}

    def extend(prev, cur) -> bool:
        # cur is an interior node reached from prev; try every next hop
        for nxt in sorted(dag.neighbors(cur)):
            if nxt in on_path:
                continue
            collider = arrow_into(prev, cur) and arrow_into(nxt, cur)
            if cur not in latents and not collider:
                continue
            if collider and cur not in target_anc:
                continue
            if nxt == b:
                return True
            on_path.add(nxt)
            path.append(nxt)
            if extend(cur, nxt):
                return True
            path.pop()
            on_path.discard(nxt)
        return False

    for first in sorted(dag.neighbors(a)):
        if first == b:
            return True
        on_path.add(first)
        if extend(a, first):
            return True
        on_path.discard(first)
    return False


# ---------------------------------------------------------------------------
# text format

_LEFT = {TAIL: "-", ARROW: "<", CIRCLE: "o"}
_RIGHT = {TAIL: "-", ARROW: ">", CIRCLE: "o"}
_LEFT_INV = {v: k for k, v in _LEFT.items()}
_RIGHT_INV = {v: k for k, v in _RIGHT.items()}


def render_marks(m: tuple[Mark, Mark]) -> str:
    return _LEFT[m[0]] + "-" + _RIGHT[m[1]]


def parse_marks(token: str) -> tuple[Mark, Mark]:
    if len(token) != 3 or token[1] != "-" or token[0] not in _LEFT_INV or token[2] not in _RIGHT_INV:
        raise ValueError(f"bad edge token {token!r}")
    return _LEFT_INV[token[0]], _RIGHT_INV[token[2]]


# mark pairs flipped on output so files read -->, o->, --o rather than <--, <-o, o--
_PREFERRED = {
    (ARROW, TAIL), (CIRCLE, TAIL), (ARROW, CIRCLE),
}


def iter_edge_lines(g: MixedGraph) -> Iterator[str]:
    for (a, b), m in sorted(g.edges().items()):
        if m in _PREFERRED:
            a, b, m = b, a, (m[1], m[0])
        yield f"{g.names[a]} {render_marks(m)} {g.names[b]}"


def format_graph(g: MixedGraph) -> str:
    lines = ["#nodes: " + ",".join(g.names)]
    lines.extend(iter_edge_lines(g))
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> MixedGraph:
    names: list[str] | None = None
    raw = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.lower().startswith("#nodes:"):
                body = line.split(":", 1)[1].strip()
                names = [n.strip() for n in body.split(",")] if body else []
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'A <marks> B', got {line!r}")
        raw.append((parts[0], parse_marks(parts[1]), parts[2]))
    if names is None:
        names = []
        for a, _, b in raw:
            for n in (a, b):
                if n not in names:
                    names.append(n)
    index = {n: i for i, n in enumerate(names)}
    edges = []
    for a, m, b in raw:
        if a not in index or b not in index:
            raise ValueError(f"edge {a} {render_marks(m)} {b} uses a node missing from the header")
        edges.append(((index[a], index[b]), m))
    return MixedGraph(names, edges)


def read_graph(path) -> MixedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def write_graph(g: MixedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_graph(g))
