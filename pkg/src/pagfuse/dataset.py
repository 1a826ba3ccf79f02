"""Discrete data tables, the observational + interventional bundle, and counting."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

_table_ids = itertools.count()


class DataError(ValueError):
    """Invalid data file, manifest or schema."""


@dataclass(frozen=True)
class VariableSpec:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(self.states) < 2:
            raise DataError(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise DataError(f"variable {self.name!r} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class ContingencyCounts:
    """Counts ``n_ijk`` of a child given a parent configuration.

    ``counts[j, k]`` is the number of rows with parent configuration ``j``
    (mixed radix over ``parents`` in the given order, last parent fastest)
    and child state ``k``.
    """

    child: int
    parents: tuple[int, ...]
    counts: np.ndarray

    @property
    def q(self) -> int:
        return self.counts.shape[0]

    @property
    def parent_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)


class DiscreteTable:
    """An ``n x N`` matrix of state indices with its variable specs.

    Tables are immutable after construction; counts are memoised per
    ``(child, parents)`` behind a lock.
    """

    def __init__(self, variables: Sequence[VariableSpec], data, name: str = ""):
        self.variables = tuple(variables)
        arr = np.array(data, dtype=np.int64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != len(self.variables):
            raise DataError(
                f"data must be n x {len(self.variables)}, got shape {arr.shape}"
            )
        card = np.array([v.cardinality for v in self.variables], dtype=np.int64)
        if arr.size and ((arr < 0).any() or (arr >= card).any()):
            raise DataError("cell outside its variable's state range")
        arr.setflags(write=False)
        self.data = arr
        self.cardinalities = card
        self.name = name
        self.uid = next(_table_ids)
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown variable {name!r}") from None

    def config_index(self, cols: Sequence[int]) -> tuple[np.ndarray, int]:
        """Mixed-radix configuration index of ``cols`` for every row."""
        if not cols:
            return np.zeros(self.n_rows, dtype=np.int64), 1
        dims = tuple(int(self.cardinalities[c]) for c in cols)
        idx = np.ravel_multi_index(tuple(self.data[:, c] for c in cols), dims)
        return idx, int(np.prod(dims))

    def memo(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache.setdefault(key, value)
            return self._cache[key]

    def take_rows(self, rows) -> "DiscreteTable":
        return DiscreteTable(self.variables, self.data[rows], name=self.name)

    def drop_columns(self, cols: Iterable[int]) -> "DiscreteTable":
        drop = set(cols)
        keep = [i for i in range(len(self.variables)) if i not in drop]
        return DiscreteTable(
            [self.variables[i] for i in keep], self.data[:, keep], name=self.name
        )

    def __repr__(self):
        return f"DiscreteTable({self.name!r}, n={self.n_rows}, vars={self.names})"


def count(table: DiscreteTable, child: int, parents: Sequence[int] = ()) -> ContingencyCounts:
    """Exact ``n_ijk`` tallies of ``child`` against the ``parents`` configurations."""
    parents = tuple(int(p) for p in parents)
    if child in parents:
        raise ValueError("child cannot be one of its own parents")

    def compute():
        cfg, q = table.config_index(parents)
        r = int(table.cardinalities[child])
        flat = np.bincount(cfg * r + table.data[:, child], minlength=q * r)
        counts = flat.reshape(q, r)
        counts.setflags(write=False)
        return ContingencyCounts(child, parents, counts)

    return table.memo(("count", child, parents), compute)


# ---------------------------------------------------------------------------
# bundle


@dataclass
class InterventionalEntry:
    table: DiscreteTable
    targets: frozenset[int]


@dataclass
class DatasetBundle:
    """One observational table and an ordered list of interventional tables."""

    observational: DiscreteTable
    interventional: list[InterventionalEntry] = field(default_factory=list)

    def __post_init__(self):
        ref = self.observational.variables
        for k, entry in enumerate(self.interventional):
            if entry.table.variables != ref:
                raise DataError(f"interventional table {k} does not share the variable schema")
            for t in entry.targets:
                if not 0 <= t < len(ref):
                    raise DataError(f"interventional table {k}: target index {t} out of range")
        sizes = {self.observational.n_rows} | {e.table.n_rows for e in self.interventional}
        if len(sizes) > 1:
            log.warning(
                "data sets have unequal sample sizes %s; relative score changes assume equal sizes",
                sorted(sizes),
            )

    @property
    def variables(self) -> tuple[VariableSpec, ...]:
        return self.observational.variables

    @property
    def names(self) -> list[str]:
        return self.observational.names

    def reordered(self, order: Sequence[int]) -> "DatasetBundle":
        if sorted(order) != list(range(len(self.interventional))):
            raise ValueError("order must be a permutation of the interventional entries")
        return DatasetBundle(self.observational, [self.interventional[i] for i in order])


def read_csv_labels(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            row = [c.strip() for c in row]
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            if any(c == "" or c.upper() in ("NA", "NAN") for c in row):
                raise DataError(f"{path}:{lineno}: missing value")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, rows


def tables_from_labels(
    header: Sequence[str], label_tables: Sequence[Sequence[Sequence[str]]], names: Sequence[str] = ()
) -> list[DiscreteTable]:
    """Encode several label tables against the sorted union of their labels."""
    n_cols = len(header)
    states = []
    for c in range(n_cols):
        labels = set()
        for rows in label_tables:
            labels.update(r[c] for r in rows)
        ordered = tuple(sorted(labels))
        if len(ordered) < 2:
            raise DataError(f"variable {header[c]!r} has fewer than 2 observed states")
        states.append(ordered)
    variables = [VariableSpec(h, s) for h, s in zip(header, states)]
    lookups = [{s: i for i, s in enumerate(st)} for st in states]
    out = []
    for k, rows in enumerate(label_tables):
        arr = np.array(
            [[lookups[c][r[c]] for c in range(n_cols)] for r in rows], dtype=np.int64
        )
        out.append(DiscreteTable(variables, arr, name=names[k] if names else f"table{k}"))
    return out


def load_manifest(path) -> DatasetBundle:
    """Read the manifest JSON and every CSV it references."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if "observational" not in spec:
        raise DataError(f"{path}: missing 'observational' entry")
    base = path.parent

    obs_path = base / spec["observational"]
    header, obs_rows = read_csv_labels(obs_path)
    label_tables = [obs_rows]
    names = [str(spec["observational"])]
    targets = []
    for k, entry in enumerate(spec.get("interventional", [])):
        p = base / entry["path"]
        h, rows = read_csv_labels(p)
        if h != header:
            raise DataError(
                f"{p}: columns {h} do not match observational columns {header}"
            )
        tgt = entry.get("targets", [])
        for t in tgt:
            if t not in header:
                raise DataError(f"{p}: unknown intervention target {t!r}")
        label_tables.append(rows)
        names.append(str(entry["path"]))
        targets.append(frozenset(header.index(t) for t in tgt))

    tables = tables_from_labels(header, label_tables, names)
    return DatasetBundle(
        tables[0],
        [InterventionalEntry(t, tg) for t, tg in zip(tables[1:], targets)],
    )


def write_csv(table: DiscreteTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.names)
        labels = [v.states for v in table.variables]
        for row in table.data:
            w.writerow([labels[c][s] for c, s in enumerate(row)])


def read_csv(path, variables: Sequence[VariableSpec] | None = None) -> DiscreteTable:
    """Load one CSV; with ``variables`` given, encode against their fixed states."""
    header, rows = read_csv_labels(path)
    if variables is None:
        return tables_from_labels(header, [rows], [str(path)])[0]
    if header != [v.name for v in variables]:
        raise DataError(f"{path}: columns {header} do not match the expected schema")
    lookups = [{s: i for i, s in enumerate(v.states)} for v in variables]
    try:
        arr = np.array([[lookups[c][r[c]] for c in range(len(header))] for r in rows])
    except KeyError as exc:
        raise DataError(f"{path}: unknown state label {exc}") from None
    return DiscreteTable(variables, arr, name=str(path))
