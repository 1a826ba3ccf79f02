"""Penalty-weighted comparison of a learnt PAG against the true MAG."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import combinations, product
from pathlib import Path
from typing import Callable, Mapping

from .graphcore import ARROW, CIRCLE, TAIL, Mark, MixedGraph, parse_marks, render_marks


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionTally:
    tp: float
    fp: float
    fn: float
    tn: float
    a: int  # edges in the true graph
    i: int  # non-adjacent pairs in the true graph
    n_nodes: int
    learnt_edges: int


def default_edge_credit(true_marks: tuple[Mark, Mark], pred_marks: tuple[Mark, Mark]) -> float:
    """TP credit for one edge present in both graphs.

    A predicted tail or arrow that disagrees with the true mark at the same
    endpoint earns nothing; otherwise each circle costs 0.25.
    """
    if CIRCLE in true_marks:
        raise MetricsError("true graph must not contain circle marks")
    circles = 0
    for t, p in zip(true_marks, pred_marks):
        if p is CIRCLE:
            circles += 1
        elif p is not t:
            return 0.0
    return 1.0 - 0.25 * circles


class PenaltyMatrix:
    """TP credit per (true marks, predicted marks); overridable entry by entry.

    ``overrides`` maps ``(true_token, predicted_token)`` such as
    ``("-->", "o->")`` to a credit.  Tokens describe marks from the first to
    the second endpoint of the pair.
    """

    def __init__(self, overrides: Mapping[tuple[str, str], float] | None = None):
        self._table: dict[tuple, float] = {}
        definite = [TAIL, ARROW]
        for tm in product(definite, repeat=2):
            for pm in product([TAIL, ARROW, CIRCLE], repeat=2):
                self._table[(tm, pm)] = default_edge_credit(tm, pm)
        for (t, p), credit in (overrides or {}).items():
            tm, pm = parse_marks(t), parse_marks(p)
            self._table[(tm, pm)] = float(credit)
            self._table[(tm[::-1], pm[::-1])] = float(credit)

    def __call__(self, true_marks, pred_marks) -> float:
        if CIRCLE in true_marks:
            raise MetricsError("true graph must not contain circle marks")
        return self._table[(tuple(true_marks), tuple(pred_marks))]

    @classmethod
    def load(cls, path) -> "PenaltyMatrix":
        """JSON list of ``{"true": "-->", "predicted": "o-o", "credit": 0.5}``."""
        rows = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({(r["true"], r["predicted"]): r["credit"] for r in rows})

    def rows(self) -> list[dict]:
        return [
            {"true": render_marks(t), "predicted": render_marks(p), "credit": c}
            for (t, p), c in sorted(self._table.items(), key=lambda kv: str(kv[0]))
        ]


DEFAULT_PENALTIES = PenaltyMatrix()


def score_edge(true_marks, pred_marks, penalties: Callable = DEFAULT_PENALTIES) -> float:
    return penalties(tuple(true_marks), tuple(pred_marks))


def compare(pag: MixedGraph, mag: MixedGraph, penalties: Callable = DEFAULT_PENALTIES) -> ConfusionTally:
    """Pairwise confusion tally; nodes are matched by name."""
    if set(pag.names) != set(mag.names) or len(pag.names) != len(mag.names):
        raise MetricsError(
            f"node sets differ: learnt {sorted(pag.names)} vs true {sorted(mag.names)}"
        )
    tp = fp = fn = tn = 0.0
    names = mag.names
    pidx = [pag.index(nm) for nm in names]
    for a, b in combinations(range(len(names)), 2):
        tm = mag.marks(a, b)
        pm = pag.marks(pidx[a], pidx[b])
        if tm is not None and pm is not None:
            credit = score_edge(tm, pm, penalties)
            tp += credit
            fn += 1.0 - credit
        elif tm is not None:
            fn += 1.0
        elif pm is not None:
            fp += 1.0
        else:
            tn += 1.0
    n = len(names)
    a_true = mag.n_edges()
    return ConfusionTally(tp, fp, fn, tn, a_true, n * (n - 1) // 2 - a_true, n, pag.n_edges())


def f1(tally: ConfusionTally) -> tuple[float, float, float]:
    """Precision, recall and their harmonic mean; empty denominators give 0."""
    precision = tally.tp / (tally.tp + tally.fp) if tally.tp + tally.fp > 0 else 0.0
    recall = tally.tp / tally.a if tally.a > 0 else 0.0
    return precision, recall, f1_from(precision, recall)


def f1_from(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def bsf(tally: ConfusionTally) -> float:
    if tally.a == 0 or tally.i == 0:
        raise MetricsError("balanced score needs at least one true edge and one true non-edge")
    return 0.5 * (tally.tp / tally.a + tally.tn / tally.i - tally.fp / tally.i - tally.fn / tally.a)


def evaluate(pag: MixedGraph, mag: MixedGraph, penalties: Callable = DEFAULT_PENALTIES) -> dict:
    """Metrics record with precision, recall, f1, bsf and the raw tallies."""
    t = compare(pag, mag, penalties)
    p, r, f = f1(t)
    out = {"precision": p, "recall": r, "f1": f}
    try:
        out["bsf"] = bsf(t)
    except MetricsError:
        out["bsf"] = None
    out.update({k: v for k, v in asdict(t).items() if k in ("tp", "fp", "fn", "tn")})
    out["learnt_edges"] = t.learnt_edges
    out["true_edges"] = t.a
    return out
