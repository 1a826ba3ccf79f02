import json
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pagfuse.graphcore import ARROW, CIRCLE, TAIL, MixedGraph, latent_project, parse_marks
from pagfuse.metrics import (
    ConfusionTally,
    MetricsError,
    PenaltyMatrix,
    bsf,
    compare,
    evaluate,
    f1,
    f1_from,
    score_edge,
)

from .conftest import random_dag

DIR = (TAIL, ARROW)


@pytest.mark.parametrize(
    "true, predicted, credit",
    [
        ("-->", "<--", 0.0),
        ("-->", "o-o", 0.5),
        ("-->", "o->", 0.75),
        ("-->", "-->", 1.0),
        ("-->", "<->", 0.0),
        ("<->", "-->", 0.0),
        ("<->", "o->", 0.75),
        ("<->", "<-o", 0.75),
        ("-->", "--o", 0.75),
        ("-->", "---", 0.0),
    ],
)
def test_score_edge_table(true, predicted, credit):
    assert score_edge(parse_marks(true), parse_marks(predicted)) == credit


@pytest.mark.parametrize("true", ["-->", "<--", "<->", "---"])
def test_exact_match_scores_one(true):
    m = parse_marks(true)
    assert score_edge(m, m) == 1.0


def test_circle_in_truth_rejected():
    with pytest.raises(MetricsError):
        score_edge((CIRCLE, ARROW), DIR)


def test_penalty_override_and_load(tmp_path):
    custom = PenaltyMatrix({("-->", "o-o"): 0.3})
    assert score_edge(DIR, (CIRCLE, CIRCLE), custom) == 0.3
    # overrides apply to the mirrored pair too
    assert score_edge((ARROW, TAIL), (CIRCLE, CIRCLE), custom) == 0.3
    path = tmp_path / "p.json"
    path.write_text(json.dumps([{"true": "-->", "predicted": "o->", "credit": 1.0}]))
    loaded = PenaltyMatrix.load(path)
    assert score_edge(DIR, (CIRCLE, ARROW), loaded) == 1.0
    assert score_edge(DIR, (CIRCLE, CIRCLE), loaded) == 0.5
    assert len(loaded.rows()) == 4 * 9


ABCD = ["A", "B", "C", "D"]


def chain4():
    return MixedGraph.from_directed(ABCD, [(0, 1), (1, 2), (2, 3)])


def test_compare_identity_and_empty():
    mag = chain4()
    t = compare(mag, mag)
    assert (t.tp, t.fp, t.fn, t.tn, t.a, t.i) == (3, 0, 0, 3, 3, 3)
    assert bsf(t) == 1.0 and f1(t) == (1.0, 1.0, 1.0)
    e = compare(MixedGraph(ABCD), mag)
    assert (e.tp, e.fp, e.fn, e.tn) == (0, 0, 3, 3)
    assert bsf(e) == 0.0 and f1(e) == (0.0, 0.0, 0.0)


def test_complete_circle_graph():
    mag = chain4()
    full = MixedGraph(ABCD, {p: (CIRCLE, CIRCLE) for p in combinations(range(4), 2)})
    t = compare(full, mag)
    assert t.fp == t.i and t.tp == 0.5 * t.a


def test_bsf_worked_value():
    t = ConfusionTally(tp=2, fp=1, fn=1, tn=2, a=3, i=3, n_nodes=4, learnt_edges=3)
    assert bsf(t) == pytest.approx(1 / 3, abs=1e-15)


def test_bsf_degenerate():
    with pytest.raises(MetricsError):
        bsf(ConfusionTally(0, 0, 0, 1, 0, 1, 2, 0))
    with pytest.raises(MetricsError):
        bsf(ConfusionTally(0, 0, 1, 0, 1, 0, 2, 0))


def test_f1_examples():
    assert f1_from(1.0, 1.0) == 1.0
    assert f1_from(0.85, 0.84) == pytest.approx(0.84, abs=5e-3)
    assert f1_from(0.7, 0.0) == 0.0


def test_node_mismatch():
    with pytest.raises(MetricsError):
        compare(MixedGraph(["A", "B"]), MixedGraph(["A", "C"]))


def test_evaluate_record():
    rec = evaluate(chain4(), chain4())
    assert set(rec) == {"precision", "recall", "f1", "bsf", "tp", "fp", "fn", "tn", "learnt_edges", "true_edges"}
    assert rec["bsf"] == 1.0
    complete = MixedGraph.from_directed(["A", "B"], [(0, 1)])
    assert evaluate(complete, complete)["bsf"] is None


pag_marks = st.sampled_from([None, DIR, (ARROW, TAIL), (ARROW, ARROW), (CIRCLE, CIRCLE), (CIRCLE, ARROW), (ARROW, CIRCLE)])


@st.composite
def graph_pairs(draw):
    n = draw(st.integers(3, 7))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    dag = random_dag(rng, n + 1, 0.5)
    mag = latent_project(dag, [n])
    pairs = list(combinations(range(n), 2))
    marks = draw(st.lists(pag_marks, min_size=len(pairs), max_size=len(pairs)))
    pag = MixedGraph(mag.names, {p: m for p, m in zip(pairs, marks) if m})
    perm = draw(st.permutations(range(n)))
    return mag, pag, perm


def relabel(g, perm):
    names = [g.names[perm[i]] for i in range(g.n_nodes)]
    pos = {old: new for new, old in enumerate(perm)}
    return MixedGraph(names, {(pos[a], pos[b]): m for (a, b), m in g.edges().items()})


@settings(max_examples=150, deadline=None)
@given(graph_pairs())
def test_tally_invariants(data):
    mag, pag, perm = data
    t = compare(pag, mag)
    assert 0 <= t.tp <= t.a
    assert t.tp + t.fn == pytest.approx(t.a, abs=1e-9)
    assert t.tn + t.fp == pytest.approx(t.i, abs=1e-9)
    if t.a and t.i:
        assert -1.0 <= bsf(t) <= 1.0
        assert bsf(compare(MixedGraph(mag.names), mag)) == 0.0
    # permuting node order in both graphs changes nothing
    u = compare(relabel(pag, perm), relabel(mag, perm))
    assert (u.tp, u.fp, u.fn, u.tn) == (t.tp, t.fp, t.fn, t.tn)
    assert f1(u) == f1(t)
