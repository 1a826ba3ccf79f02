"""Command-line interface: simulate, learn, eval and bench.

Exit codes: 0 success, 2 invalid input or configuration, 3 time limit hit,
4 unexpected internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .cpdag_search import SearchConfig
from .dataset import DataError, DatasetBundle, InterventionalEntry, load_manifest, write_csv
from .deadline import Deadline, LearningTimeout
from .fusion import HyperParams, learn_pag
from .graphcore import InvalidGraphError, format_graph, read_graph
from .metrics import MetricsError, evaluate
from .score import BdeuParams
from .synth import (
    BayesNetSpec,
    InterventionPlan,
    SpecError,
    export_ground_truth,
    random_plan,
    simulate,
)

EXIT_OK, EXIT_INVALID, EXIT_TIMEOUT, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_TIMEOUT = 14400  # four hours

log = logging.getLogger("pagfuse")

INVALID_INPUT = (
    DataError,
    SpecError,
    InvalidGraphError,
    MetricsError,
    FileNotFoundError,
    json.JSONDecodeError,
    ValueError,
)


@dataclass(frozen=True)
class RunConfig:
    hyper: HyperParams = field(default_factory=HyperParams)
    search: SearchConfig = field(default_factory=SearchConfig)
    threads: int = 1
    timeout: float = DEFAULT_TIMEOUT
    seed: int = 0
    out: Path | None = None

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("--threads must be >= 1")
        if not self.timeout > 0:
            raise ValueError("--timeout must be positive")


# ---------------------------------------------------------------------------
# helpers


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(table, path) -> None:
    fd, tmp = tempfile.mkstemp(dir=Path(path).parent, suffix=".tmp")
    os.close(fd)
    try:
        write_csv(table, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_factors(text: str) -> frozenset:
    try:
        factors = frozenset(int(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"factors must look like '1,2,3', got {text!r}") from None
    if not factors or not factors <= {1, 2, 3}:
        raise argparse.ArgumentTypeError("factors must be a non-empty subset of 1,2,3")
    return factors


def _add_learning_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("learning")
    g.add_argument("--alpha-sig", type=float, default=0.05, help="CI test significance (default 0.05)")
    g.add_argument("--cutoff", type=float, default=0.5, help="posterior cut-off (default 0.5)")
    g.add_argument("--max-sepset", type=int, default=10, help="largest conditioning set (default 10)")
    g.add_argument("--ess", type=float, default=1.0, help="BDeu equivalent sample size (default 1)")
    g.add_argument("--factors", type=parse_factors, default=frozenset({1, 2, 3}), help="e.g. 1 or 1,2,3")
    g.add_argument(
        "--factor3",
        choices=("undirected-edge", "all"),
        default="undirected-edge",
        help="which target pairs receive a score change (default undirected-edge)",
    )
    g.add_argument(
        "--alternative",
        choices=("reverse", "empty"),
        default="reverse",
        help="structure a directed edge is weighed against in the update",
    )
    g.add_argument("--max-indegree", type=int, default=6)
    g.add_argument("--restarts", type=int, default=0, help="perturbed hill-climbing restarts")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds (default 14400)")


def config_from_args(args) -> RunConfig:
    bdeu = BdeuParams(args.ess)
    hyper = HyperParams(
        significance=args.alpha_sig,
        cutoff=args.cutoff,
        max_sepset=args.max_sepset,
        bdeu=bdeu,
        factors=args.factors,
        factor3_requires_edge=args.factor3 == "undirected-edge",
        alternative=args.alternative,
    )
    search = SearchConfig(
        max_indegree=args.max_indegree, restarts=args.restarts, params=bdeu, seed=args.seed
    )
    out = getattr(args, "out", None)
    return RunConfig(hyper, search, args.threads, args.timeout, args.seed, Path(out) if out else None)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    spec = BayesNetSpec.load(args.spec)
    plan = InterventionPlan.load(args.plan)
    tables = simulate(spec, plan)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for entry, table in zip(plan.entries, tables):
        _write_table(table, out / entry.path)
    manifest = {
        "observational": plan.observational.path,
        "interventional": [
            {"path": e.path, "targets": list(e.targets)} for e in plan.interventional
        ],
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    dag, mag = export_ground_truth(spec, plan.latents)
    atomic_write(out / "true_dag.txt", format_graph(dag))
    atomic_write(out / "true_mag.txt", format_graph(mag))
    print(f"wrote {len(tables)} data sets to {out}")
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = config_from_args(args)
    bundle = load_manifest(args.manifest)
    t0 = time.perf_counter()
    result = learn_pag(bundle, cfg.hyper, cfg.search, Deadline(cfg.timeout))
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    diagnostics = dict(result.diagnostics)
    diagnostics["runtime_s"] = elapsed
    diagnostics["config"] = {
        "alpha_sig": cfg.hyper.significance,
        "cutoff": cfg.hyper.cutoff,
        "max_sepset": cfg.hyper.max_sepset,
        "ess": cfg.hyper.bdeu.alpha,
        "factors": sorted(cfg.hyper.factors),
        "factor3_requires_edge": cfg.hyper.factor3_requires_edge,
        "alternative": cfg.hyper.alternative,
        "seed": cfg.seed,
        "version": __version__,
    }
    # nothing is written until learning has finished
    atomic_write(out / "pag.txt", format_graph(result.pag))
    atomic_write(out / "edge_probs.json", json.dumps(result.probs.to_json(), indent=1) + "\n")
    atomic_write(out / "diagnostics.json", json.dumps(diagnostics, indent=1) + "\n")
    print(f"learnt PAG with {result.pag.n_edges()} edges in {elapsed:.2f}s; wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pag = read_graph(args.pag)
    mag = read_graph(args.mag)
    text = json.dumps(evaluate(pag, mag), indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        atomic_write(args.out, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

BENCH_COLUMNS = [
    "n",
    "n_sets",
    "targets_per_set",
    "ordering",
    "repeat",
    "precision",
    "recall",
    "f1",
    "bsf",
    "learnt_edges",
    "runtime_s",
    "status",
    "error",
]
METRIC_COLUMNS = ["precision", "recall", "f1", "bsf", "learnt_edges", "runtime_s"]


@dataclass(frozen=True)
class Sweep:
    sample_sizes: tuple[int, ...] = (1000,)
    n_sets: tuple[int, ...] = (1,)
    targets_per_set: tuple[int, ...] = (1,)
    latents: tuple[str, ...] = ()
    repeats: int = 5
    orderings: int = 0  # > 0: that many shuffles of the interventional sets per repeat
    seed: int = 0

    @classmethod
    def from_json(cls, obj) -> "Sweep":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")

        def ints(key, default):
            v = obj.get(key, default)
            return tuple(int(x) for x in (v if isinstance(v, list) else [v]))

        sweep = cls(
            sample_sizes=ints("sample_sizes", [1000]),
            n_sets=ints("n_sets", [1]),
            targets_per_set=ints("targets_per_set", [1]),
            latents=tuple(obj.get("latents", ())),
            repeats=int(obj.get("repeats", 5)),
            orderings=int(obj.get("orderings", 0)),
            seed=int(obj.get("seed", 0)),
        )
        if sweep.repeats < 1 or sweep.orderings < 0:
            raise ValueError("repeats must be >= 1 and orderings >= 0")
        if min(sweep.sample_sizes) < 1 or min(sweep.n_sets) < 0 or min(sweep.targets_per_set) < 1:
            raise ValueError("sample sizes, set counts and target counts must be positive")
        return sweep

    def cells(self) -> list[tuple[int, int, int]]:
        return list(product(self.sample_sizes, self.n_sets, self.targets_per_set))


def _bench_run(task) -> list[dict]:
    """One (cell, repeat): simulate, learn (per ordering) and evaluate."""
    spec_json, sweep, cell_idx, (n, n_sets, tps), repeat, hyper, search, timeout = task
    spec = BayesNetSpec.from_json(spec_json)
    seq = np.random.SeedSequence([sweep.seed, cell_idx, repeat])
    data_seed, order_seed = seq.spawn(2)
    base = {"n": n, "n_sets": n_sets, "targets_per_set": tps, "repeat": repeat}
    rows = []
    try:
        plan = random_plan(spec, n_sets, n, int(data_seed.generate_state(1)[0]), tps, sweep.latents)
        tables = simulate(spec, plan)
        _, mag = export_ground_truth(spec, plan.latents)
        names = tables[0].names
        entries = [
            InterventionalEntry(t, frozenset(names.index(v) for v in e.targets))
            for t, e in zip(tables[1:], plan.interventional)
        ]
        bundle = DatasetBundle(tables[0], entries)
    except Exception as exc:  # recorded, not raised
        return [{**base, "ordering": "", "status": "E", "error": f"{type(exc).__name__}: {exc}"}]

    rng = np.random.default_rng(order_seed)
    orders = [("", list(range(n_sets)))]
    if sweep.orderings:
        orders = [(k, list(rng.permutation(n_sets))) for k in range(sweep.orderings)]
    for label, order in orders:
        row = {**base, "ordering": label, "error": ""}
        t0 = time.perf_counter()
        try:
            result = learn_pag(bundle.reordered(order), hyper, search, Deadline(timeout))
            metrics = evaluate(result.pag, mag)
            row.update({k: metrics[k] for k in ("precision", "recall", "f1", "bsf", "learnt_edges")})
            row["status"] = "ok"
        except LearningTimeout as exc:
            row.update(status="T", error=str(exc))
        except Exception as exc:
            row.update(status="E", error=f"{type(exc).__name__}: {exc}")
        row["runtime_s"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_bench(spec: BayesNetSpec, sweep: Sweep, cfg: RunConfig) -> list[dict]:
    """Per-run rows followed by one mean row per cell (over successful runs)."""
    tasks = [
        (spec.to_json(), sweep, ci, cell, r, cfg.hyper, cfg.search, cfg.timeout)
        for ci, cell in enumerate(sweep.cells())
        for r in range(sweep.repeats)
    ]
    if cfg.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_bench_run, tasks))
    else:
        results = [_bench_run(t) for t in tasks]

    rows = [row for chunk in results for row in chunk]
    means = []
    for n, n_sets, tps in sweep.cells():
        cell_rows = [
            r for r in rows if (r["n"], r["n_sets"], r["targets_per_set"]) == (n, n_sets, tps)
        ]
        ok = [r for r in cell_rows if r["status"] == "ok"]
        mean = {"n": n, "n_sets": n_sets, "targets_per_set": tps, "ordering": "", "repeat": "mean"}
        for col in METRIC_COLUMNS:
            vals = [r[col] for r in ok if r.get(col) is not None]
            mean[col] = float(np.mean(vals)) if vals else ""
        mean["status"] = "ok" if len(ok) == len(cell_rows) else f"{len(ok)}/{len(cell_rows)} ok"
        mean["error"] = ""
        means.append(mean)
    return rows + means


def bench_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: row.get(k, "") for k in BENCH_COLUMNS})
    return buf.getvalue()


def cmd_bench(args) -> int:
    cfg = config_from_args(args)
    spec = BayesNetSpec.load(args.spec)
    sweep = Sweep.from_json(json.loads(Path(args.sweep).read_text(encoding="utf-8")))
    for v in sweep.latents:
        spec.index(v)
    text = bench_csv(run_bench(spec, sweep, cfg))
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagfuse",
        description="Learn PAGs from observational and interventional discrete data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample data sets from a network and a plan")
    p.add_argument("spec", help="network JSON")
    p.add_argument("plan", help="intervention plan JSON")
    p.add_argument("outdir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="learn a PAG from a manifest of CSV files")
    p.add_argument("manifest")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    _add_learning_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="score a learnt PAG against the true MAG")
    p.add_argument("pag")
    p.add_argument("mag")
    p.add_argument("--out", help="also write the metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a simulate/learn/eval sweep")
    p.add_argument("spec", help="network JSON")
    p.add_argument("sweep", help="sweep JSON")
    p.add_argument("--out", help="CSV path (default: stdout)")
    _add_learning_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except LearningTimeout as exc:
        print(f"pagfuse: timed out: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except INVALID_INPUT as exc:
        print(f"pagfuse: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"pagfuse: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
