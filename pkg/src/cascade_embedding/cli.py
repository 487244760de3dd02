"""Command-line interface.

Commands: ``sample``, ``infer``, ``embed``, ``evaluate``, ``pipeline`` and
``sweep``. Options may also come from a ``key=value`` file given with
``--config``; explicit flags override it. Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
import time
from dataclasses import dataclass

from . import rng as _rng
from ._validation import support_pattern
from .embedding import NORMALIZATIONS, Embedding, embed, read_embedding, write_embedding
from .evaluation import DEFAULT_RATIOS, EvalConfig, evaluate, write_report
from .graph import Graph, load_edge_list, load_labels
from .inference import (ImpossibleCascadeError, NonFiniteObjectiveError, SolverConfig,
                        best_threshold_recovery, fit_rates, read_rates, write_rates)
from .sampler import generate_cascades, make_time_model, read_cascades, write_cascades

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).split(",") if x.strip())


@dataclass(frozen=True)
class PipelineConfig:
    graph: str | None = None
    labels: str | None = None
    directed: bool = False
    steps: int = 40
    horizon: float = 10.0
    passes: int = 1
    time_model: str = "exp"
    time_param: float | None = None
    dim: int = 128
    seed: int = 0
    out: str | None = None
    max_iter: int = 2000
    step_size: float = 0.1
    tol: float = 1e-8
    initial_rate: float = 0.1
    prune_threshold: float = 1e-4
    support: str = "all"
    normalization: str = "row"
    symmetrize: bool = False
    ratios: tuple = DEFAULT_RATIOS
    repetitions: int = 10
    regularization: float = 1e-4
    jobs: int | None = None

    def __post_init__(self):
        checks = [
            (self.steps >= 0, "--steps must be >= 0"),
            (self.horizon > 0, "--horizon must be > 0"),
            (self.passes >= 1, "--passes must be >= 1"),
            (self.dim >= 1, "--dim must be >= 1"),
            (self.seed >= 0, "--seed must be >= 0"),
            (self.support in ("all", "graph"), "--support must be 'all' or 'graph'"),
            (self.normalization in NORMALIZATIONS, f"--normalization must be one of {NORMALIZATIONS}"),
            (self.repetitions >= 1, "--repetitions must be >= 1"),
            (all(0 < r < 1 for r in self.ratios) and len(self.ratios) > 0,
             "--ratios must lie in (0, 1)"),
        ]
        for ok, message in checks:
            if not ok:
                raise UsageError(message)
        try:
            self.time_model_obj
            self.solver
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def time_model_obj(self):
        return make_time_model(self.time_model, self.time_param)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(self.max_iter, self.step_size, self.tol, self.initial_rate,
                            self.prune_threshold)

    def stage_seed(self, stage: str) -> int:
        return _rng.stage_seed(self.seed, stage)


_TYPES = {
    "graph": str, "labels": str, "directed": _bool, "steps": int, "horizon": float,
    "passes": int, "time_model": str, "time_param": float, "dim": int, "seed": int, "out": str,
    "max_iter": int, "step_size": float, "tol": float, "initial_rate": float,
    "prune_threshold": float, "support": str, "normalization": str, "symmetrize": _bool,
    "ratios": _floats, "repetitions": int, "regularization": float, "jobs": int,
}


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines (``#`` comments allowed); keys may use dashes."""
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in _TYPES:
                raise UsageError(f"{path}:{lineno}: unknown or malformed setting {line!r}")
            try:
                values[key] = _TYPES[key](value.strip())
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def make_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for name in _TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return PipelineConfig(**values)


# ---------------------------------------------------------------------------
# file loading with data-error mapping


def _load(fn, path, *args):
    try:
        return fn(path, *args)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except (ValueError, OSError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _graph(cfg: PipelineConfig) -> Graph:
    if not cfg.graph:
        raise UsageError("--graph is required")
    return _load(load_edge_list, cfg.graph, cfg.directed)


def _require_out(cfg: PipelineConfig) -> str:
    if not cfg.out:
        raise UsageError("--out is required")
    return cfg.out


# ---------------------------------------------------------------------------
# stages


def cmd_sample(cfg: PipelineConfig, out=None) -> str:
    out = out or _require_out(cfg)
    graph = _graph(cfg)
    cascades = generate_cascades(graph, cfg.steps, cfg.horizon, cfg.passes, cfg.time_model_obj,
                                 cfg.stage_seed("sampler"), cfg.jobs)
    write_cascades(cascades, out)
    print(f"cascades: {len(cascades)}  mean infected size: {cascades.mean_size():.3f}")
    return out


def cmd_infer(cfg: PipelineConfig, cascade_path, out=None) -> str:
    out = out or _require_out(cfg)
    cascades = _load(read_cascades, cascade_path)
    if not len(cascades):
        raise DataError(f"{cascade_path}: no cascades")
    graph = _graph(cfg) if cfg.graph else None
    if cfg.support == "graph" and graph is None:
        raise UsageError("--support graph requires --graph")
    if graph is not None and graph.n_nodes != cascades.n_nodes:
        raise DataError(f"graph has {graph.n_nodes} nodes but cascades cover {cascades.n_nodes}")
    support = support_pattern(graph) if cfg.support == "graph" else None
    try:
        result = fit_rates(cascades, cfg.solver, support, n_jobs=cfg.jobs)
    except ImpossibleCascadeError as exc:
        line = None
        if exc.cascade_index is not None and cascades.source_lines:
            line = cascades.source_lines[exc.cascade_index]
        where = f"{cascade_path}:{line}" if line is not None else str(cascade_path)
        raise ImpossibleCascadeError(exc.cascade_index, exc.node) from RuntimeError(where)
    write_rates(result.rates, out)
    print(f"objective: {result.objective:.10g}  iterations: {result.n_iter}  "
          f"nonzero rates: {result.rates.matrix.nnz}")
    if graph is not None:
        thr, p, r = best_threshold_recovery(result.rates, graph.edges())
        print(f"support recovery vs graph: precision {p:.4f}  recall {r:.4f}  "
              f"(threshold {thr:.6g})")
    return out


def cmd_embed(cfg: PipelineConfig, rate_path, out=None) -> str:
    out = out or _require_out(cfg)
    rates = _load(read_rates, rate_path)
    labels = None
    if cfg.graph:
        graph = _graph(cfg)
        if graph.n_nodes != rates.n_nodes:
            raise DataError(f"graph has {graph.n_nodes} nodes but rates cover {rates.n_nodes}")
        labels = graph.labels
    if cfg.dim > rates.n_nodes:
        raise UsageError(f"--dim {cfg.dim} exceeds the node count {rates.n_nodes}")
    emb = embed(rates, cfg.dim, cfg.stage_seed("svd"), cfg.normalization, cfg.symmetrize, labels)
    write_embedding(emb, out)
    print(f"embedding: {emb.n_nodes} x {emb.dim}")
    return out


def cmd_evaluate(cfg: PipelineConfig, embedding_path, out=None):
    out = out or _require_out(cfg)
    if not cfg.labels:
        raise UsageError("--labels is required")
    emb: Embedding = _load(read_embedding, embedding_path)
    index = {label: i for i, label in enumerate(emb.labels)}
    labels = _load(load_labels, cfg.labels, index)
    config = EvalConfig(tuple(cfg.ratios), cfg.repetitions, cfg.regularization,
                        cfg.stage_seed("evaluation"))
    report = evaluate(emb, labels, config)
    write_report(report, out)
    print(report.format_table())
    return report


ARTIFACTS = ("cascades.txt", "rates.tsv", "embedding.txt", "report.csv")


def cmd_pipeline(cfg: PipelineConfig):
    """Run sample, infer, embed and (with labels) evaluate into the ``--out`` directory.

    Each stage reads the file written by the previous one, so the result is
    identical to running the four commands by hand with the same settings.
    """
    outdir = _require_out(cfg)
    os.makedirs(outdir, exist_ok=True)
    paths = [os.path.join(outdir, name) for name in ARTIFACTS]
    timings = {}
    t0 = time.perf_counter()
    cmd_sample(cfg, paths[0])
    timings["sample"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cmd_infer(cfg, paths[0], paths[1])
    timings["infer"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cmd_embed(cfg, paths[1], paths[2])
    timings["embed"] = time.perf_counter() - t0
    report = None
    if cfg.labels:
        t0 = time.perf_counter()
        report = cmd_evaluate(cfg, paths[2], paths[3])
        timings["evaluate"] = time.perf_counter() - t0
    logger.info("stage timings: %s", timings)
    return report


SWEEPABLE = {"passes": int, "horizon": float, "dim": int, "steps": int}


def cmd_sweep(cfg: PipelineConfig, param: str, values) -> str:
    """Run the pipeline once per value of ``param``; collect reports in ``sweep.csv``."""
    outdir = _require_out(cfg)
    if not cfg.labels:
        raise UsageError("sweep requires --labels")
    if param not in SWEEPABLE:
        raise UsageError(f"--param must be one of {sorted(SWEEPABLE)}")
    os.makedirs(outdir, exist_ok=True)
    rows = []
    for value in values:
        value = SWEEPABLE[param](value)
        sub = dataclasses.replace(cfg, **{param: value,
                                          "out": os.path.join(outdir, f"{param}-{value:g}")})
        print(f"== {param} = {value:g}")
        report = cmd_pipeline(sub)
        for ratio, metric, mean, std in report.rows():
            rows.append([param, f"{value:g}", f"{ratio:g}", metric, f"{mean:.6f}", f"{std:.6f}"])
    path = os.path.join(outdir, "sweep.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value", "ratio", "metric", "mean", "std"])
        w.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _shared(p: argparse.ArgumentParser):
    g = p.add_argument_group("shared options")
    g.add_argument("--config", help="key=value settings file; flags override it")
    g.add_argument("--graph", help="edge list, one 'src dst' pair per line")
    g.add_argument("--labels", help="'node<TAB>class' file")
    g.add_argument("--directed", action="store_const", const=True, default=None,
                   help="keep edge direction (default: undirected)")
    g.add_argument("--steps", type=int, help="diffusion steps K (default 40)")
    g.add_argument("--horizon", type=float, help="observation window T (default 10)")
    g.add_argument("--passes", type=int, help="cascades per node (default 1)")
    g.add_argument("--time-model", dest="time_model", choices=["exp", "powerlaw"])
    g.add_argument("--time-param", dest="time_param", type=float,
                   help="exponential rate (default 1) or power-law exponent (default 3)")
    g.add_argument("--dim", type=int, help="embedding dimension d (default 128)")
    g.add_argument("--seed", type=int, help="master random seed (default 0)")
    g.add_argument("--out", help="output file, or directory for pipeline/sweep")
    g.add_argument("--jobs", type=int, help="parallel workers")
    s = p.add_argument_group("solver")
    s.add_argument("--max-iter", dest="max_iter", type=int)
    s.add_argument("--step-size", dest="step_size", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--initial-rate", dest="initial_rate", type=float)
    s.add_argument("--prune-threshold", dest="prune_threshold", type=float)
    s.add_argument("--support", choices=["all", "graph"],
                   help="candidate pairs: all informative pairs, or graph arcs only")
    e = p.add_argument_group("embedding")
    e.add_argument("--normalization", choices=list(NORMALIZATIONS))
    e.add_argument("--symmetrize", action="store_const", const=True, default=None)
    v = p.add_argument_group("evaluation")
    v.add_argument("--ratios", type=_floats, help="comma-separated training ratios")
    v.add_argument("--repetitions", type=int)
    v.add_argument("--regularization", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cascade-embed", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    _shared(sub.add_parser("sample", help="simulate cascades"))
    p = sub.add_parser("infer", help="infer transmission rates from a cascade file")
    p.add_argument("cascades")
    _shared(p)
    p = sub.add_parser("embed", help="factor a rate file into node embeddings")
    p.add_argument("rates")
    _shared(p)
    p = sub.add_parser("evaluate", help="node classification on an embedding file")
    p.add_argument("embedding")
    _shared(p)
    _shared(sub.add_parser("pipeline", help="sample, infer, embed and evaluate"))
    p = sub.add_parser("sweep", help="pipeline over a grid of one parameter")
    p.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    p.add_argument("--values", required=True, type=_floats, help="comma-separated values")
    _shared(p)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = make_config(args)
        if args.command == "sample":
            cmd_sample(cfg)
        elif args.command == "infer":
            cmd_infer(cfg, args.cascades)
        elif args.command == "embed":
            cmd_embed(cfg, args.rates)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.embedding)
        elif args.command == "pipeline":
            cmd_pipeline(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.param, args.values)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ImpossibleCascadeError, NonFiniteObjectiveError) as exc:
        where = f" ({exc.__cause__})" if exc.__cause__ else ""
        print(f"numerical failure: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
