"""Step-synchronous diffusion sampling and cascade formation.

A diffusion started from a seed keeps every visited node active. At each of
``K`` steps, every active node draws one out-neighbour uniformly at random;
drawn nodes that are not yet active become active with timestamp equal to the
drawer's timestamp plus a delay from a :class:`TimeModel`. The timestamps
restricted to an observation window ``[0, T]`` form a :class:`Cascade`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from .graph import Graph
from .rng import check_random_state, generator


class CascadeFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Exponential:
    """Delays with density ``rate * exp(-rate * t)`` on ``t > 0``."""

    rate: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class PowerLaw:
    """Delays with density ``(a - 1) * t**(-a)`` on ``t >= 1``."""

    exponent: float = 3.0

    def __post_init__(self):
        if not (self.exponent > 1 and math.isfinite(self.exponent)):
            raise ValueError(f"power-law exponent must exceed 1, got {self.exponent}")

    @property
    def mean(self) -> float:
        a = self.exponent
        return (a - 1) / (a - 2) if a > 2 else math.inf


TimeModel = Union[Exponential, PowerLaw]


def make_time_model(kind: str, param: float | None = None) -> TimeModel:
    """Build a time model from a CLI-style name (``exp`` or ``powerlaw``)."""
    kind = kind.lower()
    if kind in ("exp", "exponential"):
        return Exponential(1.0 if param is None else float(param))
    if kind in ("powerlaw", "power-law", "pl"):
        return PowerLaw(3.0 if param is None else float(param))
    raise ValueError(f"unknown time model {kind!r}")


_TWO53 = float(2 ** 53)


def _open_uniform(rng: np.random.Generator, size):
    # uniform on the open interval (0, 1)
    return (rng.integers(0, 2 ** 53, size=size).astype(np.float64) + 0.5) / _TWO53


def sample_delay(time_model: TimeModel, rng, size=None):
    """Draw transmission delays by inverse-CDF sampling.

    Exponential: ``-ln(u) / rate``. Power law: ``u ** (-1 / (a - 1))``,
    always at least 1. ``u`` is uniform on the open unit interval so every
    delay is strictly positive and finite.
    """
    rng = check_random_state(rng)
    u = _open_uniform(rng, size)
    if isinstance(time_model, Exponential):
        return -np.log(u) / time_model.rate
    if isinstance(time_model, PowerLaw):
        return u ** (-1.0 / (time_model.exponent - 1.0))
    raise TypeError(f"unsupported time model {time_model!r}")


@dataclass(frozen=True, eq=False)
class DiffusionTrace:
    """Outcome of one diffusion run.

    ``nodes`` lists infected nodes in activation order (seed first),
    ``times[k]`` is the first-infection time of ``nodes[k]`` and
    ``steps_activated[k]`` the step at which it joined the active set.
    """

    seed: int
    steps: int
    nodes: np.ndarray
    times: np.ndarray
    steps_activated: np.ndarray

    @property
    def first_infection_time(self) -> dict:
        return {int(v): float(t) for v, t in zip(self.nodes, self.times)}

    @property
    def active_sets(self) -> list[frozenset]:
        """``S^0 ... S^K`` as frozensets of node indices."""
        out = []
        for k in range(self.steps + 1):
            out.append(frozenset(int(v) for v in self.nodes[self.steps_activated <= k]))
        return out


def simulate_diffusion(graph: Graph, seed: int, steps: int, time_model: TimeModel,
                       rng=None) -> DiffusionTrace:
    """Run the memorised multi-walker diffusion from ``seed`` for ``steps`` steps.

    Per step, active nodes draw in activation order; each node with at least
    one out-neighbour consumes one uniform draw. Delays are drawn only for
    draws that hit inactive nodes. When several drawers hit the same new
    node, the smallest resulting timestamp wins, then the lower drawer index.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    n = graph.n_nodes
    if not 0 <= seed < n:
        raise IndexError(f"seed {seed} out of range [0, {n})")
    rng = check_random_state(rng)
    indptr, indices = graph.indptr, graph.indices
    degree = np.diff(indptr)

    active = np.zeros(n, dtype=bool)
    time = np.zeros(n)
    order = [np.array([seed], dtype=np.int64)]
    step_of = [np.zeros(1, dtype=np.int64)]
    active[seed] = True
    drawers_all = order[0]
    for k in range(1, steps + 1):
        drawers = drawers_all[degree[drawers_all] > 0]
        if not len(drawers):
            break
        deg = degree[drawers]
        offset = np.minimum((rng.random(len(drawers)) * deg).astype(np.int64), deg - 1)
        picked = indices[indptr[drawers] + offset]
        fresh = ~active[picked]
        if not fresh.any():
            continue
        src, dst = drawers[fresh], picked[fresh]
        t = time[src] + sample_delay(time_model, rng, size=len(dst))
        idx = np.lexsort((src, t, dst))
        dst, t = dst[idx], t[idx]
        first = np.ones(len(dst), dtype=bool)
        first[1:] = dst[1:] != dst[:-1]
        new, new_t = dst[first], t[first]
        active[new] = True
        time[new] = new_t
        order.append(new)
        step_of.append(np.full(len(new), k, dtype=np.int64))
        drawers_all = np.concatenate([drawers_all, new])
    nodes = np.concatenate(order)
    return DiffusionTrace(int(seed), int(steps), nodes, time[nodes], np.concatenate(step_of))


def random_walk(graph: Graph, start: int, length: int, rng=None) -> list[int]:
    """Uniform random walk of at most ``length`` nodes; stops at a dead end."""
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = check_random_state(rng)
    walk = [int(start)]
    v = graph.out_neighbors(start)
    while len(walk) < length and len(v):
        nxt = int(v[rng.integers(len(v))])
        walk.append(nxt)
        v = graph.out_neighbors(nxt)
    return walk


@dataclass(frozen=True, eq=False)
class Cascade:
    """First-infection times observed in ``[0, horizon]``.

    ``nodes`` and ``times`` are sorted by (time, node); the seed comes first
    with time 0. Nodes not listed are uninfected (infinite time).
    """

    seed: int
    horizon: float
    nodes: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        times = np.asarray(self.times, dtype=np.float64)
        if nodes.shape != times.shape or nodes.ndim != 1:
            raise ValueError("nodes and times must be matching 1-d arrays")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        idx = np.lexsort((nodes, times))
        nodes, times = nodes[idx], times[idx]
        if not len(nodes) or nodes[0] != self.seed or times[0] != 0:
            raise ValueError("cascade must start with its seed at time 0")
        if len(np.unique(nodes)) != len(nodes):
            raise ValueError("duplicate node in cascade")
        if np.any(times[1:] <= 0) or np.any(times > self.horizon) or not np.all(np.isfinite(times)):
            raise ValueError("non-seed times must lie in (0, horizon]")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_times(cls, seed: int, horizon: float, times: dict) -> "Cascade":
        keys = list(times)
        return cls(seed, horizon, np.array(keys, dtype=np.int64),
                   np.array([times[k] for k in keys], dtype=np.float64))

    @property
    def time_map(self) -> dict:
        return {int(v): float(t) for v, t in zip(self.nodes, self.times)}

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        if not isinstance(other, Cascade):
            return NotImplemented
        return (self.seed == other.seed and self.horizon == other.horizon
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.times, other.times))

    __hash__ = None


def formulate_cascade(trace: DiffusionTrace, horizon: float) -> Cascade:
    """Keep the trace entries with timestamp at most ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    keep = trace.times <= horizon
    return Cascade(trace.seed, horizon, trace.nodes[keep], trace.times[keep])


@dataclass(eq=False)
class CascadeSet:
    """Ordered cascades over ``n_nodes`` nodes.

    ``source_lines`` holds the file line of each cascade when parsed.
    """

    cascades: list
    n_nodes: int
    source_lines: list | None = None

    def __post_init__(self):
        for c in self.cascades:
            if len(c.nodes) and c.nodes.max() >= self.n_nodes:
                raise ValueError(f"cascade node out of range for n_nodes={self.n_nodes}")

    def __len__(self):
        return len(self.cascades)

    def __iter__(self) -> Iterator[Cascade]:
        return iter(self.cascades)

    def __getitem__(self, i):
        return self.cascades[i]

    def __eq__(self, other):
        if not isinstance(other, CascadeSet):
            return NotImplemented
        return self.n_nodes == other.n_nodes and self.cascades == other.cascades

    __hash__ = None

    def mean_size(self) -> float:
        return float(np.mean([len(c) for c in self.cascades])) if self.cascades else 0.0


def _cascades_for(graph, seeds, pass_index, steps, horizon, time_model, seed):
    out = []
    for v in seeds:
        rng = generator(seed, pass_index, int(v))
        trace = simulate_diffusion(graph, int(v), steps, time_model, rng)
        out.append(formulate_cascade(trace, horizon))
    return out


def generate_cascades(graph: Graph, steps: int = 40, horizon: float = 10.0,
                      passes: int = 1, time_model: TimeModel | None = None,
                      random_state: int = 0, n_jobs: int | None = None) -> CascadeSet:
    """Simulate ``passes * n_nodes`` cascades, one per node per pass.

    Pass ``p`` visits all nodes in a freshly shuffled order. Each cascade
    uses its own stream keyed by ``(random_state, p, node)``, so the result
    does not depend on ``n_jobs``.
    """
    if passes < 1:
        raise ValueError("passes must be at least 1")
    if time_model is None:
        time_model = Exponential(1.0)
    n = graph.n_nodes
    random_state = int(random_state)
    orders = [generator(random_state, p).permutation(n) for p in range(passes)]
    if n_jobs in (None, 1):
        chunks = [_cascades_for(graph, order, p, steps, horizon, time_model, random_state)
                  for p, order in enumerate(orders)]
    else:
        tasks = []
        for p, order in enumerate(orders):
            for part in np.array_split(order, max(1, min(n, 64))):
                tasks.append(delayed(_cascades_for)(graph, part, p, steps, horizon,
                                                    time_model, random_state))
        chunks = Parallel(n_jobs=n_jobs)(tasks)
    return CascadeSet([c for chunk in chunks for c in chunk], n)


def write_cascades(cascades: CascadeSet, path) -> None:
    """Write ``seed;horizon;node:time,...`` lines, 17 significant digits.

    A leading ``# nodes=N`` comment records the node count.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_cascades(cascades))


def format_cascades(cascades: CascadeSet) -> str:
    lines = [f"# nodes={cascades.n_nodes}"]
    for c in cascades:
        body = ",".join(f"{v}:{t:.17g}" for v, t in zip(c.nodes.tolist(), c.times.tolist()))
        lines.append(f"{c.seed};{c.horizon:.17g};{body}")
    return "\n".join(lines) + "\n"


def parse_cascades(text: str, n_nodes: int | None = None) -> CascadeSet:
    header_nodes = None
    cascades, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "nodes":
                try:
                    header_nodes = int(value)
                except ValueError:
                    raise CascadeFormatError("bad node-count header", lineno) from None
            continue
        parts = line.split(";")
        if len(parts) != 3:
            raise CascadeFormatError("expected 'seed;horizon;node:time,...'", lineno)
        try:
            seed = int(parts[0])
            horizon = float(parts[1])
            nodes, times = [], []
            for item in filter(None, parts[2].split(",")):
                v, t = item.split(":")
                nodes.append(int(v))
                times.append(float(t))
            cascades.append(Cascade(seed, horizon, np.array(nodes, dtype=np.int64),
                                    np.array(times, dtype=np.float64)))
            lines.append(lineno)
        except ValueError as exc:
            raise CascadeFormatError(str(exc), lineno) from None
    if n_nodes is None:
        n_nodes = header_nodes
    if n_nodes is None:
        n_nodes = 1 + max((int(c.nodes.max()) for c in cascades), default=-1)
    if any(int(c.nodes.min()) < 0 for c in cascades):
        raise CascadeFormatError("negative node index")
    return CascadeSet(cascades, n_nodes, lines)


def read_cascades(path, n_nodes: int | None = None) -> CascadeSet:
    with open(path, encoding="utf-8") as fh:
        return parse_cascades(fh.read(), n_nodes)
