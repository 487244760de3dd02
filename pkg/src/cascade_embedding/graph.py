"""Graph and label-table loading.

Graphs are stored in compressed sparse row form: the out-neighbours of node
``v`` are ``indices[indptr[v]:indptr[v + 1]]``, sorted ascending. External node
labels are mapped to dense indices in order of first appearance.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised when an edge list or label file cannot be parsed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{os.fspath(path)}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed adjacency structure.

    Parameters
    ----------
    indptr : ndarray of shape (n_nodes + 1,)
        Row pointer into ``indices``.
    indices : ndarray of shape (n_edges,)
        Concatenated sorted out-neighbour lists.
    labels : tuple of str
        External label of each dense index.
    directed : bool
        Whether the graph was loaded as directed.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple
    directed: bool = True
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        n = len(self.labels)
        if n < 1:
            raise ValueError("graph must have at least one node")
        if indptr.shape != (n + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("indptr is inconsistent with node count")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if len(indices) and (indices.min() < 0 or indices.max() >= n):
            raise ValueError("neighbour index out of range")
        index = {label: i for i, label in enumerate(self.labels)}
        if len(index) != n:
            raise ValueError("node labels must be distinct")
        indptr.setflags(write=False)
        indices.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n_nodes: int,
                   labels: Sequence[str] | None = None, directed: bool = True) -> "Graph":
        """Build a graph from dense-index edges.

        Self-loops are dropped and duplicates collapsed. With
        ``directed=False`` every edge is inserted in both directions.
        """
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(arr) and (arr.min() < 0 or arr.max() >= n_nodes):
            raise ValueError("edge endpoint out of range")
        if not directed:
            arr = np.vstack([arr, arr[:, ::-1]])
        arr = arr[arr[:, 0] != arr[:, 1]]
        if len(arr):
            arr = np.unique(arr, axis=0)
        counts = np.bincount(arr[:, 0], minlength=n_nodes) if len(arr) else np.zeros(n_nodes, np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        if labels is None:
            labels = [str(i) for i in range(n_nodes)]
        return cls(indptr, arr[:, 1].copy(), tuple(labels), directed)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        """Number of stored directed arcs."""
        return len(self.indices)

    @property
    def id_map(self) -> dict:
        """External label -> dense index."""
        return dict(self._index)

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def out_neighbors(self, v: int) -> np.ndarray:
        if not 0 <= v < self.n_nodes:
            raise IndexError(f"node index {v} out of range [0, {self.n_nodes})")
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> np.ndarray:
        """All arcs as an ``(n_edges, 2)`` array of dense indices."""
        src = np.repeat(np.arange(self.n_nodes), self.out_degrees())
        return np.column_stack([src, self.indices])

    def undirected_edge_count(self) -> int:
        """Number of distinct unordered node pairs joined by an arc."""
        e = self.edges()
        if not len(e):
            return 0
        return len(np.unique(np.sort(e, axis=1), axis=0))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.labels == other.labels and self.directed == other.directed
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.labels, self.directed, self.indices.tobytes()))


def out_neighbors(graph: Graph, v: int) -> np.ndarray:
    return graph.out_neighbors(v)


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_edge_list(path, directed: bool = False) -> Graph:
    """Read a whitespace-separated ``src dst`` edge list.

    Lines starting with ``#`` are ignored. Self-loops are dropped, duplicate
    edges collapsed, and for ``directed=False`` each edge is stored both ways.
    Nodes are indexed in order of first appearance.
    """
    index: dict[str, int] = {}
    edges = []
    for lineno, line in _content_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(
                f"expected 'src dst', got {len(parts)} field(s)", path, lineno)
        src, dst = (index.setdefault(p, len(index)) for p in parts)
        edges.append((src, dst))
    if not index:
        raise GraphFormatError("edge list contains no nodes", path)
    labels = [None] * len(index)
    for label, i in index.items():
        labels[i] = label
    return Graph.from_edges(edges, len(labels), labels, directed)


def write_edge_list(graph: Graph, path) -> None:
    """Write every arc (or each undirected pair once) as ``src<TAB>dst``."""
    e = graph.edges()
    if not graph.directed:
        e = e[e[:, 0] < e[:, 1]]
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in e:
            fh.write(f"{graph.labels[i]}\t{graph.labels[j]}\n")


@dataclass(frozen=True)
class LabelTable:
    """Class ids for a subset of graph nodes.

    ``nodes[k]`` has class ``classes[k]`` (entries keep file order);
    ``class_names[c]`` is the original string of class ``c``.
    """

    nodes: np.ndarray
    classes: np.ndarray
    class_names: tuple

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def labels(self) -> dict:
        return {int(n): int(c) for n, c in zip(self.nodes, self.classes)}

    def __len__(self):
        return len(self.nodes)


def load_labels(path, graph) -> LabelTable:
    """Read ``node<TAB>class`` lines; class strings become ids in first-seen order.

    ``graph`` is a :class:`Graph` or any mapping from node label to index.
    """
    index = graph._index if isinstance(graph, Graph) else graph
    class_ids: dict[str, int] = {}
    assigned: dict[int, str] = {}
    for lineno, line in _content_lines(path):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise GraphFormatError("expected 'node<TAB>class'", path, lineno)
        node, cls = parts[0].strip(), parts[1].strip()
        if node not in index:
            raise GraphFormatError(f"node {node!r} is not in the graph", path, lineno)
        v = index[node]
        if v in assigned:
            if assigned[v] != cls:
                raise GraphFormatError(
                    f"node {node!r} has conflicting classes {assigned[v]!r} and {cls!r}",
                    path, lineno)
            continue
        assigned[v] = cls
        class_ids.setdefault(cls, len(class_ids))
    if not assigned:
        raise GraphFormatError("label file contains no labels", path)
    nodes = np.fromiter(assigned.keys(), dtype=np.int64, count=len(assigned))
    classes = np.array([class_ids[c] for c in assigned.values()], dtype=np.int64)
    names = [None] * len(class_ids)
    for name, c in class_ids.items():
        names[c] = name
    return LabelTable(nodes, classes, tuple(names))
