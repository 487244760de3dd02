import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_embedding.graph import (Graph, GraphFormatError, load_edge_list, load_labels,
                                     out_neighbors, write_edge_list)


def test_fig1_out_neighbors(fig1_path):
    g = load_edge_list(fig1_path, directed=True)
    v1 = g.index_of("v1")
    assert [g.labels[u] for u in out_neighbors(g, v1)] == ["v2"]
    assert sorted(g.labels[u] for u in g.out_neighbors(g.index_of("v3"))) == ["v2", "v4"]


def test_undirected_loading_stores_both_directions(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# comment\na b\n\nb c\na b\nc c\n")
    g = load_edge_list(p)
    assert g.n_nodes == 3
    assert g.undirected_edge_count() == 2     # duplicate and self-loop dropped
    assert g.n_edges == 4
    assert g.out_degrees().sum() == 2 * g.undirected_edge_count()


def test_directed_flag_preserves_direction(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a b\nb c\n")
    g = load_edge_list(p, directed=True)
    assert list(g.out_neighbors(g.index_of("c"))) == []
    assert g.n_edges == 2


def test_bad_line_reports_line_number(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a b\nb c d\n")
    with pytest.raises(GraphFormatError) as err:
        load_edge_list(p)
    assert err.value.line == 2
    assert ":2:" in str(err.value)


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# nothing\n")
    with pytest.raises(GraphFormatError):
        load_edge_list(p)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_edge_list("/nonexistent/edges.txt")


def test_out_of_range_neighbor_query(fig1_graph):
    with pytest.raises(IndexError):
        fig1_graph.out_neighbors(4)


def test_graph_is_immutable(fig1_graph):
    with pytest.raises(ValueError):
        fig1_graph.indices[0] = 3


def test_write_round_trip(tmp_path, fig1_path):
    for directed in (True, False):
        g = load_edge_list(fig1_path, directed=directed)
        out = tmp_path / f"out{directed}.txt"
        write_edge_list(g, out)
        assert load_edge_list(out, directed=directed) == g


def test_labels(tmp_path, fig1_path):
    g = load_edge_list(fig1_path)
    p = tmp_path / "labels.txt"
    p.write_text("v3\tB\nv1\tA\nv2 B\nv1\tA\n")
    table = load_labels(p, g)
    assert table.class_count == 2
    assert table.class_names == ("B", "A")
    assert table.labels == {g.index_of("v3"): 0, g.index_of("v1"): 1, g.index_of("v2"): 0}
    assert set(np.unique(table.classes)) == set(range(table.class_count))


@pytest.mark.parametrize("text, line", [("v1\tA\nv9\tB\n", 2), ("v1\tA\nv1\tB\n", 2),
                                        ("v1 A extra\n", 1)])
def test_label_errors(tmp_path, fig1_path, text, line):
    g = load_edge_list(fig1_path)
    p = tmp_path / "labels.txt"
    p.write_text(text)
    with pytest.raises(GraphFormatError) as err:
        load_labels(p, g)
    assert err.value.line == line


edge_lists = st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=30)


@settings(max_examples=60, deadline=None)
@given(edge_lists, st.booleans())
def test_from_edges_invariants(edges, directed):
    g = Graph.from_edges(edges, 8, directed=directed)
    arcs = {tuple(e) for e in g.edges().tolist()}
    expected = {(i, j) for i, j in edges if i != j}
    if not directed:
        expected |= {(j, i) for i, j in expected}
    assert arcs == expected
    for v in range(8):
        nb = g.out_neighbors(v)
        assert np.all(np.diff(nb) > 0)
    if not directed:
        assert g.out_degrees().sum() == 2 * g.undirected_edge_count()
