import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cascade_embedding.embedding import (Embedding, RateSVDEmbedding, best_rank_error, embed,
                                         format_embedding, normalize_rates, read_embedding,
                                         reconstruction_error, truncated_svd, write_embedding)
from cascade_embedding.inference import RateMatrix


def test_row_normalization():
    a = sp.csr_matrix(np.array([[2.0, 2.0, 0.0], [0.0, 0.0, 0.0], [1.0, 3.0, 0.0]]))
    out = normalize_rates(a).toarray()
    assert np.allclose(out, [[0.5, 0.5, 0], [0, 0, 0], [0.25, 0.75, 0]])
    assert np.array_equal(normalize_rates(a, "none").toarray(), a.toarray())


def test_symmetric_normalization_and_symmetrize():
    a = sp.csr_matrix(np.array([[0.0, 1.0], [4.0, 0.0]]))
    s = normalize_rates(a, "symmetric").toarray()
    assert np.allclose(s, [[0, 1 / 2], [2 / 1, 0]])
    assert np.allclose(normalize_rates(a, "none", symmetrize=True).toarray(),
                       [[0, 2.5], [2.5, 0]])
    with pytest.raises(ValueError):
        normalize_rates(a, "bogus")


def test_identity():
    svd = truncated_svd(np.eye(6), 6, 0)
    assert np.allclose(svd.sigma, 1.0)
    assert reconstruction_error(np.eye(6), svd) == pytest.approx(0.0, abs=1e-12)
    y = embed(sp.identity(6, format="csr"), 6, 0).vectors
    assert np.allclose((y ** 2).sum(axis=1), 1.0)


def test_rank_one():
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(30), rng.standard_normal(30)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    a = 3.5 * np.outer(u, v)
    svd = truncated_svd(a, 1, 0)
    assert svd.sigma[0] == pytest.approx(3.5, rel=1e-12)
    assert reconstruction_error(a, svd) == pytest.approx(0.0, abs=1e-12)
    # columns beyond the rank are exactly zero
    y = embed(a, 3, 0, normalization="none").vectors
    assert np.all(y[:, 1:] == 0.0)


@pytest.mark.parametrize("n, d", [(100, 10), (150, 5), (60, 30), (200, 64)])
def test_matches_full_svd(n, d):
    rng = np.random.default_rng(n + d)
    a = rng.standard_normal((n, n))
    full = np.linalg.svd(a, compute_uv=False)
    svd = truncated_svd(a, d, 1)
    assert np.allclose(svd.sigma, full[:d], rtol=1e-6, atol=0)
    assert reconstruction_error(a, svd) == pytest.approx(best_rank_error(full, d), rel=1e-6)
    assert np.allclose(svd.U.T @ svd.U, np.eye(d), atol=1e-8)
    assert np.allclose(svd.V.T @ svd.V, np.eye(d), atol=1e-8)
    assert np.all(np.diff(svd.sigma) <= 0)


def test_sparse_lanczos_path():
    # large enough to take the iterative branch
    a = sp.random(300, 300, density=0.05, random_state=np.random.RandomState(1), format="csr")
    full = np.linalg.svd(a.toarray(), compute_uv=False)
    svd = truncated_svd(a, 20, 3)
    assert np.allclose(svd.sigma, full[:20], rtol=1e-6)
    assert reconstruction_error(a, svd) == pytest.approx(best_rank_error(full, 20), rel=1e-6)


def test_error_non_increasing_in_d():
    a = np.random.default_rng(2).random((40, 40))
    errors = [reconstruction_error(a, truncated_svd(a, d, 0)) for d in range(1, 41, 3)]
    assert np.all(np.diff(errors) <= 1e-12)


def test_zero_matrix_and_rank_deficit():
    y = embed(RateMatrix.zeros(7), 4, 0).vectors
    assert y.shape == (7, 4) and np.all(y == 0)
    a = np.zeros((8, 8))
    a[0, 1] = a[2, 3] = 1.0
    svd = truncated_svd(a, 5, 0)
    assert svd.rank == 2
    assert np.allclose(svd.U.T @ svd.U, np.eye(5), atol=1e-8)


def test_sign_convention_and_determinism():
    a = np.random.default_rng(3).random((120, 120))
    s1, s2 = truncated_svd(a, 8, 5), truncated_svd(a, 8, 5)
    assert np.array_equal(s1.U, s2.U) and np.array_equal(s1.sigma, s2.sigma)
    for c in range(8):
        col = s1.U[:, c]
        first = col[np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]]
        assert first > 0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 4)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(3), 0)
    with pytest.raises(ValueError):
        truncated_svd(np.array([[np.nan, 1.0], [0.0, 1.0]]), 1)


def test_estimator_reconstructs_rank_d():
    rng = np.random.default_rng(4)
    a = sp.csr_matrix(rng.random((50, 50)) * (rng.random((50, 50)) < 0.3))
    a.setdiag(0)
    est = RateSVDEmbedding(n_components=8, random_state=0).fit(a)
    norm = normalize_rates(a).toarray()
    full = np.linalg.svd(norm, compute_uv=False)
    err = np.linalg.norm(norm - est.embedding_ @ est.components_)
    assert err == pytest.approx(best_rank_error(full, 8), rel=1e-6)
    assert np.allclose(est.transform(a), est.embedding_, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_embedding_file_round_trip(tmp_path_factory, n, d, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, d)) * 10.0 ** rng.integers(-5, 5)
    e = Embedding(v, [f"n{i}" for i in range(n)])
    p = tmp_path_factory.mktemp("emb") / "e.txt"
    write_embedding(e, p)
    back = read_embedding(p)
    assert back.labels == e.labels
    assert np.allclose(back.vectors, v, rtol=1e-8, atol=0)
    assert format_embedding(back) == p.read_text()


def test_embedding_file_errors(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 2\na 1 2\nb 3\n")
    with pytest.raises(ValueError, match="line 3"):
        read_embedding(p)
