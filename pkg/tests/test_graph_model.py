import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blindcomm import (
    AdjacencySample,
    Partition,
    PlantedPartitionParams,
    SbmModel,
    build_planted_partition,
    expected_adjacency,
    laplacian,
    sample_adjacency,
)
from blindcomm.graph_model import dense_laplacian


def test_planted_partition_degenerate():
    model = build_planted_partition(PlantedPartitionParams(4, 1.0, 0.0))
    np.testing.assert_array_equal(model.omega, [[1, 0], [0, 1]])
    np.testing.assert_array_equal(model.partition.labels, [0, 0, 1, 1])


def test_planted_partition_gamma_mapping():
    p = PlantedPartitionParams.from_gamma(100, 0.5)
    assert p.a == pytest.approx(4 * math.log(100) / 100)
    assert p.a == pytest.approx(0.18421, abs=5e-6)
    assert p.b == pytest.approx(0.5 * p.a)


def test_planted_partition_erdos_renyi():
    model = build_planted_partition(PlantedPartitionParams(6, 0.5, 0.5))
    assert np.all(model.omega == 0.5)


@pytest.mark.parametrize("n,a,b", [(5, 0.1, 0.1), (4, 1.2, 0.1), (4, 0.2, -0.1)])
def test_planted_partition_rejects(n, a, b):
    with pytest.raises(ValueError):
        PlantedPartitionParams(n, a, b)


def test_model_validation():
    part = Partition([0, 0, 1], 2)
    with pytest.raises(ValueError):
        SbmModel([[0.5, 0.1], [0.2, 0.5]], part)
    with pytest.raises(ValueError):
        SbmModel([[0.5]], part)
    with pytest.raises(ValueError):
        Partition([0, 2], 2)
    with pytest.raises(ValueError):
        SbmModel([[0.5, 0.1], [0.1, 0.5]], Partition([0, 0], 2))  # empty group


def test_indicator_rows():
    G = Partition([0, 2, 1, 2], 3).indicator()
    np.testing.assert_array_equal(G.sum(axis=1), 1)
    np.testing.assert_array_equal(G.argmax(axis=1), [0, 2, 1, 2])


def test_complete_and_empty_graphs():
    part = Partition.blocks(10, 2)
    full = sample_adjacency(SbmModel(np.ones((2, 2)), part), 1)
    assert full.num_edges == 45
    empty = sample_adjacency(SbmModel(np.zeros((2, 2)), part), 1)
    assert empty.num_edges == 0


def test_mean_edge_count():
    params = PlantedPartitionParams.from_gamma(100, 0.5)
    model = build_planted_partition(params)
    counts = np.array([sample_adjacency(model, (3, t)).num_edges for t in range(2000)], dtype=float)
    expected = 2 * math.comb(50, 2) * params.a + 2500 * params.b
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - expected) <= 4 * se


def test_pair_frequencies_match_omega():
    omega = np.array([[0.7, 0.2], [0.2, 0.4]])
    model = SbmModel(omega, Partition([0, 0, 0, 1, 1, 1], 2))
    draws = 4000
    freq = sum(expected_adjacency(model) * 0 + s.to_dense() for s in (sample_adjacency(model, (9, t)) for t in range(draws))) / draws
    P = expected_adjacency(model)
    off = ~np.eye(6, dtype=bool)
    sd = np.sqrt(P * (1 - P) / draws)
    assert np.all(np.abs(freq - P)[off] <= 5 * sd[off])
    assert np.all(np.diag(freq) == 0)


def test_fixed_seed_is_bit_identical():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(60, 0.3))
    a, b = sample_adjacency(model, 42), sample_adjacency(model, 42)
    assert a.rows.tobytes() == b.rows.tobytes() and a.cols.tobytes() == b.cols.tobytes()


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 30),
    p_in=st.floats(0, 1),
    p_out=st.floats(0, 1),
    seed=st.integers(0, 2**32),
)
def test_adjacency_invariants(n, p_in, p_out, seed):
    labels = np.arange(n) % 2
    k = 2 if n >= 2 else 1
    model = SbmModel([[p_in, p_out], [p_out, p_in]], Partition(labels, k))
    A = sample_adjacency(model, seed).to_dense()
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 0)
    assert np.all(np.isin(A, (0, 1)))
    L = dense_laplacian(AdjacencySample.from_dense(A))
    assert np.all(L.sum(axis=1) == 0)
    assert np.all(np.diag(L) >= 0)
    assert np.linalg.eigvalsh(L).min() >= -1e-10


def test_laplacian_examples():
    one_edge = AdjacencySample.from_dense([[0, 1], [1, 0]])
    np.testing.assert_array_equal(laplacian(one_edge).toarray(), [[1, -1], [-1, 1]])
    empty = AdjacencySample.from_dense(np.zeros((3, 3)))
    np.testing.assert_array_equal(laplacian(empty).toarray(), np.zeros((3, 3)))
    tri = AdjacencySample.from_dense(np.ones((3, 3)) - np.eye(3))
    np.testing.assert_array_equal(laplacian(tri).toarray(), [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])


def test_laplacian_sparse_matches_dense():
    model = build_planted_partition(PlantedPartitionParams.from_gamma(40, 0.4))
    adj = sample_adjacency(model, 5)
    np.testing.assert_array_equal(laplacian(adj).toarray(), dense_laplacian(adj))
    assert np.all(laplacian(adj) @ np.ones(40) == 0)


def test_expected_adjacency_examples():
    m1 = build_planted_partition(PlantedPartitionParams(4, 1.0, 0.0))
    np.testing.assert_array_equal(expected_adjacency(m1), np.kron(np.eye(2), np.ones((2, 2))))
    m2 = SbmModel([[0.3]], Partition([0, 0], 1))
    np.testing.assert_array_equal(expected_adjacency(m2), np.full((2, 2), 0.3))
    m3 = build_planted_partition(PlantedPartitionParams(4, 0.6, 0.2))
    np.testing.assert_allclose(
        expected_adjacency(m3),
        [[.6, .6, .2, .2], [.6, .6, .2, .2], [.2, .2, .6, .6], [.2, .2, .6, .6]],
    )


def test_edgelist_dump(tmp_path):
    adj = AdjacencySample.from_dense([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    path = tmp_path / "edges.txt"
    adj.write_edgelist(path)
    assert path.read_text() == "0 1\n0 2\n"
