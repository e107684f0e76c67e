import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sonata.graphs import (
    AsymmetricGraphError,
    DigraphSnapshot,
    GraphModel,
    GraphSequence,
    WeightKind,
    build_metropolis_weights,
    build_push_sum_weights,
    check_b_strong_connectivity,
    load_custom_sequence,
    make_snapshot,
)


def ring(num_agents):
    return make_snapshot(num_agents, [(i, (i + 1) % num_agents) for i in range(num_agents)])


def test_ring_plus_random_out_degree_three_agents():
    seq = GraphSequence(GraphModel.RING_PLUS_RANDOM, 3, seed=4)
    for n in range(25):
        snap = seq.snapshot(n)
        # ring edge + one forced random edge + implicit self-loop
        assert all(snap.out_degree(i) == 3 for i in range(3))


def test_ring_plus_random_deterministic():
    seq = GraphSequence(GraphModel.RING_PLUS_RANDOM, 12, seed=99)
    assert seq.snapshot(7).edges == seq.snapshot(7).edges
    again = GraphSequence(GraphModel.RING_PLUS_RANDOM, 12, seed=99)
    assert all(seq.snapshot(n).edges == again.snapshot(n).edges for n in range(50))


def test_ring_plus_random_extra_edge_valid():
    seq = GraphSequence(GraphModel.RING_PLUS_RANDOM, 7, seed=0)
    for n in range(40):
        snap = seq.snapshot(n)
        for i in range(7):
            out = snap.out_neighbors(i) - {i, (i + 1) % 7}
            assert len(out) == 1
            (j,) = out
            assert j != i and j != (i + 1) % 7


def test_static_models_are_static():
    for model in (GraphModel.STATIC_STRONGLY_CONNECTED, GraphModel.STATIC_UNDIRECTED):
        seq = GraphSequence(model, 6, seed=1)
        assert seq.snapshot(5).edges == seq.snapshot(0).edges


def test_static_undirected_is_symmetric_path():
    seq = GraphSequence(GraphModel.STATIC_UNDIRECTED, 4)
    snap = seq.snapshot(0)
    assert snap.is_symmetric
    assert (0, 1) in snap.edges and (1, 0) in snap.edges
    assert (0, 2) not in snap.edges


def test_small_networks_rejected():
    with pytest.raises(ValueError):
        GraphSequence(GraphModel.RING_PLUS_RANDOM, 1)


def test_explicit_self_loop_rejected():
    with pytest.raises(ValueError):
        make_snapshot(3, [(0, 0)])


def test_edges_out_of_range_rejected():
    with pytest.raises(ValueError):
        make_snapshot(3, [(0, 5)])


def test_b_connectivity_ring_true_chain_false():
    assert check_b_strong_connectivity([ring(4)], 1)
    chain = make_snapshot(3, [(0, 1), (1, 2)])
    assert not check_b_strong_connectivity([chain], 1)


def test_b_connectivity_alternating_union():
    a = make_snapshot(2, [(0, 1)])
    b = make_snapshot(2, [(1, 0)])
    assert check_b_strong_connectivity([a, b, a, b], 2)
    assert not check_b_strong_connectivity([a, b], 1)


def test_b_connectivity_window_validation():
    with pytest.raises(ValueError):
        check_b_strong_connectivity([ring(3)], 0)
    with pytest.raises(ValueError):
        check_b_strong_connectivity([ring(3)], 2)


def test_ring_plus_random_single_slot_strongly_connected():
    seq = GraphSequence(GraphModel.RING_PLUS_RANDOM, 9, seed=13)
    snaps = [seq.snapshot(n) for n in range(30)]
    assert check_b_strong_connectivity(snaps, 1)


def test_push_sum_weights_ring():
    A = build_push_sum_weights(ring(3))
    assert A.kind is WeightKind.COLUMN_STOCHASTIC
    nz = A.entries[A.entries > 0]
    assert np.allclose(nz, 0.5)
    assert np.allclose(A.entries.sum(axis=0), 1.0, atol=1e-12)
    assert A.kappa == 0.5


def test_push_sum_weights_singleton():
    A = build_push_sum_weights(make_snapshot(1, []))
    assert A.entries.shape == (1, 1) and A.entries[0, 0] == 1.0


def test_push_sum_weights_complete_two_agents():
    A = build_push_sum_weights(make_snapshot(2, [(0, 1), (1, 0)]))
    assert np.allclose(A.entries, 0.5)
    assert np.allclose(A.entries.sum(axis=1), 1.0)  # also doubly stochastic here


def test_metropolis_single_edge():
    A = build_metropolis_weights(make_snapshot(2, [(0, 1), (1, 0)]))
    assert A.kind is WeightKind.DOUBLY_STOCHASTIC
    assert np.allclose(A.entries, 0.5)


def test_metropolis_empty_graph_is_identity():
    A = build_metropolis_weights(make_snapshot(3, []))
    assert np.allclose(A.entries, np.eye(3))


def test_metropolis_path_sums():
    A = build_metropolis_weights(GraphSequence(GraphModel.STATIC_UNDIRECTED, 3).snapshot(0))
    assert np.max(np.abs(A.entries.sum(axis=0) - 1)) <= 1e-12
    assert np.max(np.abs(A.entries.sum(axis=1) - 1)) <= 1e-12


def test_metropolis_rejects_asymmetric():
    with pytest.raises(AsymmetricGraphError):
        build_metropolis_weights(make_snapshot(3, [(0, 1)]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.integers(0, 500))
def test_push_sum_weights_compliant_and_stochastic(num_agents, seed, n):
    snap = GraphSequence(GraphModel.RING_PLUS_RANDOM, num_agents, seed=seed).snapshot(n)
    A = build_push_sum_weights(snap)
    assert np.max(np.abs(A.entries.sum(axis=0) - 1.0)) <= 1e-12
    # sparsity compliance: nonzero only on edges (j, i) or the diagonal
    for i in range(num_agents):
        for j in range(num_agents):
            if A.entries[i, j] > 0:
                assert i == j or (j, i) in snap.edges
            if A.entries[i, j] > 0:
                assert A.entries[i, j] >= A.kappa


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10))
def test_metropolis_stochastic_on_paths(num_agents):
    snap = GraphSequence(GraphModel.STATIC_UNDIRECTED, num_agents).snapshot(0)
    A = build_metropolis_weights(snap)
    assert np.max(np.abs(A.entries.sum(axis=0) - 1.0)) <= 1e-12
    assert np.max(np.abs(A.entries.sum(axis=1) - 1.0)) <= 1e-12
    assert A.entries.min() >= 0


def test_custom_sequence_round_trip(tmp_path):
    path = tmp_path / "seq.txt"
    path.write_text("0>1 1>2 2>0\n\n1>0\n")
    seq = load_custom_sequence(path, 3)
    assert seq.snapshot(0).edges == frozenset({(0, 1), (1, 2), (2, 0)})
    assert seq.snapshot(1).edges == frozenset()
    assert seq.snapshot(2).edges == frozenset({(1, 0)})
    # periodic continuation past the listed slots
    assert seq.snapshot(3).edges == seq.snapshot(0).edges


def test_custom_sequence_parse_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0>1 nonsense\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        load_custom_sequence(path, 3)


def test_weight_matrix_column_sum_validation():
    from sonata.graphs import WeightMatrix

    bad = np.array([[0.7, 0.0], [0.2, 1.0]])
    with pytest.raises(ValueError):
        WeightMatrix(bad, WeightKind.COLUMN_STOCHASTIC, kappa=0.2)
