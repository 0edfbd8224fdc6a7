import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stnmf import (
    DipsSpec,
    NoiseConfig,
    SolverConfig,
    add_noise,
    assignment_accuracy,
    generate_dips,
    harden,
    solve,
    spectral_cluster,
    symmetrize,
    to_skew,
    undirected_summarize,
)
from stnmf.baselines import BaselineResult, kmeans
from stnmf.synthetic import banded_pattern, chain_pattern


def two_cliques(a, b):
    n = a + b
    W = np.zeros((n, n))
    W[:a, :a] = 1
    W[a:, a:] = 1
    np.fill_diagonal(W, 0)
    W[a - 1, a] = W[a, a - 1] = 1
    return W


def test_spectral_two_cliques():
    res = spectral_cluster(two_cliques(5, 6), 2)
    assert assignment_accuracy(res.assignment, [0] * 5 + [1] * 6, 2) == 1.0
    assert res.method == "spectral"
    assert res.aux["eigenvalues"][0] == pytest.approx(0, abs=1e-10)


def test_spectral_misses_influence_groups():
    # the skeleton of a two-group block graph is complete bipartite
    lg = generate_dips(DipsSpec((10, 10), chain_pattern(2)), 0)
    W = symmetrize(lg.graph)
    accs = [assignment_accuracy(spectral_cluster(W, 2, s).assignment, lg.truth, 2) for s in range(10)]
    assert max(accs) < 1.0
    assert np.mean(accs) < 0.75


def test_spectral_k_equals_n():
    res = spectral_cluster(two_cliques(2, 2), 4)
    assert res.assignment.tolist() == [0, 1, 2, 3]


def test_spectral_isolated_vertices():
    W = np.zeros((6, 6))
    W[:3, :3] = 1
    np.fill_diagonal(W, 0)
    res = spectral_cluster(W, 2)
    assert res.aux["isolated"] == 3
    assert len(res.assignment) == 6


def test_spectral_rejects_bad_input():
    with pytest.raises(ValueError):
        spectral_cluster(np.array([[0.0, 1.0], [0.0, 0.0]]), 2)
    with pytest.raises(ValueError):
        spectral_cluster(np.eye(3), 2)
    with pytest.raises(ValueError):
        spectral_cluster(np.zeros((2, 2)), 3)


@given(st.integers(0, 500), st.sampled_from([1e-3, 0.5, 3.0, 7.25, 1e4]))
def test_spectral_scale_invariant(seed, c):
    lg = add_noise(generate_dips(DipsSpec((6, 7, 8), banded_pattern(3)), seed), NoiseConfig(0.2, 0.0, seed))
    W = symmetrize(lg.graph) * np.random.default_rng(seed).uniform(0.5, 2.0)
    W = (W + W.T) / 2
    a = spectral_cluster(W, 3, seed).assignment
    b = spectral_cluster(c * W, 3, seed).assignment
    assert np.array_equal(a, b)


def test_spectral_deterministic():
    W = two_cliques(7, 5)
    a, b = spectral_cluster(W, 3, 4), spectral_cluster(W, 3, 4)
    assert np.array_equal(a.assignment, b.assignment)
    assert a.aux == b.aux


def test_kmeans_separated_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(c, 0.05, (20, 2)) for c in [(0, 0), (3, 0), (0, 3)]])
    labels, inertia = kmeans(X, 3, seed=1)
    assert assignment_accuracy(labels, np.repeat([0, 1, 2], 20), 3) == 1.0
    centers = np.array([X[labels == j].mean(axis=0) for j in range(3)])
    assert inertia == pytest.approx(((X - centers[labels]) ** 2).sum(), rel=1e-12)


def test_kmeans_matches_scikit_learn():
    sk = pytest.importorskip("sklearn.cluster")
    rng = np.random.default_rng(3)
    X = rng.standard_normal((80, 3))
    _, ours = kmeans(X, 4, seed=0)
    ref = sk.KMeans(4, n_init=100, random_state=0).fit(X).inertia_
    assert ours <= ref * (1 + 1e-6)


def test_undirected_matches_directed_on_two_groups():
    for seed, sizes in enumerate([(4, 6), (7, 9), (10, 5)]):
        lg = generate_dips(DipsSpec(sizes, chain_pattern(2)), seed)
        cfg = SolverConfig(2, seed=seed)
        directed = harden(solve(to_skew(lg.graph), cfg).factors).assignment
        undirected = undirected_summarize(symmetrize(lg.graph), 2, cfg)
        assert assignment_accuracy(undirected.assignment, directed, 2) == 1.0
        assert assignment_accuracy(undirected.assignment, lg.truth, 2) == 1.0


@pytest.mark.parametrize("scheme", ["fixed", "adaptive"])
@pytest.mark.parametrize("iters", [1, 2, 5])
def test_undirected_relation_stays_symmetric(scheme, iters):
    lg = add_noise(generate_dips(DipsSpec((5, 6, 7), banded_pattern(3)), 1), NoiseConfig(0.2, 0.1, 2))
    res = undirected_summarize(symmetrize(lg.graph), 3, SolverConfig(3, scheme=scheme, max_iters=iters))
    S = np.array(res.aux["S"])
    assert np.abs(S - S.T).max() <= 1e-12
    assert res.aux["iters"] == iters


def test_undirected_zero_graph():
    res = undirected_summarize(np.zeros((5, 5)), 2, SolverConfig(2))
    assert res.aux["degenerate"] and res.aux["residual"] == 0.0
    assert len(res.assignment) == 5


def test_undirected_rejects_mismatch():
    with pytest.raises(ValueError):
        undirected_summarize(np.zeros((4, 4)), 3, SolverConfig(2))
    with pytest.raises(ValueError):
        undirected_summarize(np.triu(np.ones((3, 3)), 1), 2, SolverConfig(2))


def test_baseline_result_dict():
    d = BaselineResult("spectral", [0, 1], {"isolated": 0}).to_dict()
    assert d == {"method": "spectral", "assignment": [0, 1], "aux": {"isolated": 0}}
    with pytest.raises(ValueError):
        BaselineResult("wncut", [0])
