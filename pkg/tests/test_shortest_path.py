import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instance
from gnmcal._accel import HAVE_NUMBA
from gnmcal._kernels import reach
from gnmcal.dataset import ModelDataset, PhysicalDataset
from gnmcal.graph import build_graph
from gnmcal.shortest_path import brute_force_shortest, path_cost, shortest_anchor_path


def _instance(seed, m=None, max_size=5, lam=None):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(2, 7))
    p, mo = random_instance(rng, m, max_size)
    lam = float(rng.uniform(0, 1)) if lam is None else lam
    return build_graph(p, mo, lam)


def test_unique_path():
    p = PhysicalDataset([0.0, 1.0, 2.0], [0.1, 0.2, 0.3])
    mo = ModelDataset([0.0, 1.0, 2.0], [0.5, 0.0, 1.0], [0.4, 0.2, 0.9])
    g = build_graph(p, mo, 0.5)
    path = shortest_anchor_path(g)
    assert path.anchors == (0, 1, 2)
    # 0 + (0.3 + 0.25) + (0 + 0.5) + 0
    assert path.total_cost == pytest.approx(1.05, abs=1e-15)


def test_two_by_one_hand_example():
    # a: y=1.0 mismatch 1.0; b: mismatch 0.2; lambda=0 isolates the response term
    p = PhysicalDataset([0.0, 1.0], [0.0, 0.0])
    mo = ModelDataset([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.2, 5.0])
    g = build_graph(p, mo, 0.0)
    path = shortest_anchor_path(g)
    assert path.anchors == (1, 2)
    assert path.total_cost == pytest.approx(0.2)


def test_two_by_two_hand_enumeration():
    p = PhysicalDataset([0.0, 1.0], [0.0, 0.0])
    mo = ModelDataset([0.0, 0.0, 1.0, 1.0], [0.0, 1.0, 0.2, 0.9], [0.3, 0.1, 0.0, 0.0])
    g = build_graph(p, mo, 1.0)
    # costs: (0,2) 0.3+0.2=0.5, (0,3) 0.3+0.9=1.2, (1,2) 0.1+0.8=0.9, (1,3) 0.1+0.1=0.2
    assert brute_force_shortest(g).anchors == (1, 3)
    assert brute_force_shortest(g).total_cost == pytest.approx(0.2)
    assert shortest_anchor_path(g).anchors == (1, 3)


def test_brute_force_lexicographic_ties():
    p = PhysicalDataset([0.0, 1.0], [0.0, 0.0])
    mo = ModelDataset([0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
    g = build_graph(p, mo, 1.0)
    assert brute_force_shortest(g).anchors == (0, 2)
    assert shortest_anchor_path(g).anchors == (0, 2)


def test_brute_force_cap():
    g = _instance(0, m=6, max_size=5)
    with pytest.raises(ValueError):
        brute_force_shortest(g, cap=10)


@pytest.mark.parametrize("seed", range(200))
def test_reaching_matches_brute_force(seed):
    g = _instance(seed)
    fast = shortest_anchor_path(g)
    slow = brute_force_shortest(g)
    assert abs(fast.total_cost - slow.total_cost) <= 1e-12
    for path in (fast, slow):
        assert len(path.anchors) == g.m
        for j, a in enumerate(path.anchors):
            assert g.partition.cluster_of[a] == j
        assert abs(path_cost(g, path.anchors) - path.total_cost) <= 1e-12 * max(1.0, path.total_cost)


@pytest.mark.parametrize("seed", range(20))
def test_local_exchange_certificate(seed):
    g = _instance(seed, max_size=8)
    path = shortest_anchor_path(g)
    best = path_cost(g, path.anchors)
    for j, cluster in enumerate(g.partition.clusters):
        for alt in cluster:
            swapped = list(path.anchors)
            swapped[j] = int(alt)
            assert path_cost(g, swapped) >= best - 1e-12


def test_relaxations_equal_edge_count_and_scale():
    g = _instance(3, m=5, max_size=4)
    assert shortest_anchor_path(g).relaxations == g.edge_count
    # doubling every cluster (duplicate each point) at fixed m
    mo = g.model
    mo2 = ModelDataset(np.repeat(mo.x, 2), np.repeat(mo.theta, 2), np.repeat(mo.y, 2))
    g2 = build_graph(g.physical, mo2, g.lam)
    r1 = shortest_anchor_path(g).relaxations
    r2 = shortest_anchor_path(g2).relaxations
    assert r2 <= 4 * r1


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("seed", range(30))
def test_numba_and_numpy_kernels_bit_identical(seed):
    g = _instance(seed, max_size=9)
    part = g.partition
    for terminal in (False, True):
        args = (part.offsets, part.members, g.model.y, g.model.theta, g.physical.y, g.lam, terminal)
        a = reach(*args, use_numba=True)
        b = reach(*args, use_numba=False)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        assert a[2:] == b[2:]


def test_scaling_invariance_of_argmin():
    for seed in range(30):
        g = _instance(seed, max_size=6)
        base = shortest_anchor_path(g).anchors
        for c in (0.1, 10.0):
            p = PhysicalDataset(g.physical.x, c * g.physical.y)
            mo = ModelDataset(g.model.x, g.model.theta, c * g.model.y)
            gc = build_graph(p, mo, c * g.lam)
            scaled = shortest_anchor_path(gc)
            assert brute_force_shortest(gc).total_cost == pytest.approx(scaled.total_cost, abs=1e-12)
            assert path_cost(gc, base) == pytest.approx(scaled.total_cost, rel=1e-12, abs=1e-12)
            # argmin set unchanged: the scaled optimum is optimal for the base graph too
            assert path_cost(g, scaled.anchors) == pytest.approx(path_cost(g, base), rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lambda_zero_picks_per_cluster_argmin(seed):
    g = _instance(seed, lam=0.0, max_size=6)
    path = shortest_anchor_path(g)
    for j in range(g.m - 1):
        c = g.partition.clusters[j]
        mismatch = np.abs(g.model.y[c] - g.physical.y[j])
        assert path.anchors[j] == int(c[np.argmin(mismatch)])


def test_large_lambda_minimizes_total_variation():
    for seed in range(10):
        g = _instance(seed, lam=1e6, max_size=5)
        path = shortest_anchor_path(g)
        tv = lambda a: np.sum(np.abs(np.diff(g.model.theta[list(a)])))
        import itertools
        best_tv = min(tv(c) for c in itertools.product(*(c.tolist() for c in g.partition.clusters)))
        assert tv(path.anchors) == pytest.approx(best_tv, abs=1e-9)
