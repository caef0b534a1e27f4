"""Layered DAG over model points, one layer per physical input."""
from dataclasses import dataclass

import numpy as np

from ._kernels import SOURCE
from .dataset import ModelDataset, PhysicalDataset


class EmptyClusterError(ValueError):
    """A physical input has no model point nearer to it than to any other."""

    def __init__(self, j, x):
        self.j = j
        self.x = x
        super().__init__(f"cluster {j} is empty: no model point is nearest to physical x={x!r}")


@dataclass(frozen=True, eq=False)
class ClusterPartition:
    """Model indices grouped by nearest physical input.

    ``clusters[j]`` holds the (ascending) model indices of layer ``j`` and
    ``cluster_of[i]`` the layer of model point ``i``. Indices are 0-based.
    """

    clusters: tuple
    cluster_of: np.ndarray

    @property
    def m(self):
        return len(self.clusters)

    @property
    def sizes(self):
        return np.array([c.size for c in self.clusters], dtype=np.int64)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    @property
    def members(self):
        return np.concatenate(self.clusters).astype(np.int64)


def nearest_cluster(xp, xc):
    """Index of the nearest physical input for each model ``x``; ties go left."""
    xp = np.asarray(xp, dtype=np.float64)
    xc = np.asarray(xc, dtype=np.float64)
    right = np.clip(np.searchsorted(xp, xc, side="left"), 0, xp.size - 1)
    left = np.clip(right - 1, 0, xp.size - 1)
    go_left = np.abs(xp[left] - xc) <= np.abs(xp[right] - xc)
    best = np.where(go_left, left, right).astype(np.int64)
    # rounded distances can tie across more than two inputs; ties are contiguous
    d = np.abs(xp[best] - xc)
    while True:
        step = (best > 0) & (np.abs(xp[np.maximum(best - 1, 0)] - xc) == d)
        if not step.any():
            return best
        best = best - step


def assign_clusters(physical, model):
    """Partition model points by nearest physical input.

    Raises
    ------
    EmptyClusterError
        If some physical input attracts no model point.
    """
    cluster_of = nearest_cluster(physical.x, model.x)
    counts = np.bincount(cluster_of, minlength=len(physical))
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        j = int(empty[0])
        raise EmptyClusterError(j, float(physical.x[j]))
    order = np.argsort(cluster_of, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)])
    clusters = tuple(order[bounds[j]:bounds[j + 1]].astype(np.int64) for j in range(len(physical)))
    for c in clusters:
        c.setflags(write=False)
    cluster_of.setflags(write=False)
    return ClusterPartition(clusters, cluster_of)


@dataclass(frozen=True, eq=False)
class LayeredGraph:
    """Source -> C_1 -> ... -> C_m -> sink.

    Edges are implicit: every point of layer ``j`` connects to every point of
    layer ``j + 1``. Model vertices are the 0-based model indices; the source
    is ``SOURCE`` (-1) and the sink is ``n``.
    """

    partition: ClusterPartition
    lam: float
    physical: PhysicalDataset
    model: ModelDataset
    terminal_response: bool = False

    source = SOURCE

    @property
    def m(self):
        return self.partition.m

    @property
    def n(self):
        return len(self.model)

    @property
    def sink(self):
        return self.n

    @property
    def edge_count(self):
        s = self.partition.sizes
        return int(np.sum(s[:-1] * s[1:]) + s[0] + s[-1])

    def is_edge(self, u, v):
        cof = self.partition.cluster_of
        if u == self.source:
            return 0 <= v < self.n and cof[v] == 0
        if not 0 <= u < self.n:
            return False
        if v == self.sink:
            return cof[u] == self.m - 1
        return 0 <= v < self.n and cof[v] == cof[u] + 1


def build_graph(physical, model, lam, terminal_response=False):
    lam = float(lam)
    if not lam >= 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    return LayeredGraph(assign_clusters(physical, model), lam, physical, model,
                        bool(terminal_response))


def edge_weight(g, u, v):
    """Weight of edge ``(u, v)``.

    Between consecutive layers the weight is the response mismatch of ``u``
    against its own layer's physical response plus ``lam`` times the jump in
    calibration parameter. Source edges weigh 0; sink edges weigh 0 unless
    the graph was built with ``terminal_response``.
    """
    if not g.is_edge(u, v):
        raise ValueError(f"({u}, {v}) is not an edge of the layered graph")
    if u == g.source:
        return 0.0
    j = g.partition.cluster_of[u]
    yc, yp = g.model.y, g.physical.y
    if v == g.sink:
        return float(abs(yc[u] - yp[j])) if g.terminal_response else 0.0
    th = g.model.theta
    return float(abs(yc[u] - yp[j]) + g.lam * abs(th[u] - th[v]))
