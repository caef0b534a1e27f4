"""Source-to-sink shortest paths on the layered graph."""
from dataclasses import dataclass

import numpy as np

from ._kernels import NO_PRED, SOURCE, reach
from .graph import edge_weight

BRUTE_FORCE_CAP = 10**6


@dataclass(frozen=True)
class AnchorPath:
    """One model index per layer and the cost of the path through them."""

    anchors: tuple
    total_cost: float
    relaxations: int = 0

    def __len__(self):
        return len(self.anchors)


def path_cost(g, anchors):
    """Sum of the ``m + 1`` edge weights along ``source, *anchors, sink``."""
    vertices = [g.source, *anchors, g.sink]
    total = 0.0
    for u, v in zip(vertices[:-1], vertices[1:]):
        total += edge_weight(g, u, v)
    return total


def shortest_anchor_path(g, use_numba=None):
    """Minimum-cost source-to-sink path by the reaching algorithm.

    Layers are processed in order (a topological order even when model
    ``x`` values tie) and, within a layer, by ascending model index. A
    predecessor is only replaced on strict improvement, so among equal-cost
    paths the first one found is kept. Runs in ``O(|E|)``.
    """
    part = g.partition
    dist, pred, sink_dist, sink_pred, n_relax = reach(
        part.offsets, part.members, g.model.y, g.model.theta, g.physical.y,
        g.lam, g.terminal_response, use_numba=use_numba)
    anchors = []
    v = sink_pred
    while v != SOURCE:
        if v == NO_PRED:
            raise RuntimeError("sink is unreachable; the layered graph is malformed")
        anchors.append(int(v))
        v = int(pred[v])
    anchors.reverse()
    return AnchorPath(tuple(anchors), float(sink_dist), int(n_relax))


def brute_force_shortest(g, cap=BRUTE_FORCE_CAP):
    """Exhaustive enumeration of all anchor sequences (test oracle).

    Equal-cost paths resolve to the lexicographically smallest anchor tuple.
    """
    sizes = g.partition.sizes
    count = int(np.prod(sizes.astype(object)))
    if count > cap:
        raise ValueError(f"{count} paths exceed the enumeration cap {cap}")
    # rows of `combos` enumerate anchor tuples in lexicographic order
    grids = np.meshgrid(*g.partition.clusters, indexing="ij")
    combos = np.stack([a.ravel() for a in grids], axis=1)
    yc, th, yp = g.model.y, g.model.theta, g.physical.y
    total = np.zeros(count)
    for j in range(g.m - 1):
        u, v = combos[:, j], combos[:, j + 1]
        total = total + (np.abs(yc[u] - yp[j]) + g.lam * np.abs(th[u] - th[v]))
    if g.terminal_response:
        total = total + np.abs(yc[combos[:, -1]] - yp[g.m - 1])
    k = int(np.argmin(total))
    return AnchorPath(tuple(int(a) for a in combos[k]), float(total[k]), count)
