"""Hot loops of the layered shortest-path solver.

Both variants perform the same floating-point operations in the same order,
so their results are bit-identical; ``reach`` dispatches on ``USE_NUMBA``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

NO_PRED = -2
SOURCE = -1


def _reach_python(offsets, members, yc, theta, yp, lam, terminal):
    n = yc.shape[0]
    m = offsets.shape[0] - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, NO_PRED, dtype=np.int64)
    n_relax = 0
    # source -> C_1, weight 0
    for k in range(offsets[0], offsets[1]):
        v = members[k]
        if dist[v] > 0.0:
            dist[v] = 0.0
            pred[v] = SOURCE
        n_relax += 1
    for j in range(m - 1):
        for a in range(offsets[j], offsets[j + 1]):
            u = members[a]
            du = dist[u]
            resp = abs(yc[u] - yp[j])
            for b in range(offsets[j + 1], offsets[j + 2]):
                v = members[b]
                cand = du + (resp + lam * abs(theta[u] - theta[v]))
                if dist[v] > cand:
                    dist[v] = cand
                    pred[v] = u
                n_relax += 1
    sink_dist = np.inf
    sink_pred = NO_PRED
    for a in range(offsets[m - 1], offsets[m]):
        u = members[a]
        w = abs(yc[u] - yp[m - 1]) if terminal else 0.0
        cand = dist[u] + w
        if sink_dist > cand:
            sink_dist = cand
            sink_pred = u
        n_relax += 1
    return dist, pred, sink_dist, sink_pred, n_relax


_reach_numba = njit(_reach_python)


def _reach_numpy(offsets, members, yc, theta, yp, lam, terminal):
    """Layer-at-a-time vectorized relaxation (no numba)."""
    n = yc.shape[0]
    m = offsets.shape[0] - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, NO_PRED, dtype=np.int64)
    first = members[offsets[0]:offsets[1]]
    dist[first] = 0.0
    pred[first] = SOURCE
    n_relax = first.size
    for j in range(m - 1):
        us = members[offsets[j]:offsets[j + 1]]
        vs = members[offsets[j + 1]:offsets[j + 2]]
        resp = np.abs(yc[us] - yp[j])
        w = resp[:, None] + lam * np.abs(theta[us][:, None] - theta[vs][None, :])
        cand = dist[us][:, None] + w
        # argmin returns the first minimizer: same winner as a strict '>' scan
        best = np.argmin(cand, axis=0)
        dist[vs] = cand[best, np.arange(vs.size)]
        pred[vs] = us[best]
        n_relax += us.size * vs.size
    last = members[offsets[m - 1]:offsets[m]]
    w = np.abs(yc[last] - yp[m - 1]) if terminal else np.zeros(last.size)
    cand = dist[last] + w
    k = int(np.argmin(cand))
    n_relax += last.size
    return dist, pred, float(cand[k]), int(last[k]), n_relax


def reach(offsets, members, yc, theta, yp, lam, terminal, use_numba=None):
    """Relax every edge of the layered graph once, in cluster order.

    Returns ``(dist, pred, sink_dist, sink_pred, n_relaxations)`` where
    ``dist``/``pred`` are indexed by model point and ``pred == -1`` marks the
    source.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    args = (np.ascontiguousarray(offsets, dtype=np.int64),
            np.ascontiguousarray(members, dtype=np.int64),
            np.ascontiguousarray(yc, dtype=np.float64),
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(yp, dtype=np.float64),
            float(lam), bool(terminal))
    if use_numba:
        return _reach_numba(*args)
    return _reach_numpy(*args)
