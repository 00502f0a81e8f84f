"""Hot numeric kernels for face clustering.

Every kernel is written as a plain function over numpy arrays and compiled
with numba's ``@njit`` when available. Setting ``MESHSURROGATE_NO_NUMBA=1``
(or if numba is not importable) selects the uncompiled fallback path. Both
paths execute the identical source, so results are bit-for-bit equal; only
speed differs. ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

_flag = os.environ.get("MESHSURROGATE_NO_NUMBA", "").strip().lower()
_DISABLED = _flag in {"1", "true", "yes", "on"}

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and not _DISABLED


def kernel_backend():
    """Name of the active kernel path, recorded in run manifests."""
    return "numba" if NUMBA_ENABLED else "python"


def bfs_assign_py(indptr, indices, seeds, n_faces):
    """Multi-source BFS over the face adjacency graph.

    Seed faces get cluster ids equal to their position in ``seeds``. Every
    other face is assigned to the cluster whose seed is nearest in BFS hops;
    equal-distance ties go to the lower cluster id. Unreachable faces stay -1.
    """
    no_cand = np.iinfo(np.int64).max
    assignment = np.full(n_faces, -1, dtype=np.int64)
    cand = np.full(n_faces, no_cand, dtype=np.int64)
    frontier = np.empty(n_faces, dtype=np.int64)
    nxt = np.empty(n_faces, dtype=np.int64)
    n_front = 0
    for c in range(seeds.shape[0]):
        assignment[seeds[c]] = c
        frontier[n_front] = seeds[c]
        n_front += 1
    while n_front > 0:
        n_next = 0
        for i in range(n_front):
            f = frontier[i]
            cf = assignment[f]
            for e in range(indptr[f], indptr[f + 1]):
                n = indices[e]
                if assignment[n] == -1 and cf < cand[n]:
                    if cand[n] == no_cand:
                        nxt[n_next] = n
                        n_next += 1
                    cand[n] = cf
        for i in range(n_next):
            n = nxt[i]
            assignment[n] = cand[n]
            cand[n] = no_cand
        frontier, nxt = nxt, frontier
        n_front = n_next
    return assignment


def cluster_aggregates_py(assignment, area, centroid, n_clusters):
    """Per-cluster area weight, area-weighted centroid sum, and face count."""
    w = np.zeros(n_clusters, dtype=np.float64)
    s = np.zeros((n_clusters, 3), dtype=np.float64)
    count = np.zeros(n_clusters, dtype=np.int64)
    for f in range(assignment.shape[0]):
        c = assignment[f]
        a = area[f]
        w[c] += a
        s[c, 0] += a * centroid[f, 0]
        s[c, 1] += a * centroid[f, 1]
        s[c, 2] += a * centroid[f, 2]
        count[c] += 1
    return w, s, count


def cvd_energy_py(assignment, area, centroid, w, s):
    """Clustering energy: sum over faces of area * |centroid - cluster mean|^2."""
    e = 0.0
    for f in range(assignment.shape[0]):
        c = assignment[f]
        bx = s[c, 0] / w[c]
        by = s[c, 1] / w[c]
        bz = s[c, 2] / w[c]
        dx = centroid[f, 0] - bx
        dy = centroid[f, 1] - by
        dz = centroid[f, 2] - bz
        e += area[f] * (dx * dx + dy * dy + dz * dz)
    return e


def cvd_sweep_py(indptr, indices, assignment, area, centroid, w, s, count):
    """One full boundary-reassignment sweep in fixed face-index order.

    A face moves to the adjacent cluster giving the most negative energy
    delta, only if that delta is strictly negative (below a relative
    rounding margin, so float noise cannot alternate a move forever) and
    the move does not empty its current cluster. Aggregates are updated in
    place; the number of accepted moves is returned.
    """
    n_faces = assignment.shape[0]
    max_deg = 0
    for f in range(n_faces):
        d = indptr[f + 1] - indptr[f]
        if d > max_deg:
            max_deg = d
    cands = np.empty(max_deg, dtype=np.int64)
    moves = 0
    for f in range(n_faces):
        a = assignment[f]
        if count[a] <= 1:
            continue
        n_cand = 0
        for e in range(indptr[f], indptr[f + 1]):
            b = assignment[indices[e]]
            if b == a:
                continue
            seen = False
            for q in range(n_cand):
                if cands[q] == b:
                    seen = True
                    break
            if not seen:
                cands[n_cand] = b
                n_cand += 1
        if n_cand == 0:
            continue
        for i in range(1, n_cand):
            key = cands[i]
            j = i - 1
            while j >= 0 and cands[j] > key:
                cands[j + 1] = cands[j]
                j -= 1
            cands[j + 1] = key
        rf = area[f]
        gx = centroid[f, 0]
        gy = centroid[f, 1]
        gz = centroid[f, 2]
        wa = w[a]
        sax = s[a, 0]
        say = s[a, 1]
        saz = s[a, 2]
        phi_a = -(sax * sax + say * say + saz * saz) / wa
        wa2 = wa - rf
        sax2 = sax - rf * gx
        say2 = say - rf * gy
        saz2 = saz - rf * gz
        phi_a2 = -(sax2 * sax2 + say2 * say2 + saz2 * saz2) / wa2
        best_delta = 0.0
        best_b = -1
        for q in range(n_cand):
            b = cands[q]
            wb = w[b]
            sbx = s[b, 0]
            sby = s[b, 1]
            sbz = s[b, 2]
            phi_b = -(sbx * sbx + sby * sby + sbz * sbz) / wb
            wb2 = wb + rf
            sbx2 = sbx + rf * gx
            sby2 = sby + rf * gy
            sbz2 = sbz + rf * gz
            phi_b2 = -(sbx2 * sbx2 + sby2 * sby2 + sbz2 * sbz2) / wb2
            delta = (phi_a2 + phi_b2) - (phi_a + phi_b)
            margin = 1e-12 * (abs(phi_a) + abs(phi_b) + abs(phi_a2) + abs(phi_b2))
            if delta < -margin and delta < best_delta:
                best_delta = delta
                best_b = b
        if best_b >= 0:
            assignment[f] = best_b
            w[a] = wa2
            s[a, 0] = sax2
            s[a, 1] = say2
            s[a, 2] = saz2
            w[best_b] += rf
            s[best_b, 0] += rf * gx
            s[best_b, 1] += rf * gy
            s[best_b, 2] += rf * gz
            count[a] -= 1
            count[best_b] += 1
            moves += 1
    return moves


if NUMBA_ENABLED:
    bfs_assign = _njit(cache=True)(bfs_assign_py)
    cluster_aggregates = _njit(cache=True)(cluster_aggregates_py)
    cvd_energy = _njit(cache=True)(cvd_energy_py)
    cvd_sweep = _njit(cache=True)(cvd_sweep_py)
else:
    bfs_assign = bfs_assign_py
    cluster_aggregates = cluster_aggregates_py
    cvd_energy = cvd_energy_py
    cvd_sweep = cvd_sweep_py
