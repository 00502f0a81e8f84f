"""Controlled re-meshing: midpoint subdivision (handled by mesh.subdivide),
discrete centroidal Voronoi clustering of faces, and extraction of the
straight-line dual triangulation.

The whole pipeline is deterministic given (mesh, k, l, seed); the RNG is
numpy's PCG64 and the boundary-sweep face order is fixed by index.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import bfs_assign, cluster_aggregates, cvd_energy, cvd_sweep
from .mesh import DEFAULT_MAX_FACES, TriMesh, face_areas, face_centroids, subdivide


@dataclass
class MeshSizeParams:
    """The two re-meshing hyperparameters: subdivision count and cluster count."""

    k: int
    l: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("subdivision count k must be non-negative")
        if self.l < 1:
            raise ValueError("cluster count l must be positive")


@dataclass
class Clustering:
    """Face -> cluster assignment with its clustering energy."""

    assignment: np.ndarray  # (F,) int64, values in [0, n_clusters)
    n_clusters: int
    energy: float


def face_adjacency(mesh):
    """CSR adjacency over faces sharing an edge: (indptr, indices)."""
    f = mesh.faces
    n_faces = f.shape[0]
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    pairs = np.sort(pairs, axis=1)
    face_of = np.tile(np.arange(n_faces, dtype=np.int64), 3)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    face_of = face_of[order]
    boundary = np.any(pairs[1:] != pairs[:-1], axis=1)
    group_starts = np.concatenate([[0], np.nonzero(boundary)[0] + 1, [pairs.shape[0]]])
    sizes = np.diff(group_starts)
    halves = []
    two = group_starts[:-1][sizes == 2]
    if two.size:
        a = face_of[two]
        b = face_of[two + 1]
        halves.append(np.stack([a, b], axis=1))
        halves.append(np.stack([b, a], axis=1))
    for g in np.nonzero(sizes > 2)[0]:  # non-manifold edges, rare
        members = face_of[group_starts[g] : group_starts[g + 1]]
        for i in range(members.size):
            for j in range(members.size):
                if i != j:
                    halves.append(np.array([[members[i], members[j]]], dtype=np.int64))
    if halves:
        adj = np.unique(np.concatenate(halves, axis=0), axis=0)
    else:
        adj = np.empty((0, 2), dtype=np.int64)
    counts = np.bincount(adj[:, 0], minlength=n_faces)
    indptr = np.zeros(n_faces + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, np.ascontiguousarray(adj[:, 1], dtype=np.int64)


def seed_clusters(mesh, l, seed, adjacency=None):
    """Pick l distinct seed faces with a seeded RNG, then grow regions by BFS.

    Seeds are the first l entries of one face permutation, so seedings for
    increasing l are nested under a fixed seed. Equal-distance ties go to
    the lower cluster id.
    """
    n_faces = mesh.n_faces
    if not 1 <= l <= n_faces:
        raise ValueError(f"cluster count {l} out of range [1, {n_faces}]")
    rng = np.random.default_rng(seed)
    seeds = np.ascontiguousarray(rng.permutation(n_faces)[:l], dtype=np.int64)
    indptr, indices = adjacency if adjacency is not None else face_adjacency(mesh)
    assignment = bfs_assign(indptr, indices, seeds, n_faces)
    if np.any(assignment < 0):
        raise ValueError(
            "face adjacency graph is disconnected; re-meshing needs an edge-connected surface"
        )
    rho = face_areas(mesh)
    gamma = face_centroids(mesh)
    w, s, _ = cluster_aggregates(assignment, rho, gamma, l)
    return Clustering(assignment, l, float(cvd_energy(assignment, rho, gamma, w, s)))


def optimize_clusters(mesh, init, energy_trace=None, adjacency=None):
    """Boundary-reassignment descent on the clustering energy.

    Sweeps faces in index order, accepting a move only when the energy
    strictly decreases, until a full sweep makes no move. A repair pass then
    splits disconnected clusters and merges the smaller fragments into the
    adjacent cluster with the smallest energy increase, restoring exactly
    ``n_clusters`` edge-connected clusters.

    When ``energy_trace`` is a list, the energy after every sweep (starting
    with the initial energy) is appended to it.
    """
    indptr, indices = adjacency if adjacency is not None else face_adjacency(mesh)
    rho = face_areas(mesh)
    gamma = face_centroids(mesh)
    assignment = np.ascontiguousarray(init.assignment, dtype=np.int64).copy()
    l = init.n_clusters
    if energy_trace is not None:
        w, s, _ = cluster_aggregates(assignment, rho, gamma, l)
        energy_trace.append(float(cvd_energy(assignment, rho, gamma, w, s)))
    while True:
        w, s, count = cluster_aggregates(assignment, rho, gamma, l)
        moves = cvd_sweep(indptr, indices, assignment, rho, gamma, w, s, count)
        if energy_trace is not None:
            w, s, _ = cluster_aggregates(assignment, rho, gamma, l)
            energy_trace.append(float(cvd_energy(assignment, rho, gamma, w, s)))
        if moves == 0:
            break
    assignment = _repair_connectivity(assignment, l, indptr, indices, rho, gamma)
    w, s, _ = cluster_aggregates(assignment, rho, gamma, l)
    return Clustering(assignment, l, float(cvd_energy(assignment, rho, gamma, w, s)))


def _cluster_components(assignment, cluster, indptr, indices):
    """Edge-connected components of one cluster's faces, as lists of face ids."""
    faces = np.nonzero(assignment == cluster)[0]
    remaining = set(faces.tolist())
    components = []
    while remaining:
        start = min(remaining)
        stack = [start]
        remaining.discard(start)
        comp = [start]
        while stack:
            f = stack.pop()
            for e in range(indptr[f], indptr[f + 1]):
                n = int(indices[e])
                if n in remaining:
                    remaining.discard(n)
                    stack.append(n)
                    comp.append(n)
        components.append(sorted(comp))
    return components


def _repair_connectivity(assignment, l, indptr, indices, rho, gamma):
    """Split disconnected clusters; merge fragments into adjacent clusters."""
    assignment = assignment.copy()
    fragments = []
    for c in range(l):
        comps = _cluster_components(assignment, c, indptr, indices)
        if len(comps) <= 1:
            continue
        # keep the component with the largest area (tie: lowest face id)
        areas = [float(np.sum(rho[comp])) for comp in comps]
        keep = max(range(len(comps)), key=lambda i: (areas[i], -comps[i][0]))
        for i, comp in enumerate(comps):
            if i != keep:
                fragments.append(comp)
    if not fragments:
        return assignment
    for comp in fragments:
        for f in comp:
            assignment[f] = -1
    fragments.sort(key=lambda comp: comp[0])
    w, s, _ = cluster_aggregates(
        assignment[assignment >= 0], rho[assignment >= 0], gamma[assignment >= 0], l
    )
    pending = list(fragments)
    while pending:
        still = []
        merged_any = False
        for comp in pending:
            targets = set()
            for f in comp:
                for e in range(indptr[f], indptr[f + 1]):
                    c = int(assignment[indices[e]])
                    if c >= 0:
                        targets.add(c)
            if not targets:
                still.append(comp)
                continue
            wf = float(np.sum(rho[comp]))
            sf = (rho[comp, None] * gamma[comp]).sum(axis=0)
            best = None
            best_delta = None
            for c in sorted(targets):
                merged = -float(np.dot(s[c] + sf, s[c] + sf)) / (w[c] + wf)
                delta = merged - (-float(np.dot(s[c], s[c])) / w[c])
                if best is None or delta < best_delta:
                    best = c
                    best_delta = delta
            for f in comp:
                assignment[f] = best
            w[best] += wf
            s[best] += sf
            merged_any = True
        if not merged_any and still:
            raise ValueError("cluster repair failed: fragment with no adjacent cluster")
        pending = still
    return assignment


def _corner_rings(mesh):
    """Per-vertex rotation maps: vertex -> {next_vertex: (face, prev_vertex)}."""
    rings = {}
    f = mesh.faces
    for fid in range(f.shape[0]):
        a, b, c = int(f[fid, 0]), int(f[fid, 1]), int(f[fid, 2])
        for v, nxt, prv in ((a, b, c), (b, c, a), (c, a, b)):
            rings.setdefault(v, {})[nxt] = (fid, prv)
    return rings


def _walk_ring(ring):
    """Face sequences around one vertex in rotation order.

    Yields one sequence per chain (open fans at boundaries) or cycle.
    """
    keys = set(ring.keys())
    targets = {q for _, q in ring.values()}
    starts = sorted(keys - targets, key=lambda p: ring[p][0])
    sequences = []
    visited = set()
    for start in starts:  # open chains first (boundary vertices)
        seq = []
        p = start
        while p in ring and p not in visited:
            visited.add(p)
            fid, q = ring[p]
            seq.append(fid)
            p = q
        sequences.append((seq, False))
    remaining = sorted(keys - visited, key=lambda p: ring[p][0])
    while remaining:
        start = remaining[0]
        seq = []
        p = start
        while p not in visited:
            visited.add(p)
            fid, q = ring[p]
            seq.append(fid)
            p = q
        sequences.append((seq, True))
        remaining = [p for p in remaining if p not in visited]
    return sequences


def _collapse(ids, cyclic):
    """Drop consecutive duplicates; for cycles also the wrap-around duplicate."""
    out = []
    for c in ids:
        if not out or out[-1] != c:
            out.append(c)
    if cyclic and len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def dual_remesh(mesh, clustering):
    """Straight-line dual of the clustered mesh.

    One output vertex per cluster at the cluster's area-weighted centroid.
    Each input vertex whose ring of incident faces touches >= 3 distinct
    clusters emits a fan of triangles over the cluster sequence in rotation
    order; duplicates are emitted once.
    """
    l = clustering.n_clusters
    if l < 4:
        raise ValueError("dual re-meshing needs at least 4 clusters")
    rho = face_areas(mesh)
    gamma = face_centroids(mesh)
    w, s, _ = cluster_aggregates(clustering.assignment, rho, gamma, l)
    if np.any(w <= 0):
        raise ValueError("clustering has an empty cluster")
    out_vertices = s / w[:, None]
    assignment = clustering.assignment
    rings = _corner_rings(mesh)
    faces = []
    seen = set()
    for v in sorted(rings.keys()):
        for seq, cyclic in _walk_ring(rings[v]):
            clusters = _collapse([int(assignment[f]) for f in seq], cyclic)
            if len(clusters) < 3:
                continue
            for i in range(1, len(clusters) - 1):
                tri = (clusters[0], clusters[i], clusters[i + 1])
                if tri[0] == tri[1] or tri[1] == tri[2] or tri[0] == tri[2]:
                    continue
                key = tuple(sorted(tri))
                if key not in seen:
                    seen.add(key)
                    faces.append(tri)
    if not faces:
        raise ValueError("dual re-meshing produced no triangles")
    return TriMesh(out_vertices, np.array(faces, dtype=np.int64))


def remesh_pipeline(mesh, params, seed, max_faces=DEFAULT_MAX_FACES):
    """subdivide -> seed -> optimize -> dual, deterministic in (mesh, k, l, seed)."""
    mesh.validate()
    if params.l > mesh.n_faces * 4**params.k:
        raise ValueError(
            f"cluster count {params.l} exceeds subdivided face count "
            f"{mesh.n_faces * 4 ** params.k}"
        )
    fine = subdivide(mesh, params.k, max_faces=max_faces)
    adjacency = face_adjacency(fine)
    init = seed_clusters(fine, params.l, seed, adjacency=adjacency)
    clustering = optimize_clusters(fine, init, adjacency=adjacency)
    return dual_remesh(fine, clustering)


def save_assignment(clustering, path):
    """One cluster id per line, in face order (for visualization tooling)."""
    np.savetxt(path, clustering.assignment, fmt="%d")
