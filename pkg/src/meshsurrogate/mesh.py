"""Triangle surface meshes: representation, validation, subdivision, angles,
and dataset-level quality measures.

All operations are pure functions of their inputs. Coordinates keep whatever
length unit the input file used.
"""

from dataclasses import dataclass, field

import numpy as np

# Faces with area below this (in squared input units) fail validation.
DEGENERATE_AREA = 1e-12

# subdivide() refuses to grow a mesh past this many faces.
DEFAULT_MAX_FACES = 10_000_000


@dataclass
class TriMesh:
    """Indexed triangle mesh: (V, 3) float vertices, (F, 3) int faces."""

    vertices: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        self.faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"faces must be (F, 3), got {self.faces.shape}")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def copy(self):
        return TriMesh(self.vertices.copy(), self.faces.copy())

    def validate(self):
        """Raise ValueError on empty mesh, bad indices, or degenerate faces."""
        if self.n_vertices == 0 or self.n_faces == 0:
            raise ValueError("empty mesh: needs at least one vertex and one face")
        if self.faces.min() < 0 or self.faces.max() >= self.n_vertices:
            raise ValueError("face index out of range")
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValueError("face with repeated vertex index")
        areas = face_areas(self)
        bad = np.nonzero(areas <= DEGENERATE_AREA)[0]
        if bad.size:
            raise ValueError(f"degenerate face(s) with area <= {DEGENERATE_AREA:g}: {bad[:8].tolist()}")
        return self


def face_areas(mesh):
    """Triangle areas, shape (F,)."""
    v = mesh.vertices
    f = mesh.faces
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def face_centroids(mesh):
    """Triangle centroids, shape (F, 3)."""
    v = mesh.vertices
    return v[mesh.faces].mean(axis=1)


def unique_edges(mesh):
    """Unordered unique vertex pairs appearing in any face, shape (E, 2), sorted."""
    f = mesh.faces
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def mesh_stats(mesh):
    """(node count, unique edge count, face count)."""
    return mesh.n_vertices, unique_edges(mesh).shape[0], mesh.n_faces


def euler_characteristic(mesh):
    v, e, f = mesh_stats(mesh)
    return v - e + f


def is_closed_manifold(mesh):
    """True when every edge is shared by exactly two faces.

    Reported, never enforced: the pipeline accepts any valid surface.
    """
    f = mesh.faces
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)
    pairs = np.sort(pairs, axis=1)
    _, counts = np.unique(pairs, axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def subdivide(mesh, k, max_faces=DEFAULT_MAX_FACES):
    """Split every triangle into 4 at edge midpoints, k times.

    New vertices are exact edge midpoints; a shared edge yields exactly one
    shared midpoint because midpoints are keyed on the unordered index pair,
    not on coordinates.
    """
    if k < 0:
        raise ValueError("subdivision count must be non-negative")
    if mesh.n_faces * 4**k > max_faces:
        raise ValueError(
            f"subdivision would produce {mesh.n_faces * 4 ** k} faces (limit {max_faces})"
        )
    out = mesh
    for _ in range(k):
        out = _subdivide_once(out)
    return out


def _subdivide_once(mesh):
    v = mesh.vertices
    f = mesh.faces
    n_v = v.shape[0]
    pairs = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1).reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    midpoints = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    mid_id = (n_v + inverse).reshape(-1, 3)  # columns: edge 01, 12, 20
    m01, m12, m20 = mid_id[:, 0], mid_id[:, 1], mid_id[:, 2]
    corner0 = np.stack([f[:, 0], m01, m20], axis=1)
    corner1 = np.stack([f[:, 1], m12, m01], axis=1)
    corner2 = np.stack([f[:, 2], m20, m12], axis=1)
    center = np.stack([m01, m12, m20], axis=1)
    new_faces = np.stack([corner0, corner1, corner2, center], axis=1).reshape(-1, 3)
    return TriMesh(np.concatenate([v, midpoints], axis=0), new_faces)


def triangle_angles(p0, p1, p2):
    """Interior angles in degrees, in vertex order.

    Uses atan2(|cross|, dot), which stays accurate near 0 and 180 degrees
    where arccos loses precision.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0))
    if area <= DEGENERATE_AREA:
        raise ValueError("degenerate triangle: points are (nearly) collinear")
    out = np.empty(3)
    corners = (p0, p1, p2)
    for i in range(3):
        u = corners[(i + 1) % 3] - corners[i]
        w = corners[(i + 2) % 3] - corners[i]
        cross = np.linalg.norm(np.cross(u, w))
        out[i] = np.degrees(np.arctan2(cross, float(np.dot(u, w))))
    return out


def face_angles(mesh):
    """Interior angles of every face in degrees, shape (F, 3)."""
    v = mesh.vertices
    f = mesh.faces
    p = v[f]  # (F, 3, 3)
    out = np.empty((f.shape[0], 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        w = p[:, (i + 2) % 3] - p[:, i]
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        dot = np.einsum("ij,ij->i", u, w)
        out[:, i] = np.degrees(np.arctan2(cross, dot))
    return out


def _per_mesh_mean_angle(mesh, reducer):
    mesh.validate()
    angles = face_angles(mesh)
    return float(np.mean(reducer(angles, axis=1)))


def quality_min(dataset):
    """Mean over meshes of the per-mesh mean of each face's smallest angle."""
    if not dataset:
        raise ValueError("quality measure needs a non-empty dataset")
    return float(np.mean([_per_mesh_mean_angle(m, np.min) for m in dataset]))


def quality_max(dataset):
    """Mean over meshes of the per-mesh mean of each face's largest angle."""
    if not dataset:
        raise ValueError("quality measure needs a non-empty dataset")
    return float(np.mean([_per_mesh_mean_angle(m, np.max) for m in dataset]))
