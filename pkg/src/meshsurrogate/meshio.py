"""Mesh file IO: a small OBJ subset and an ASCII STL reader with welding.

OBJ subset: ``v x y z`` and ``f i j k`` lines (1-based indices; polygon
faces are fan-triangulated on load). The writer renders coordinates with
9 significant digits, which makes save -> load -> save byte-stable.
"""

import os

import numpy as np

from .mesh import TriMesh

# STL carries no connectivity; vertices closer than this fraction of the
# bounding-box diagonal are merged into one index.
STL_WELD_FRACTION = 1e-6


def load_mesh(path, fmt=None):
    """Load an OBJ or ASCII STL file into a validated TriMesh.

    ``fmt`` is "obj" or "stl"; when omitted it is taken from the extension.
    """
    if fmt is None:
        ext = os.path.splitext(path)[1].lower()
        if ext == ".obj":
            fmt = "obj"
        elif ext == ".stl":
            fmt = "stl"
        else:
            raise ValueError(f"cannot infer mesh format from {path!r}")
    if fmt == "obj":
        return load_obj(path)
    if fmt in ("stl", "stl-ascii"):
        return load_stl_ascii(path)
    raise ValueError(f"unsupported mesh format {fmt!r}")


def load_obj(path):
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex line")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: face needs at least 3 indices")
                idx = []
                for token in parts[1:]:
                    head = token.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad face index {token!r}") from exc
                    if i < 1:
                        raise ValueError(f"{path}:{lineno}: face indices must be positive")
                    idx.append(i - 1)
                for a in range(1, len(idx) - 1):  # fan triangulation
                    faces.append([idx[0], idx[a], idx[a + 1]])
            # other OBJ tags (vn, vt, o, g, s, usemtl, ...) are ignored
    if not vertices or not faces:
        raise ValueError(f"{path}: no triangles found")
    return TriMesh(np.array(vertices), np.array(faces)).validate()


def save_obj(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_stl_ascii(path):
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "vertex":
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex record")
                try:
                    raw.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif parts[0] not in {"solid", "endsolid", "facet", "endfacet", "outer", "endloop"}:
                raise ValueError(f"{path}:{lineno}: unexpected STL token {parts[0]!r}")
    if not raw or len(raw) % 3 != 0:
        raise ValueError(f"{path}: expected a positive multiple of 3 vertex records, got {len(raw)}")
    raw = np.array(raw)
    tol = STL_WELD_FRACTION * float(np.linalg.norm(raw.max(axis=0) - raw.min(axis=0)))
    index = _weld(raw, tol)
    used, faces = np.unique(index.reshape(-1, 3), return_inverse=True)
    return TriMesh(raw[used], faces.reshape(-1, 3)).validate()


def _weld(points, tol):
    """Map each point to the index of the first point within ``tol`` of it."""
    if tol <= 0:
        tol = np.finfo(np.float64).tiny
    cell = {}
    index = np.empty(points.shape[0], dtype=np.int64)
    inv = 1.0 / tol
    tol2 = tol * tol
    for i, p in enumerate(points):
        key = (int(np.floor(p[0] * inv)), int(np.floor(p[1] * inv)), int(np.floor(p[2] * inv)))
        best = -1
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in cell.get((key[0] + dx, key[1] + dy, key[2] + dz), ()):
                        d = points[j] - p
                        if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= tol2 and (best < 0 or j < best):
                            best = j
        if best < 0:
            best = i
            cell.setdefault(key, []).append(i)
        index[i] = best
    return index
