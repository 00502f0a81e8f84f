import numpy as np
import pytest

from meshsurrogate import load_mesh, load_obj, load_stl_ascii, mesh_stats, save_obj
from meshsurrogate.mesh import TriMesh

from conftest import TET_FACES, TET_VERTS, jittered_icosahedron


def test_load_obj_single_triangle(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    mesh = load_obj(path)
    assert mesh.n_vertices == 3
    assert mesh.n_faces == 1


def test_load_obj_tetrahedron(tmp_path, tetrahedron):
    path = tmp_path / "tet.obj"
    save_obj(tetrahedron, path)
    mesh = load_obj(path)
    assert mesh_stats(mesh) == (4, 6, 4)


def test_load_obj_fan_triangulates_quads(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = load_obj(path)
    assert mesh.n_faces == 2
    assert np.array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_load_obj_slash_tokens(tmp_path):
    path = tmp_path / "tex.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n")
    assert load_obj(path).n_faces == 1


def test_load_obj_rejects_garbage(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 zero\nf 1 2 3\n")
    with pytest.raises(ValueError, match="bad vertex"):
        load_obj(path)


def test_load_obj_rejects_empty(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("# nothing\n")
    with pytest.raises(ValueError, match="no triangles"):
        load_obj(path)


def test_load_obj_out_of_range_index(tmp_path):
    path = tmp_path / "oob.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")
    with pytest.raises(ValueError, match="out of range"):
        load_obj(path)


def _write_stl(path, mesh):
    lines = ["solid fixture"]
    for tri in mesh.faces:
        lines.append("facet normal 0 0 0")
        lines.append("outer loop")
        for idx in tri:
            x, y, z = mesh.vertices[idx]
            lines.append(f"vertex {x:.9g} {y:.9g} {z:.9g}")
        lines.append("endloop")
        lines.append("endfacet")
    lines.append("endsolid fixture")
    path.write_text("\n".join(lines) + "\n")


def test_stl_welds_to_obj_equivalent(tmp_path, tetrahedron):
    stl = tmp_path / "tet.stl"
    _write_stl(stl, tetrahedron)
    from_stl = load_stl_ascii(stl)
    assert mesh_stats(from_stl) == (4, 6, 4)
    obj = tmp_path / "tet.obj"
    save_obj(tetrahedron, obj)
    from_obj = load_obj(obj)
    # same geometry once vertices are put in a canonical order
    assert sorted(map(tuple, from_stl.vertices.tolist())) == sorted(map(tuple, from_obj.vertices.tolist()))


def test_stl_welds_near_duplicates(tmp_path):
    mesh = TriMesh(TET_VERTS.copy(), TET_FACES.copy())
    stl = tmp_path / "near.stl"
    _write_stl(stl, mesh)
    # perturb one duplicated corner record by far less than the weld tolerance
    text = stl.read_text().splitlines()
    hits = [i for i, line in enumerate(text) if line == "vertex 1 1 1"]
    text[hits[1]] = "vertex 1.0000000001 1 1"
    stl.write_text("\n".join(text) + "\n")
    assert load_stl_ascii(stl).n_vertices == 4


def test_load_mesh_dispatch(tmp_path, tetrahedron):
    obj = tmp_path / "m.obj"
    save_obj(tetrahedron, obj)
    assert load_mesh(obj).n_faces == 4
    stl = tmp_path / "m.stl"
    _write_stl(stl, tetrahedron)
    assert load_mesh(stl, fmt="stl-ascii").n_faces == 4
    with pytest.raises(ValueError, match="cannot infer"):
        load_mesh(tmp_path / "m.xyz")


def test_obj_round_trip_is_stable(tmp_path):
    mesh = jittered_icosahedron(3)
    p1 = tmp_path / "a.obj"
    p2 = tmp_path / "b.obj"
    save_obj(mesh, p1)
    first = load_obj(p1)
    save_obj(first, p2)
    second = load_obj(p2)
    assert np.array_equal(first.vertices, second.vertices)
    assert np.array_equal(first.faces, second.faces)
    assert p1.read_text() == p2.read_text()
