import numpy as np
import pytest

from meshsurrogate import (
    Graph,
    MeshSizeParams,
    build_adjacency_gcn,
    build_adjacency_weighted,
    mesh_stats,
    mesh_to_graph,
    remesh_pipeline,
    scale_node_features,
    split_dataset,
    subdivide,
)
from meshsurrogate.graphs import load_graph, save_graph

from conftest import jittered_icosahedron


def test_graph_invariants():
    with pytest.raises(ValueError, match="out of range"):
        Graph(np.zeros((2, 3)), [[0, 2]])
    with pytest.raises(ValueError, match="self-edge"):
        Graph(np.zeros((2, 3)), [[1, 1]])
    with pytest.raises(ValueError, match="duplicate"):
        Graph(np.zeros((2, 3)), [[0, 1], [1, 0]])


def test_mesh_to_graph_triangle():
    mesh_graph = mesh_to_graph(
        __import__("meshsurrogate").TriMesh(np.eye(3), np.array([[0, 1, 2]]))
    )
    assert mesh_graph.n_nodes == 3
    assert mesh_graph.edges.shape[0] == 3


def test_mesh_to_graph_tetrahedron(tetrahedron):
    g = mesh_to_graph(tetrahedron)
    assert g.n_nodes == 4
    assert g.edges.shape[0] == 6


def test_mesh_to_graph_matches_mesh_stats(icosahedron):
    out = remesh_pipeline(icosahedron, MeshSizeParams(1, 16), seed=2)
    g = mesh_to_graph(out)
    v, e, f = mesh_stats(out)
    assert (g.n_nodes, g.edges.shape[0]) == (v, e)


def test_weighted_adjacency_345():
    g = Graph(np.array([[0, 0, 0], [3, 4, 0]], float), [[0, 1]])
    a = build_adjacency_weighted(g)
    assert a[0, 1] == 5.0 and a[1, 0] == 5.0
    assert a[0, 0] == 0.0 and a[1, 1] == 0.0


def test_weighted_adjacency_non_edge_zero():
    g = Graph(np.array([[0, 0, 0], [3, 4, 0], [1, 1, 1]], float), [[0, 1]])
    a = build_adjacency_weighted(g)
    assert a[0, 2] == 0.0 and a[2, 1] == 0.0


def test_weighted_adjacency_symmetry():
    rng = np.random.default_rng(0)
    coords = rng.uniform(0, 1, (12, 3))
    edges = np.array([[i, j] for i in range(12) for j in range(i + 1, 12) if rng.random() < 0.3])
    a = build_adjacency_weighted(Graph(coords, edges))
    assert np.allclose(a, a.T, atol=1e-12)
    assert np.all(np.diag(a) == 0.0)


def test_weighted_adjacency_rejects_coincident_nodes():
    g = Graph(np.array([[1, 2, 3], [1, 2, 3]], float), [[0, 1]])
    with pytest.raises(ValueError, match="coincident"):
        build_adjacency_weighted(g)


def test_gcn_adjacency_isolated_node():
    a = build_adjacency_gcn(Graph(np.zeros((1, 3)), np.empty((0, 2), int)))
    assert np.array_equal(a, [[1.0]])


def test_gcn_adjacency_two_nodes():
    a = build_adjacency_gcn(Graph(np.array([[0, 0, 0], [1, 0, 0]], float), [[0, 1]]))
    assert np.allclose(a, 0.5)


def test_gcn_adjacency_path_graph_hand_oracle():
    g = Graph(np.zeros((3, 3)), [[0, 1], [1, 2]])
    a = build_adjacency_gcn(g)
    # direct evaluation: A_hat = A + I, D_hat = diag(2, 3, 2)
    a_hat = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], float)
    d = np.diag(1 / np.sqrt(a_hat.sum(axis=1)))
    assert np.allclose(a, d @ a_hat @ d, atol=1e-12)
    assert np.all(np.diag(a) > 0)


def test_gcn_adjacency_regular_graph_entries():
    # 4-cycle: every node degree 2, so every nonzero entry is 1/(d+1) = 1/3
    g = Graph(np.zeros((4, 3)), [[0, 1], [1, 2], [2, 3], [3, 0]])
    a = build_adjacency_gcn(g)
    nz = a[a > 0]
    assert np.allclose(nz, 1.0 / 3.0, atol=1e-12)


def test_scale_node_features_basic():
    g1 = Graph(np.array([[2, 2, 2], [4, 4, 4]], float), [[0, 1]])
    g2 = Graph(np.array([[3, 3, 3], [5, 2, 4]], float), [[0, 1]])
    scaled, record = scale_node_features([g1, g2], [0])
    assert np.allclose(scaled[0].coords, [[0, 0, 0], [1, 1, 1]])
    assert np.allclose(scaled[1].coords[0], [0.5, 0.5, 0.5])
    # outside fit range extrapolates past [0, 1]
    assert scaled[1].coords[1][0] == pytest.approx(1.5)


def test_scale_node_features_constant_axis_warns():
    g = Graph(np.array([[1, 2, 7], [1, 3, 9]], float), [[0, 1]])
    scaled, record = scale_node_features([g], [0])
    assert np.all(scaled[0].coords[:, 0] == 0.0)
    assert any("axis 0" in w for w in record.warnings)


def test_scale_node_features_fit_set_maps_to_unit_box():
    rng = np.random.default_rng(1)
    graphs = [Graph(rng.uniform(-3, 7, (5, 3)), [[0, 1]]) for _ in range(4)]
    scaled, _ = scale_node_features(graphs, [0, 1, 2])
    fit_coords = np.concatenate([scaled[i].coords for i in range(3)])
    assert fit_coords.min() == pytest.approx(0.0, abs=1e-12)
    assert fit_coords.max() == pytest.approx(1.0, abs=1e-12)


def test_split_925():
    split = split_dataset(925, seed=0)
    assert (len(split.train), len(split.validation), len(split.test)) == (740, 92, 93)


def test_split_10():
    split = split_dataset(10, seed=0)
    assert (len(split.train), len(split.validation), len(split.test)) == (8, 1, 1)


def test_split_disjoint_covering_deterministic():
    a = split_dataset(37, seed=4)
    b = split_dataset(37, seed=4)
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)
    union = np.concatenate([a.train, a.validation, a.test])
    assert sorted(union.tolist()) == list(range(37))


def test_split_too_small():
    with pytest.raises(ValueError, match="at least 3"):
        split_dataset(2, seed=0)


def test_graph_cache_round_trip(tmp_path):
    mesh = subdivide(jittered_icosahedron(2), 1)
    g = mesh_to_graph(mesh)
    path = tmp_path / "g.txt"
    save_graph(g, path)
    loaded = load_graph(path)
    assert loaded.n_nodes == g.n_nodes
    assert np.array_equal(loaded.edges, g.edges)
    assert np.allclose(loaded.coords, g.coords, rtol=1e-8)
    # 9-significant-digit rendering is stable under a second round trip
    path2 = tmp_path / "g2.txt"
    save_graph(loaded, path2)
    assert path.read_text() == path2.read_text()
