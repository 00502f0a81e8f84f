"""Mesh-to-graph conversion, the two adjacency constructions, node-feature
scaling, dataset splitting, and the on-disk graph cache."""

from dataclasses import dataclass, field

import numpy as np

from .mesh import unique_edges


@dataclass
class Graph:
    """Node coordinates (N, 3) and unordered unique edges (E, 2)."""

    coords: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        self.edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        n = self.coords.shape[0]
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self-edge not allowed")
            if np.unique(np.sort(self.edges, axis=1), axis=0).shape[0] != self.edges.shape[0]:
                raise ValueError("duplicate edge not allowed")

    @property
    def n_nodes(self):
        return self.coords.shape[0]


@dataclass
class FeatureScaling:
    """Per-axis min-max record fitted on one set of graphs."""

    minimum: np.ndarray
    maximum: np.ndarray
    warnings: list = field(default_factory=list)

    def apply(self, coords):
        span = self.maximum - self.minimum
        out = np.zeros_like(coords)
        for axis in range(3):
            if span[axis] > 0:
                out[:, axis] = (coords[:, axis] - self.minimum[axis]) / span[axis]
        return out


@dataclass
class DatasetSplit:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int


def mesh_to_graph(mesh):
    """Graph with the mesh's vertices as nodes and its unique edges."""
    return Graph(mesh.vertices.copy(), unique_edges(mesh))


def build_adjacency_weighted(graph):
    """Dense symmetric matrix: Euclidean edge length where an edge exists, else 0.

    Entries are raw L2 distances (not inverted, not normalized) and the
    diagonal is zero, so a zero distance would be indistinguishable from
    a missing edge; coincident connected nodes are rejected.
    """
    n = graph.n_nodes
    a = np.zeros((n, n))
    if graph.edges.size:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        d = np.linalg.norm(graph.coords[i] - graph.coords[j], axis=1)
        if np.any(d == 0.0):
            bad = graph.edges[np.nonzero(d == 0.0)[0][0]]
            raise ValueError(f"connected nodes {bad.tolist()} are coincident (distance 0)")
        a[i, j] = d
        a[j, i] = d
    return a


def build_adjacency_gcn(graph):
    """Symmetric-normalized binary adjacency with self-loops:
    D^(-1/2) (A + I) D^(-1/2)."""
    n = graph.n_nodes
    a_hat = np.eye(n)
    if graph.edges.size:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        a_hat[i, j] = 1.0
        a_hat[j, i] = 1.0
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def fit_feature_scaling(dataset, fit_indices):
    """Per-axis min/max over all nodes of the graphs in ``fit_indices``."""
    if len(fit_indices) == 0:
        raise ValueError("feature scaling needs a non-empty fit set")
    stacked = np.concatenate([dataset[i].coords for i in fit_indices], axis=0)
    minimum = stacked.min(axis=0)
    maximum = stacked.max(axis=0)
    record = FeatureScaling(minimum, maximum)
    for axis in range(3):
        if maximum[axis] == minimum[axis]:
            record.warnings.append(
                f"axis {axis}: constant value {minimum[axis]:g} in fit set; axis maps to 0"
            )
    return record


def scale_node_features(dataset, fit_indices):
    """Min-max scale every graph's coordinates using fit-set extrema.

    Values outside the fit range map outside [0, 1]; the record is returned
    for use at inference time.
    """
    record = fit_feature_scaling(dataset, fit_indices)
    scaled = [Graph(record.apply(g.coords), g.edges.copy()) for g in dataset]
    return scaled, record


def split_dataset(n, seed, train_fraction=0.8, validation_fraction=0.1):
    """Shuffled split with sizes (floor(f_train*n), floor(f_val*n), remainder);
    defaults give the 80/10/10 rule."""
    if n < 3:
        raise ValueError("dataset split needs at least 3 samples")
    if train_fraction + validation_fraction >= 1.0:
        raise ValueError("split fractions must leave room for a test set")
    n_train = int(np.floor(train_fraction * n))
    n_val = int(np.floor(validation_fraction * n))
    order = np.random.default_rng(seed).permutation(n)
    return DatasetSplit(
        train=np.sort(order[:n_train]),
        validation=np.sort(order[n_train : n_train + n_val]),
        test=np.sort(order[n_train + n_val :]),
        seed=seed,
    )


def save_graph(graph, path):
    """Plain-text graph record: node count, coordinates (9 significant
    digits), then edge pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {graph.n_nodes}\n")
        for x, y, z in graph.coords:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")
        fh.write(f"edges {graph.edges.shape[0]}\n")
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")


def load_graph(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    pos = 0
    tag, count = lines[pos].split()
    if tag != "nodes":
        raise ValueError(f"{path}: expected 'nodes <N>' header")
    n = int(count)
    pos += 1
    coords = np.array([[float(t) for t in lines[pos + i].split()] for i in range(n)])
    pos += n
    tag, count = lines[pos].split()
    if tag != "edges":
        raise ValueError(f"{path}: expected 'edges <E>' header")
    e = int(count)
    pos += 1
    if e:
        edges = np.array([[int(t) for t in lines[pos + i].split()] for i in range(e)])
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return Graph(coords.reshape(n, 3), edges)
