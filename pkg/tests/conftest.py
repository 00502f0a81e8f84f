import numpy as np
import pytest

from meshsurrogate import TriMesh

PHI = (1 + 5**0.5) / 2

ICO_VERTS = np.array(
    [
        [-1, PHI, 0], [1, PHI, 0], [-1, -PHI, 0], [1, -PHI, 0],
        [0, -1, PHI], [0, 1, PHI], [0, -1, -PHI], [0, 1, -PHI],
        [PHI, 0, -1], [PHI, 0, 1], [-PHI, 0, -1], [-PHI, 0, 1],
    ],
    dtype=float,
)

ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)

TET_VERTS = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
TET_FACES = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])

OCTA_VERTS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
)
OCTA_FACES = np.array(
    [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
)


@pytest.fixture
def icosahedron():
    return TriMesh(ICO_VERTS.copy(), ICO_FACES.copy()).validate()


@pytest.fixture
def tetrahedron():
    return TriMesh(TET_VERTS.copy(), TET_FACES.copy()).validate()


@pytest.fixture
def octahedron():
    return TriMesh(OCTA_VERTS.copy(), OCTA_FACES.copy()).validate()


@pytest.fixture
def stretched_icosahedron():
    verts = ICO_VERTS.copy()
    verts[:, 2] *= 4.0  # anisotropic stretch degrades interior angles
    return TriMesh(verts, ICO_FACES.copy()).validate()


def jittered_icosahedron(seed, scale=0.15):
    """Random closed manifold fixture: icosahedron with jittered vertices."""
    rng = np.random.default_rng(seed)
    verts = ICO_VERTS + rng.normal(0, scale, ICO_VERTS.shape)
    return TriMesh(verts, ICO_FACES.copy()).validate()


def icosphere(subdivisions):
    """Unit sphere approximation: subdivided icosahedron, reprojected."""
    from meshsurrogate import subdivide

    mesh = subdivide(TriMesh(ICO_VERTS.copy(), ICO_FACES.copy()), subdivisions)
    verts = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    return TriMesh(verts, mesh.faces).validate()
