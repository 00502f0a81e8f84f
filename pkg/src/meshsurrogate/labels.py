"""Performance labels: the modal stiffness formulas, min-max label scaling,
and a synthetic wheel-shape generator with analytic geometric label oracles
standing in for solver-produced data.

The stiffness formulas return SI-derived units as computed; no display-unit
conversion happens here. The geometric "stiffness" oracles are declared
proxies (volume moments), not physical stiffness.
"""

import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh, is_closed_manifold

LABEL_KINDS = ("mass", "rim_stiffness", "disk_stiffness")


def rim_stiffness(m, f):
    """(2 pi f)^2 * m."""
    if m < 0 or f < 0:
        raise ValueError("mass and frequency must be non-negative")
    return (2.0 * math.pi * f) ** 2 * m


def disk_stiffness(m, f1, f2):
    """(2 pi f2)^2 * m * (1 - f2^2 / f1^2); needs f1 > f2 > 0."""
    if m < 0:
        raise ValueError("mass must be non-negative")
    if f2 <= 0 or f1 <= 0:
        raise ValueError("frequencies must be positive")
    if f2 >= f1:
        raise ValueError(
            f"anti-resonance f2={f2:g} must be below resonance f1={f1:g} "
            "(non-positive stiffness signals invalid modal inputs)"
        )
    return (2.0 * math.pi * f2) ** 2 * m * (1.0 - f2**2 / f1**2)


@dataclass
class LabelScaling:
    """Min-max record: maps fit-set extrema to exactly {0, 1}."""

    minimum: float
    maximum: float

    def apply(self, value):
        return (value - self.minimum) / (self.maximum - self.minimum)

    def invert(self, scaled):
        return scaled * (self.maximum - self.minimum) + self.minimum


def scale_labels(values, fit_indices):
    """Scale values by the fit subset's extrema; returns (scaled, record)."""
    values = np.asarray(values, dtype=np.float64)
    fit = values[np.asarray(fit_indices, dtype=np.int64)]
    if fit.size == 0:
        raise ValueError("label scaling needs a non-empty fit set")
    lo, hi = float(fit.min()), float(fit.max())
    if hi <= lo:
        raise ValueError(f"constant fit set (min = max = {lo:g}); cannot min-max scale")
    record = LabelScaling(lo, hi)
    return (values - lo) / (hi - lo), record


@dataclass
class ShapeParams:
    """Parametric wheel: annular rim + hub disk + radial spokes, extruded."""

    outer_radius: float
    rim_width: float
    hub_radius: float
    disk_thickness: float
    spoke_count: int
    spoke_width: float
    density: float = 1.0

    def __post_init__(self):
        if min(self.outer_radius, self.rim_width, self.hub_radius, self.disk_thickness, self.spoke_width) <= 0:
            raise ValueError("all wheel dimensions must be positive")
        if self.spoke_count < 3:
            raise ValueError("need at least 3 spokes")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.hub_radius >= self.outer_radius - self.rim_width:
            raise ValueError("hub must end below the rim inner radius")


def _wheel_grid(params, resolution):
    """Polar cell grid and occupancy for the wheel footprint.

    Returns (radii, n_theta, occupancy) where occupancy[band, sector] marks
    solid cells. The sector count is a multiple of the spoke count so the
    pattern repeats exactly per spoke.
    """
    s = params.spoke_count
    n_theta = s * max(3, int(math.ceil(resolution / s)))
    period = n_theta // s
    rim_inner = params.outer_radius - params.rim_width
    step = 2.0 * math.pi * params.outer_radius / n_theta
    bands = []
    for lo, hi in ((0.0, params.hub_radius), (params.hub_radius, rim_inner), (rim_inner, params.outer_radius)):
        n = max(1, int(math.ceil((hi - lo) / step)))
        bands.append(np.linspace(lo, hi, n + 1))
    radii = np.concatenate([bands[0], bands[1][1:], bands[2][1:]])
    n_hub = bands[0].size - 1
    n_mid = bands[1].size - 1
    n_bands = radii.size - 1
    occupancy = np.zeros((n_bands, n_theta), dtype=bool)
    occupancy[:n_hub, :] = True
    occupancy[n_hub + n_mid :, :] = True
    r_mid = 0.5 * (params.hub_radius + rim_inner)
    half_width_sectors = (params.spoke_width / r_mid) / (2.0 * math.pi / n_theta) / 2.0
    # each spoke spans at least the two sectors beside its centerline so the
    # hub stays connected to the rim at any resolution
    half_width_sectors = max(half_width_sectors, 0.5)
    for j in range(n_theta):
        jp = j % period
        dist = min(jp + 0.5, period - jp - 0.5)
        if dist <= half_width_sectors:
            occupancy[n_hub : n_hub + n_mid, j] = True
    return radii, n_theta, occupancy


def wheel_window_count(params, resolution):
    """Number of through-holes the generated wheel will have."""
    radii, n_theta, occupancy = _wheel_grid(params, resolution)
    if np.all(occupancy):
        return 0
    return params.spoke_count


def expected_euler_characteristic(params, resolution):
    """V - E + F of the generated surface: 2 - 2 * (window count)."""
    return 2 - 2 * wheel_window_count(params, resolution)


def generate_shape(params, resolution=36):
    """Closed, watertight triangle mesh of the wheel solid.

    Vertices are shared through exact grid indexing (no tolerance welding),
    so the surface is watertight by construction. Deterministic in
    (params, resolution).
    """
    radii, n_theta, occ = _wheel_grid(params, resolution)
    n_bands = radii.size - 1
    t = params.disk_thickness
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    # grid vertex ids: rings 1..n_bands have n_theta points at z in {0, t};
    # the r=0 center contributes one point per z level.
    def vid(ring, j, top):
        if ring == 0:
            return 2 * (n_bands * n_theta) + (1 if top else 0)
        return 2 * ((ring - 1) * n_theta + (j % n_theta)) + (1 if top else 0)

    faces = []

    def quad(a, b, c, d):
        faces.append((a, b, c))
        faces.append((a, c, d))

    for b in range(n_bands):
        for j in range(n_theta):
            if not occ[b, j]:
                continue
            jn = (j + 1) % n_theta
            if b == 0:
                faces.append((vid(0, 0, True), vid(1, j, True), vid(1, jn, True)))
                faces.append((vid(0, 0, False), vid(1, jn, False), vid(1, j, False)))
            else:
                quad(vid(b, j, True), vid(b + 1, j, True), vid(b + 1, jn, True), vid(b, jn, True))
                quad(vid(b, j, False), vid(b, jn, False), vid(b + 1, jn, False), vid(b + 1, j, False))
    # radial walls where occupancy changes along r (ring i splits bands i-1 and i)
    for i in range(1, n_bands + 1):
        for j in range(n_theta):
            inner = occ[i - 1, j]
            outer = occ[i, j] if i < n_bands else False
            if inner == outer:
                continue
            jn = (j + 1) % n_theta
            p0 = vid(i, j, False)
            p1 = vid(i, jn, False)
            p2 = vid(i, jn, True)
            p3 = vid(i, j, True)
            if inner:  # solid inside, normal points outward (+r)
                quad(p0, p1, p2, p3)
            else:
                quad(p0, p3, p2, p1)
    # angular walls where occupancy changes between sectors j and j+1
    for b in range(n_bands):
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            left = occ[b, j]
            right = occ[b, jn]
            if left == right:
                continue
            q0 = vid(b, jn, False)
            q1 = vid(b + 1, jn, False)
            q2 = vid(b + 1, jn, True)
            q3 = vid(b, jn, True)
            if left:  # solid on the -theta side, normal points +theta
                quad(q0, q3, q2, q1)
            else:
                quad(q0, q1, q2, q3)

    faces = np.array(faces, dtype=np.int64)
    n_grid = 2 * n_bands * n_theta + 2
    coords = np.zeros((n_grid, 3))
    for ring in range(1, n_bands + 1):
        r = radii[ring]
        for j in range(n_theta):
            for top in (False, True):
                coords[vid(ring, j, top)] = (r * cos_t[j], r * sin_t[j], t if top else 0.0)
    coords[vid(0, 0, False)] = (0.0, 0.0, 0.0)
    coords[vid(0, 0, True)] = (0.0, 0.0, t)
    used, faces = np.unique(faces, return_inverse=True)
    return TriMesh(coords[used], faces.reshape(-1, 3)).validate()


def _volume_integrals(mesh):
    """Signed volume and first/second moments of the enclosed solid.

    Divergence-theorem sums over origin tetrahedra: exact for polyhedra.
    Returns (volume, first_moment[3], second_moment[3] of x^2, y^2, z^2).
    """
    v = mesh.vertices
    f = mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    vol_parts = det / 6.0
    volume = float(np.sum(vol_parts))
    s = a + b + c
    first = (vol_parts[:, None] * s / 4.0).sum(axis=0)
    sq = a * a + b * b + c * c + s * s
    second = (vol_parts[:, None] * sq / 20.0).sum(axis=0)
    return volume, first, second


@dataclass
class PerformanceLabel:
    kind: str
    value: float


def oracle_labels(mesh, density):
    """Mass and two moment-based stiffness proxies from a closed mesh.

    mass: density times signed volume. rim proxy: polar second moment about
    the through-axis (z) of the center of mass. disk proxy: second moment
    about a diametral axis (x) through the center of mass. All three are
    rigid-translation invariant.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    if not is_closed_manifold(mesh):
        raise ValueError("label oracle needs a closed mesh (signed volume is unreliable otherwise)")
    volume, first, second = _volume_integrals(mesh)
    if volume <= 0:
        raise ValueError(
            f"signed volume {volume:g} is not positive; mesh orientation is flipped"
        )
    center = first / volume
    central = second - volume * center**2
    mass = float(density * volume)
    rim = float(density * (central[0] + central[1]))
    disk = float(density * (central[1] + central[2]))
    return {
        "mass": PerformanceLabel("mass", mass),
        "rim_stiffness": PerformanceLabel("rim_stiffness", rim),
        "disk_stiffness": PerformanceLabel("disk_stiffness", disk),
    }


# documented sampling ranges for dataset generation (length units arbitrary)
DEFAULT_PARAM_RANGES = {
    "outer_radius": (0.85, 1.3),
    "rim_width": (0.12, 0.28),
    "hub_radius": (0.22, 0.42),
    "disk_thickness": (0.1, 0.3),
    "spoke_count": (4, 8),
    "spoke_width": (0.08, 0.2),
}


def sample_shape_params(rng, ranges=None, density=1.0):
    """One independent uniform draw per field, within the documented ranges."""
    r = dict(DEFAULT_PARAM_RANGES)
    if ranges:
        r.update(ranges)
    return ShapeParams(
        outer_radius=float(rng.uniform(*r["outer_radius"])),
        rim_width=float(rng.uniform(*r["rim_width"])),
        hub_radius=float(rng.uniform(*r["hub_radius"])),
        disk_thickness=float(rng.uniform(*r["disk_thickness"])),
        spoke_count=int(rng.integers(r["spoke_count"][0], r["spoke_count"][1] + 1)),
        spoke_width=float(rng.uniform(*r["spoke_width"])),
        density=density,
    )
