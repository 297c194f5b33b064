import dataclasses
import functools
import pathlib
from typing import NamedTuple

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import skimage.measure

from . import errors
from . import fields

DEGENERATE_FRACTION = 1e-14


@dataclasses.dataclass(frozen=True)
class GridSpec:
    box: fields.BoundingBox
    resolution: int = 128

    def __post_init__(self):
        if self.resolution < 16:
            raise errors.ConfigError(f"Grid resolution must be at least 16, got {self.resolution}.")

    @property
    def spacing(self):
        return self.box.size / self.resolution


@dataclasses.dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, np.int64).reshape(-1, 3)
        assert triangles.size == 0 or (triangles.min() >= 0 and triangles.max() < len(vertices))
        vertices.flags.writeable = False
        triangles.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3), np.int64))

    def __len__(self):
        return len(self.triangles)

    @functools.cached_property
    def areas(self):
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)

    @functools.cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @functools.cached_property
    def edge_counts(self):
        """Unique undirected edges (sorted vertex pairs) and how many
        triangles use each."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        return np.unique(edges, axis=0, return_counts=True)


class SurfaceIntegral(NamedTuple):
    value: float
    skipped_fraction: float


def _weld_and_prune(vertices, triangles):
    # Vertices sharing a grid edge are already welded by the extractor; only
    # exact duplicates (a level value hitting a grid node) are merged here.
    vertices, inverse = np.unique(vertices, axis=0, return_inverse=True)
    triangles = inverse.reshape(-1)[triangles]
    t = triangles
    distinct = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 2] != t[:, 0])
    triangles = triangles[distinct]
    if len(triangles):
        a, b, c = (vertices[triangles[:, k]] for k in range(3))
        areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)
        triangles = triangles[areas > DEGENERATE_FRACTION * areas.mean()]
    used, triangles = np.unique(triangles, return_inverse=True)
    return vertices[used], triangles.reshape(-1, 3)


def sample_grid(field, grid):
    """Field values on the (resolution + 1)^3 lattice nodes, one z-slab at a
    time to bound memory."""
    axes = [np.linspace(lo, hi, grid.resolution + 1) for lo, hi in zip(grid.box.lo, grid.box.hi)]
    xs, ys = np.meshgrid(axes[0], axes[1], indexing="ij")
    volume = np.empty((len(axes[0]), len(axes[1]), len(axes[2])))
    for k, z in enumerate(axes[2]):
        points = np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, z)], axis=-1)
        volume[:, :, k] = field.value(points).reshape(xs.shape)
    return volume


def extract_level_set(field, t, grid):
    """Marching cubes (single-table lorensen cases) of f^-1(t) on the grid."""
    if field.dim != 3:
        raise errors.UnsupportedDimensionError(f"Level sets can only be meshed for d = 3, not d = {field.dim}.")
    if grid.box.dim != 3:
        raise errors.UnsupportedDimensionError(f"Grid box must be 3-dimensional, got {grid.box.dim}.")
    volume = sample_grid(field, grid)
    if not np.all(np.isfinite(volume)):
        raise errors.DomainError(f"{field} is not finite on the whole grid box.")
    if not volume.min() < t < volume.max():
        return TriangleMesh.empty()
    vertices, triangles, _, _ = skimage.measure.marching_cubes(
        volume, level=t, spacing=tuple(grid.spacing), method="lorensen", allow_degenerate=True
    )
    vertices = vertices.astype(np.float64) + grid.box.lo
    vertices, triangles = _weld_and_prune(vertices, triangles.astype(np.int64))
    return TriangleMesh(vertices, triangles)


def surface_area(mesh):
    return float(mesh.areas.sum()) if len(mesh) else 0.0


def surface_integral(mesh, field, g):
    """Centroid-rule integral of g over the mesh. `g` takes
    `quadrature.Samples`-like objects (see `quadrature.Samples`)."""
    from . import quadrature

    if not len(mesh):
        return SurfaceIntegral(0.0, 0.0)
    samples = quadrature.Samples(field, mesh.centroids, field.safe_jets(mesh.centroids))
    with np.errstate(all="ignore"):
        values = np.asarray(g(samples), np.float64)
    areas = mesh.areas
    keep = samples.regular
    total = areas.sum()
    skipped = float(areas[~keep].sum() / total) if total > 0 else 0.0
    return SurfaceIntegral(float(np.sum(values[keep] * areas[keep])), skipped)


def check_manifold(mesh):
    """Raises TopologyError unless every edge is shared by exactly two
    triangles (closed, edge-manifold)."""
    _, counts = mesh.edge_counts
    if np.any(counts > 2):
        raise errors.TopologyError(
            f"{int(np.sum(counts > 2))} non-manifold edges; the grid is likely too coarse "
            "near a critical point"
        )
    if np.any(counts < 2):
        raise errors.TopologyError(
            f"{int(np.sum(counts < 2))} boundary edges; the level set is not closed inside the box"
        )


def euler_characteristic(mesh):
    if not len(mesh):
        return 0
    check_manifold(mesh)
    edges, _ = mesh.edge_counts
    return int(len(mesh.vertices) - len(edges) + len(mesh.triangles))


def connected_components(mesh):
    if not len(mesh):
        return 0
    edges, _ = mesh.edge_counts
    n = len(mesh.vertices)
    adjacency = scipy.sparse.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    count, _ = scipy.sparse.csgraph.connected_components(adjacency, directed=False)
    return int(count)


def write_off(mesh, path, header=None):
    """OFF export; `header` entries become `#` comment lines after the
    magic line."""
    path = pathlib.Path(path)
    lines = ["OFF"]
    for key, value in (header or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(f"{len(mesh.vertices)} {len(mesh.triangles)} 0")
    lines += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(i) for i in t) for t in mesh.triangles]
    path.write_text("\n".join(lines) + "\n")


def read_off(path):
    rows = [
        line.split()
        for line in pathlib.Path(path).read_text().splitlines()
        if line.strip() and not line.startswith("#")
    ]
    assert rows[0] == ["OFF"], rows[0]
    nv, nf = int(rows[1][0]), int(rows[1][1])
    vertices = np.array(rows[2 : 2 + nv], np.float64).reshape(-1, 3)
    faces = np.array([r[1:4] for r in rows[2 + nv : 2 + nv + nf]], np.int64).reshape(-1, 3)
    return TriangleMesh(vertices, faces)
