"""Built-in demo substrates used by tests, scripts, and the acceptance suite."""

from __future__ import annotations

import math
import struct

import numpy as np

from .mesh import SurfaceMesh
from .toolpath import SliceParams


def write_binary_stl(facets: np.ndarray, header: bytes = b"") -> bytes:
    """Serialize (M, 3, 3) facet vertex arrays as little-endian binary STL."""
    facets = np.asarray(facets, dtype=float).reshape(-1, 3, 3)
    out = bytearray(header.ljust(80, b"\0")[:80])
    out += struct.pack("<I", len(facets))
    for tri in facets:
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        norm = np.linalg.norm(n)
        n = n / norm if norm > 1e-20 else np.zeros(3)
        out += struct.pack("<3f", *n)
        for v in tri:
            out += struct.pack("<3f", *v)
        out += struct.pack("<H", 0)
    return bytes(out)


def grid_facets(xs: np.ndarray, ys: np.ndarray, zfunc) -> np.ndarray:
    """Triangulate the heightfield z = zfunc(x, y) over a rectangular grid."""
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = zfunc(gx, gy)
    facets = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            p00 = (gx[i, j], gy[i, j], gz[i, j])
            p10 = (gx[i + 1, j], gy[i + 1, j], gz[i + 1, j])
            p01 = (gx[i, j + 1], gy[i, j + 1], gz[i, j + 1])
            p11 = (gx[i + 1, j + 1], gy[i + 1, j + 1], gz[i + 1, j + 1])
            facets.append([p00, p10, p11])
            facets.append([p00, p11, p01])
    return np.array(facets)


def flat_plate_mesh(size: float = 40.0, z: float = 5.0, divisions: int = 8) -> SurfaceMesh:
    """Square plate of side `size` centered at the origin, at constant height z."""
    xs = np.linspace(-size / 2, size / 2, divisions + 1)
    return _from_facets(grid_facets(xs, xs, lambda x, y: np.full_like(x, float(z))))


def hemisphere_mesh(radius: float = 20.0, divisions: int = 64) -> SurfaceMesh:
    """Upper hemisphere cap of given radius centered on the origin.

    Polar-grid tessellation: rings of constant planar radius from the apex out
    to the equator, so vertical-ray projection is well defined everywhere
    strictly inside the equator.
    """
    n_r, n_t = divisions, divisions
    rings = [np.array([[0.0, 0.0, radius]])]
    for i in range(1, n_r + 1):
        phi = (i / n_r) * (math.pi / 2)          # polar angle from +Z
        t = np.linspace(0.0, 2 * math.pi, n_t, endpoint=False)
        rings.append(np.column_stack([
            radius * math.sin(phi) * np.cos(t),
            radius * math.sin(phi) * np.sin(t),
            np.full(n_t, radius * math.cos(phi)),
        ]))
    vertices = np.vstack(rings)
    tris = []
    # Apex fan.
    for j in range(n_t):
        tris.append([0, 1 + j, 1 + (j + 1) % n_t])
    # Ring bands.
    for i in range(1, n_r):
        a0 = 1 + (i - 1) * n_t
        b0 = 1 + i * n_t
        for j in range(n_t):
            j1 = (j + 1) % n_t
            tris.append([a0 + j, b0 + j, b0 + j1])
            tris.append([a0 + j, b0 + j1, a0 + j1])
    return SurfaceMesh(vertices, np.array(tris))


def flat_plate_stl(size: float = 40.0, z: float = 5.0, divisions: int = 8) -> bytes:
    xs = np.linspace(-size / 2, size / 2, divisions + 1)
    return write_binary_stl(grid_facets(xs, xs, lambda x, y: np.full_like(x, float(z))),
                            header=b"conformal5x flat plate demo")


def hemisphere_stl(radius: float = 20.0, divisions: int = 64) -> bytes:
    mesh = hemisphere_mesh(radius, divisions)
    return write_binary_stl(mesh.vertices[mesh.triangles],
                            header=b"conformal5x hemisphere demo")


def _from_facets(facets: np.ndarray) -> SurfaceMesh:
    pts = facets.reshape(-1, 3)
    keys = np.round(pts / 1e-6).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return SurfaceMesh(pts[first], inverse.reshape(-1, 3))


def _disc_region(radius: float, sides: int = 64) -> tuple[tuple[float, float], ...]:
    t = np.linspace(0.0, 2 * math.pi, sides, endpoint=False)
    return tuple((float(radius * math.cos(a)), float(radius * math.sin(a))) for a in t)


def demo_params(name: str) -> SliceParams:
    """Default slicing parameters matched to each built-in substrate."""
    if name == "flat_plate":
        return SliceParams()
    if name == "hemisphere":
        return SliceParams(region=_disc_region(10.0))
    raise KeyError(f"unknown demo {name!r}")


def demo_mesh(name: str) -> SurfaceMesh:
    """The demo substrate exactly as its STL file loads.

    Routed through the binary STL bytes on purpose: STL stores float32, so
    building the mesh from float64 grids directly would make demo:<name>
    and a saved <name>.stl slice to slightly different G-code.
    """
    from .mesh import load_stl

    if name not in DEMOS:
        raise KeyError(f"unknown demo {name!r}")
    return load_stl(DEMOS[name]())


DEMOS = {
    "flat_plate": flat_plate_stl,
    "hemisphere": hemisphere_stl,
}
