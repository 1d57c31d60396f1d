"""Substrate surface meshes: STL loading, vertical-ray queries, offsets along normals.

The supported substrate class is heightfield-like (one surface z per xy inside
the print region). "On the surface" is defined by vertical-ray projection: a
planar pattern draped straight down onto the mesh, which is unambiguous for
heightfields and matches how conformal paths are laid onto a fixtured part.
"""

from __future__ import annotations

import logging
import math
import re
import struct
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# Vertices closer than this are merged at load time (mm).
DEDUP_TOLERANCE = 1e-6
# Facets with less area than this are dropped at load time (mm^2).
DEGENERATE_AREA = 1e-12


class MeshError(Exception):
    """Base class for surface-mesh failures."""


class MalformedStl(MeshError):
    """STL content is truncated or structurally invalid."""


class EmptyMesh(MeshError):
    """STL contained no usable triangles."""


@dataclass(frozen=True)
class SurfacePoint:
    """A point on the substrate surface with its interpolated unit normal."""

    position: np.ndarray  # (3,) mm
    normal: np.ndarray    # (3,) unit vector
    triangle_id: int


class _TriangleGridIndex:
    """Uniform 2D grid over triangle xy bounding boxes.

    query() returns a candidate superset of the triangles whose xy projection
    can contain a point; the caller still runs the exact containment test, so
    results are identical to a full scan.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray):
        tri_xy = vertices[triangles][:, :, :2]            # (M, 3, 2)
        self._lo = tri_xy.min(axis=(0, 1))
        self._hi = tri_xy.max(axis=(0, 1))
        span = np.maximum(self._hi - self._lo, 1e-9)
        n = max(1, int(math.sqrt(len(triangles))))
        self._shape = (n, n)
        self._cell = span / n
        self._cells: dict[tuple[int, int], list[int]] = {}
        mins = tri_xy.min(axis=1)
        maxs = tri_xy.max(axis=1)
        for t in range(len(triangles)):
            ix0, iy0 = self._clamp(mins[t])
            ix1, iy1 = self._clamp(maxs[t])
            for ix in range(ix0, ix1 + 1):
                for iy in range(iy0, iy1 + 1):
                    self._cells.setdefault((ix, iy), []).append(t)

    def _clamp(self, xy) -> tuple[int, int]:
        ij = np.floor((xy - self._lo) / self._cell).astype(int)
        return (int(np.clip(ij[0], 0, self._shape[0] - 1)),
                int(np.clip(ij[1], 0, self._shape[1] - 1)))

    def query(self, x: float, y: float) -> list[int]:
        if not (self._lo[0] <= x <= self._hi[0] and self._lo[1] <= y <= self._hi[1]):
            return []
        return self._cells.get(self._clamp(np.array([x, y])), [])


class SurfaceMesh:
    """Triangulated substrate surface. Immutable after construction.

    Vertex normals are the area-weighted average of incident facet normals,
    renormalized; facet winding defines orientation.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray):
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) == 0:
            raise EmptyMesh("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle index out of range")
        self.vertices = vertices
        self.triangles = triangles

        tri = vertices[triangles]                          # (M, 3, 3)
        area_vec = 0.5 * np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        self._facet_area = np.linalg.norm(area_vec, axis=1)

        normals = np.zeros_like(vertices)
        for k in range(3):
            np.add.at(normals, triangles[:, k], area_vec)
        norms = np.linalg.norm(normals, axis=1)
        flat = norms < 1e-12
        if flat.any():
            log.warning("%d vertex normals degenerate, defaulting to +Z", int(flat.sum()))
            normals[flat] = (0.0, 0.0, 1.0)
            norms[flat] = 1.0
        self.vertex_normals = normals / norms[:, None]

        self.spatial_index = _TriangleGridIndex(vertices, triangles)
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self.vertex_normals.setflags(write=False)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def project_down(self, xy) -> SurfacePoint | None:
        """Highest intersection of the downward vertical ray at xy, or None.

        The normal is interpolated barycentrically from vertex normals and
        renormalized. Ties on z resolve to the lowest triangle id.
        """
        x, y = float(xy[0]), float(xy[1])
        return self._project(x, y, self.spatial_index.query(x, y))

    def project_down_bruteforce(self, xy) -> SurfacePoint | None:
        """Same query without the spatial index (index-equivalence oracle)."""
        x, y = float(xy[0]), float(xy[1])
        return self._project(x, y, range(len(self.triangles)))

    def _project(self, x: float, y: float, candidates) -> SurfacePoint | None:
        best_z = -math.inf
        best_tri = -1
        best_w = None
        for t in candidates:
            w = self._barycentric_xy(t, x, y)
            if w is None:
                continue
            z = float(w @ self.vertices[self.triangles[t], 2])
            if z > best_z + 1e-12 or (abs(z - best_z) <= 1e-12 and t < best_tri):
                best_z, best_tri, best_w = z, t, w
        if best_tri < 0:
            return None
        n = best_w @ self.vertex_normals[self.triangles[best_tri]]
        n = n / np.linalg.norm(n)
        return SurfacePoint(position=np.array([x, y, best_z]), normal=n, triangle_id=best_tri)

    def _barycentric_xy(self, t: int, x: float, y: float) -> np.ndarray | None:
        a, b, c = self.vertices[self.triangles[t], :2]
        m00, m01 = b[0] - a[0], c[0] - a[0]
        m10, m11 = b[1] - a[1], c[1] - a[1]
        det = m00 * m11 - m01 * m10
        scale = abs(m00) + abs(m01) + abs(m10) + abs(m11)
        if abs(det) <= 1e-14 * max(scale * scale, 1e-30):
            return None  # vertical or degenerate in xy; cannot cross a vertical ray transversally
        px, py = x - a[0], y - a[1]
        wb = (px * m11 - py * m01) / det
        wc = (py * m00 - px * m10) / det
        wa = 1.0 - wb - wc
        eps = 1e-9
        if wa < -eps or wb < -eps or wc < -eps:
            return None
        w = np.clip(np.array([wa, wb, wc]), 0.0, None)
        return w / w.sum()


def offset_point(p: SurfacePoint, distance: float) -> np.ndarray:
    """Point displaced along the stored surface normal by `distance` mm."""
    return p.position + distance * p.normal


def load_stl(data: bytes) -> SurfaceMesh:
    """Load binary or ASCII STL bytes into a SurfaceMesh.

    Vertices are deduplicated within 1e-6 mm, degenerate facets dropped with a
    warning, and vertex normals computed by area-weighted facet averaging.
    """
    if not isinstance(data, (bytes, bytearray)):
        raise TypeError("load_stl expects bytes")
    facets = _parse_ascii(data) if _looks_ascii(data) else _parse_binary(data)
    if len(facets) == 0:
        raise EmptyMesh("STL contains zero triangles")

    pts = facets.reshape(-1, 3)
    keys = np.round(pts / DEDUP_TOLERANCE).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    vertices = pts[first]
    triangles = inverse.reshape(-1, 3)

    tri = vertices[triangles]
    areas = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    keep = areas >= DEGENERATE_AREA
    dropped = int((~keep).sum())
    if dropped:
        log.warning("dropped %d degenerate facets at load", dropped)
    triangles = triangles[keep]
    if len(triangles) == 0:
        raise EmptyMesh("all facets degenerate")
    return SurfaceMesh(vertices, triangles)


def _looks_ascii(data: bytes) -> bool:
    head = data[:512].lstrip()
    if not head.startswith(b"solid"):
        return False
    # Binary files sometimes start with "solid" too; require an ASCII facet keyword.
    return b"facet" in data[:4096] or b"endsolid" in data[:4096]


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MalformedStl(f"binary STL truncated: {len(data)} bytes < 84 header")
    (count,) = struct.unpack_from("<I", data, 80)
    need = 84 + 50 * count
    if len(data) < need:
        raise MalformedStl(f"binary STL truncated: {len(data)} bytes < {need} for {count} facets")
    if count == 0:
        return np.zeros((0, 3, 3))
    raw = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    rec = raw.reshape(count, 50)[:, :48].copy().view("<f4").reshape(count, 4, 3)
    return rec[:, 1:4, :].astype(float)  # slot 0 is the stored facet normal, recomputed later


_ASCII_VERTEX = re.compile(rb"vertex\s+(\S+)\s+(\S+)\s+(\S+)")


def _parse_ascii(data: bytes) -> np.ndarray:
    coords = []
    for m in _ASCII_VERTEX.finditer(data):
        try:
            coords.append([float(m.group(i)) for i in (1, 2, 3)])
        except ValueError as exc:
            raise MalformedStl(f"bad vertex coordinate: {exc}") from exc
    if b"endsolid" not in data:
        raise MalformedStl("ASCII STL missing endsolid terminator")
    if len(coords) % 3 != 0:
        raise MalformedStl(f"ASCII STL has {len(coords)} vertices, not a multiple of 3")
    return np.array(coords, dtype=float).reshape(-1, 3, 3)


# ---------------------------------------------------------------------------
# Display interchange: a line-oriented text form of the deduplicated mesh so
# non-Python consumers can render the substrate without an STL parser.

MESH_HEADER = "open5x-mesh v1"


def render_mesh_text(mesh: SurfaceMesh) -> str:
    """Header, one `v x y z nx ny nz` line per vertex, then one `f i j k`
    line per triangle. Floats use repr for exact round-trips."""
    lines = [MESH_HEADER]
    for (x, y, z), (nx, ny, nz) in zip(mesh.vertices, mesh.vertex_normals):
        lines.append("v " + " ".join(repr(float(c)) for c in (x, y, z, nx, ny, nz)))
    for i, j, k in mesh.triangles:
        lines.append(f"f {i} {j} {k}")
    return "\n".join(lines) + "\n"


def parse_mesh_text(text: str) -> SurfaceMesh:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MESH_HEADER:
        raise MalformedStl(f"missing header line {MESH_HEADER!r}")
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = line.split()
        try:
            if parts[0] == "v" and len(parts) == 7:
                vertices.append([float(c) for c in parts[1:4]])
            elif parts[0] == "f" and len(parts) == 4:
                triangles.append([int(c) for c in parts[1:]])
            else:
                raise ValueError(f"unrecognized record {parts[0]!r}")
        except ValueError as err:
            raise MalformedStl(f"line {line_no}: {err}")
    if not triangles:
        raise EmptyMesh("mesh text has no triangles")
    return SurfaceMesh(np.array(vertices), np.array(triangles))
