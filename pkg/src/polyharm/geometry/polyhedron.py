"""Convex polyhedra with vertex/edge/face incidence."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegeneracyError, InvalidDimensionError, InvalidInputError
from .sphere import SphericalPolygon, normalize, polygon_area

CONVEXITY_RTOL = 1e-12
COPLANAR_TOL = 1e-10


def _order_face(points: np.ndarray, idx: Sequence[int], normal: np.ndarray) -> list[int]:
    """Sort face vertex indices counterclockwise about ``normal``, smallest first."""
    pts = points[list(idx)]
    c = pts.mean(axis=0)
    u = normalize(pts[0] - c)
    v = np.cross(normal, u)
    ang = np.arctan2((pts - c) @ v, (pts - c) @ u)
    ordered = [int(idx[k]) for k in np.argsort(ang)]
    k0 = ordered.index(min(ordered))
    return ordered[k0:] + ordered[:k0]


@dataclass(frozen=True)
class Polyhedron:
    """A convex solid.

    ``faces`` hold vertex indices counterclockwise seen from outside;
    ``normals`` are outward unit normals. ``dims`` is set for rectangular
    prisms built by :func:`build_prism` (origin at vertex 0, axes along
    the edges, vertex ``a`` at ``(a>>2 & 1, a>>1 & 1, a & 1) * dims``).
    """

    vertices: np.ndarray
    faces: tuple
    normals: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)
    dims: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError("vertices must be an (n, 3) array")
        object.__setattr__(self, "vertices", pts)
        centroid = pts.mean(axis=0)
        scale = max(np.ptp(pts, axis=0).max(), 1e-300)
        faces, normals = [], []
        for f in self.faces:
            f = [int(i) for i in f]
            if len(f) < 3:
                raise InvalidInputError("a face needs at least three vertices")
            q = pts[f]
            # least-squares plane normal; independent of the vertex order
            nrm = np.linalg.svd(q - q.mean(axis=0))[2][-1]
            if np.dot(nrm, q.mean(axis=0) - centroid) < 0:
                nrm = -nrm
            faces.append(tuple(_order_face(pts, f, nrm)))
            normals.append(nrm)
        normals = np.array(normals)
        object.__setattr__(self, "faces", tuple(faces))
        object.__setattr__(self, "normals", normals)

        for fi, f in enumerate(faces):
            off = pts[list(f)] @ normals[fi]
            if np.ptp(off) > COPLANAR_TOL * scale:
                raise DegeneracyError(f"face {fi} is not planar")
            height = pts @ normals[fi] - off.mean()
            if height.max() > CONVEXITY_RTOL * scale * 10:
                raise InvalidInputError(f"polyhedron is not convex (face {fi})")

        edges = set()
        for f in faces:
            for k in range(len(f)):
                a, b = f[k], f[(k + 1) % len(f)]
                edges.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", np.array(sorted(edges), dtype=int))
        v, e, nf = len(pts), len(edges), len(faces)
        if v - e + nf != 2:
            raise DegeneracyError(f"Euler relation fails: v - e + f = {v - e + nf}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def edge_directions(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return normalize(d)

    @property
    def is_prism(self) -> bool:
        return self.dims is not None

    def faces_at(self, a: int) -> list[int]:
        return [i for i, f in enumerate(self.faces) if a in f]

    def neighbors(self, a: int) -> list[int]:
        out = []
        for i, j in self.edges:
            if i == a:
                out.append(int(j))
            elif j == a:
                out.append(int(i))
        return out

    def contains(self, x, tol=1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        offs = np.array([self.vertices[f[0]] @ n for f, n in zip(self.faces, self.normals)])
        return np.all(x @ self.normals.T - offs <= tol, axis=-1)

    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist(),
                           "faces": [list(f) for f in self.faces]})

    @classmethod
    def from_json(cls, text: str) -> "Polyhedron":
        data = json.loads(text)
        return cls(np.array(data["vertices"], dtype=float), tuple(tuple(f) for f in data["faces"]))


def build_prism(Lx: float, Ly: float, Lz: float) -> Polyhedron:
    """Rectangular prism ``[0, Lx] x [0, Ly] x [0, Lz]`` with ``Lx >= Ly >= Lz > 0``."""
    dims = tuple(float(x) for x in (Lx, Ly, Lz))
    if not all(np.isfinite(dims)) or dims[2] <= 0:
        raise InvalidDimensionError(f"prism dimensions must be positive, got {dims}")
    if not dims[0] >= dims[1] >= dims[2]:
        raise InvalidDimensionError(f"prism dimensions must satisfy Lx >= Ly >= Lz, got {dims}")
    verts = np.array([[(a >> 2) & 1, (a >> 1) & 1, a & 1] for a in range(8)], dtype=float)
    verts *= np.array(dims)
    faces = []
    for axis in range(3):
        bit = 2 - axis
        for side in (0, 1):
            faces.append(tuple(a for a in range(8) if ((a >> bit) & 1) == side))
    return Polyhedron(verts, tuple(faces), dims=dims)


def build_convex(points) -> Polyhedron:
    """Convex hull of ``points`` with coplanar hull facets merged into faces."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise InvalidInputError("need at least four 3D points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[-1] <= COPLANAR_TOL * max(sv[0], 1e-300):
        raise DegeneracyError("points are coplanar")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegeneracyError(str(exc)) from exc

    eqs = hull.equations
    scale = np.ptp(pts, axis=0).max()
    groups: list[list[int]] = []
    keys: list[np.ndarray] = []
    for s, eq in enumerate(eqs):
        for gi, key in enumerate(keys):
            if np.dot(key[:3], eq[:3]) > 1 - COPLANAR_TOL and abs(key[3] - eq[3]) < COPLANAR_TOL * scale:
                groups[gi].append(s)
                break
        else:
            keys.append(eq)
            groups.append([s])

    faces = []
    for key, g in zip(keys, groups):
        idx = sorted({int(i) for s in g for i in hull.simplices[s]})
        nrm = key[:3]
        q = pts[idx]
        u = normalize(q[1] - q[0])
        v = np.cross(nrm, u)
        flat = np.column_stack([(q - q[0]) @ u, (q - q[0]) @ v])
        corners = ConvexHull(flat).vertices if len(idx) > 3 else range(len(idx))
        faces.append([idx[k] for k in corners])

    used = sorted({i for f in faces for i in f})
    remap = {old: new for new, old in enumerate(used)}
    faces = tuple(tuple(remap[i] for i in f) for f in faces)
    return Polyhedron(pts[used], faces)


def solid_angle_polygon(P: Polyhedron, a: int) -> SphericalPolygon:
    """Geodesic polygon of directions about vertex ``a`` subtended by ``P``.

    Its vertices are the unit edge directions leaving ``a``, one side per
    incident face, ordered so the area is positive.
    """
    if not 0 <= a < P.n_vertices:
        raise InvalidInputError(f"no vertex {a}")
    # walk the faces around the vertex using the prev/next neighbours in each face
    links = {}
    for fi in P.faces_at(a):
        f = list(P.faces[fi])
        k = f.index(a)
        links[f[k - 1]] = f[(k + 1) % len(f)]
    start = next(iter(links))
    ring = [start]
    while True:
        nxt = links.get(ring[-1])
        if nxt is None:
            raise DegeneracyError(f"faces around vertex {a} do not close up")
        if nxt == start:
            break
        ring.append(nxt)
        if len(ring) > len(links):
            raise DegeneracyError(f"faces around vertex {a} do not close up")
    dirs = normalize(P.vertices[ring] - P.vertices[a])
    sv = np.linalg.svd(dirs, compute_uv=False)
    if len(dirs) < 3 or sv[-1] < 1e-9:
        raise DegeneracyError(f"vertex {a} is flat: incident faces are coplanar")
    poly = SphericalPolygon(dirs)
    if polygon_area(poly) < 0:
        poly = poly.reversed()
    return poly
