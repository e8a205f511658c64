"""Homotopy classes of tangent director fields and how to measure them.

A class is recorded by its wrapping numbers ``w[a, sigma]``: the signed
number of times the field restricted to a small surface cutting off vertex
``a`` covers sector ``sigma``. Surfaces are oriented with their normal
pointing *toward* the vertex they cut off, so the identity corner map
(field = direction from the vertex) has wrapping number -1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, NotRegularError, ResolutionError
from .geometry.partition import SectorPartition, classify_directions
from .geometry.sphere import normalize, triangle_signed_area

ROUNDING_THRESHOLD = 0.1
REGULAR_TOL = 1e-9


@dataclass
class HomotopyClass:
    wrapping: np.ndarray
    edge_orientations: Optional[np.ndarray] = None
    kink_numbers: Optional[np.ndarray] = None
    trapped_areas: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.wrapping)
        if w.ndim != 2:
            raise InvalidInputError("wrapping must be a 2D (vertex, sector) matrix")
        if not np.all(np.asarray(w) == np.round(w)):
            raise InvalidInputError("wrapping numbers must be integers")
        self.wrapping = w.astype(int)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.wrapping)

    def is_conformal_at(self, a: int) -> bool:
        row = self.wrapping[a]
        return not (np.any(row > 0) and np.any(row < 0))

    def to_json(self) -> str:
        def opt(x):
            return None if x is None else np.asarray(x).tolist()
        return json.dumps({"wrapping": self.wrapping.tolist(),
                           "edge_orientations": opt(self.edge_orientations),
                           "kink": opt(self.kink_numbers),
                           "trapped": opt(self.trapped_areas)})

    @classmethod
    def from_json(cls, text: str) -> "HomotopyClass":
        d = json.loads(text)
        opt = lambda k: None if d.get(k) is None else np.asarray(d[k])
        return cls(np.asarray(d["wrapping"]), opt("edge_orientations"), opt("kink"), opt("trapped"))

    def __eq__(self, other):
        return isinstance(other, HomotopyClass) and np.array_equal(self.wrapping, other.wrapping)


@dataclass(frozen=True)
class ReflSymClass:
    """Reflection-symmetric prism class, described at the origin vertex.

    ``octant_wrapping[sigma]`` is indexed by the prism sector id
    ``4[x>0] + 2[y>0] + [z>0]``. ``chi`` is the 0/1 correction entering
    :func:`polyharm.freegroup.delta`; it depends on edge orientations and
    kink numbers in a way that has to be supplied by the caller.
    """

    octant_wrapping: tuple
    chi: int = 0
    dims: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        w = tuple(int(x) for x in self.octant_wrapping)
        if len(w) != 8:
            raise InvalidInputError("need one wrapping number per octant (8)")
        if self.chi not in (0, 1):
            raise InvalidInputError("chi must be 0 or 1")
        dims = tuple(float(x) for x in self.dims)
        if not dims[0] >= dims[1] >= dims[2] > 0:
            raise InvalidInputError(f"prism dims must satisfy Lx >= Ly >= Lz > 0, got {dims}")
        object.__setattr__(self, "octant_wrapping", w)
        object.__setattr__(self, "dims", dims)

    @property
    def w(self) -> np.ndarray:
        return np.array(self.octant_wrapping)

    @property
    def is_conformal(self) -> bool:
        w = self.w
        return not (np.any(w > 0) and np.any(w < 0))


@dataclass
class SurfaceMapSample:
    """A triangulated surface with a unit vector at each node.

    ``triangles`` are oriented consistently; ``orientation`` (+1 or -1)
    multiplies every signed image area, so a mesh triangulated
    counterclockwise with respect to one normal can represent the surface
    with the opposite normal.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    values: np.ndarray
    orientation: int = 1
    boundary_nodes: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidInputError("triangles must be an (m, 3) index array")
        if self.values.shape != (len(self.nodes), 3):
            raise InvalidInputError("need one 3-vector per node")
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.nodes)):
            raise InvalidInputError("triangle index out of range")
        if np.any(np.abs(np.linalg.norm(self.values, axis=1) - 1.0) > 1e-10):
            raise InvalidInputError("node values must be unit vectors")
        if self.orientation not in (1, -1):
            raise InvalidInputError("orientation must be +1 or -1")

    def image_triangles(self) -> np.ndarray:
        return self.values[self.triangles]

    def refined(self) -> "SurfaceMapSample":
        """Split every triangle in four; new node values are normalised midpoints."""
        nodes, vals = list(self.nodes), list(self.values)
        mid: dict = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                mid[key] = len(nodes)
                nodes.append(0.5 * (self.nodes[i] + self.nodes[j]))
                vals.append(normalize(self.values[i] + self.values[j]))
            return mid[key]

        tris = []
        for i, j, k in self.triangles:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            tris += [(i, a, c), (a, j, b), (c, b, k), (a, b, c)]
        return SurfaceMapSample(np.array(nodes), np.array(tris), np.array(vals), self.orientation)


def geodesic_triangle_mesh(a, b, c, n: int):
    """Triangulate the geodesic triangle ``abc`` into ``n**2`` pieces.

    Returns ``(nodes, triangles)`` with nodes on the unit sphere and every
    triangle ordered like ``(a, b, c)``.
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    index = {}
    pts = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            index[i, j] = len(pts)
            pts.append(normalize((k * a + i * b + j * c) / n))
    tris = []
    for i in range(n):
        for j in range(n - i):
            tris.append((index[i, j], index[i + 1, j], index[i, j + 1]))
            if i + j < n - 1:
                tris.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    return np.array(pts), np.array(tris, dtype=int)


# --------------------------------------------------------------------------- validation

def validate_class(h: HomotopyClass, n_vertices: Optional[int] = None,
                   n_sectors: Optional[int] = None) -> list:
    """Sum-rule violations of ``h``; an empty list means admissible.

    Checks that every sector column of the wrapping matrix sums to zero and
    that the trapped areas (when given) sum to zero modulo 4*pi. Kink
    numbers are carried but not checked.
    """
    w = h.wrapping
    if n_vertices is not None and w.shape[0] != n_vertices:
        raise InvalidInputError(f"wrapping has {w.shape[0]} rows, polyhedron has {n_vertices} vertices")
    if n_sectors is not None and w.shape[1] != n_sectors:
        raise InvalidInputError(f"wrapping has {w.shape[1]} columns, partition has {n_sectors} sectors")
    out = []
    for sigma, total in enumerate(w.sum(axis=0)):
        if total != 0:
            out.append({"rule": "sector_sum", "sigma": sigma, "value": int(total)})
    if h.trapped_areas is not None:
        t = float(np.sum(h.trapped_areas))
        r = math.remainder(t, 4 * math.pi)
        if abs(r) > 1e-9:
            out.append({"rule": "trapped_sum", "value": t})
    return out


def expand_reflection(rs: ReflSymClass, part: SectorPartition) -> HomotopyClass:
    """Full wrapping matrix of a reflection-symmetric prism class.

    The field is mirror-symmetric in the three mid-planes, so every vertex
    sees the same values while each reflection reverses the orientation of
    the cleaved surface: ``w[a] = (-1)**popcount(a) * w[0]``.
    """
    if not part.is_octant_partition:
        raise InvalidInputError("reflection expansion needs the 8-octant prism partition")
    w0 = rs.w
    rows = [(-1) ** bin(a).count("1") * w0 for a in range(8)]
    return HomotopyClass(np.array(rows, dtype=int))


# --------------------------------------------------------------------------- wrapping numbers

def _clip(poly: list, n: np.ndarray, sign: int) -> list:
    """Keep the part of a small spherical polygon with ``sign * (n . x) >= 0``."""
    if not poly:
        return poly
    d = [sign * float(n @ p) for p in poly]
    out = []
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        da, db = d[k], d[(k + 1) % len(poly)]
        if da >= 0:
            out.append(a)
        if (da > 0 > db) or (da < 0 < db):
            out.append(normalize((da * b - db * a) / (da - db)))
    return out


def _fan_area(poly: list) -> float:
    if len(poly) < 3:
        return 0.0
    p = np.array(poly)
    return float(np.sum(triangle_signed_area(p[0], p[1:-1], p[2:])))


def sector_image_areas(sample: SurfaceMapSample, part: SectorPartition) -> np.ndarray:
    """Signed image area of ``sample`` inside each sector (steradians).

    Triangles whose corners all lie strictly inside one sector are
    attributed whole; the rest are clipped exactly against the great
    circles they straddle.
    """
    tri = sample.image_triangles()
    k = len(part.circles)
    contributions: list[list[float]] = [[] for _ in range(part.n_sectors)]
    if len(tri) == 0:
        return np.zeros(part.n_sectors)
    area = triangle_signed_area(tri[:, 0], tri[:, 1], tri[:, 2])
    d = tri @ part.circles.T                                   # (m, 3, k)
    strict = np.abs(d) > 1e-12
    sg = np.sign(d)
    same = np.all(strict, axis=(1, 2)) & np.all(sg == sg[:, :1, :], axis=(1, 2))
    if np.any(same):
        ids = classify_directions(part, normalize(tri[same].sum(axis=1)))
        # the centroid direction of a triangle inside a sector is inside it too
        for sid, a in zip(ids, area[same]):
            contributions[sid].append(float(a))
    lookup = part._lookup
    for t in np.flatnonzero(~same):
        p = tri[t]
        fixed = {}
        free = []
        for i in range(k):
            s = sg[t, :, i]
            st = strict[t, :, i]
            if np.all(st) and np.all(s == s[0]):
                fixed[i] = int(s[0])
            else:
                free.append(i)
        for bits in range(1 << len(free)):
            signs = dict(fixed)
            for j, i in enumerate(free):
                signs[i] = 1 if (bits >> j) & 1 else -1
            sid = lookup.get(tuple(signs[i] for i in range(k)))
            if sid is None:
                continue
            poly = [p[0], p[1], p[2]]
            for i in free:
                poly = _clip(poly, part.circles[i], signs[i])
            a = _fan_area(poly)
            if a != 0.0:
                contributions[sid].append(a)
    return sample.orientation * np.array([math.fsum(c) for c in contributions])


@dataclass(frozen=True)
class WrappingResult:
    values: np.ndarray
    raw: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0


def max_image_edge(sample: SurfaceMapSample) -> float:
    t = sample.image_triangles()
    if len(t) == 0:
        return 0.0
    e = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        c = np.clip(np.einsum("ij,ij->i", t[:, i], t[:, j]), -1, 1)
        e.append(np.arccos(c))
    return float(np.max(e))


def wrapping_from_surface(sample: SurfaceMapSample, part: SectorPartition,
                          check_resolution: bool = True) -> WrappingResult:
    """Wrapping numbers of a sampled surface map, one per sector.

    Raises ResolutionError when image triangles are too large compared with
    the sectors, or when any normalised sector area is further than 0.1
    from an integer.
    """
    if check_resolution:
        edge = max_image_edge(sample)
        limit = part.min_inradius / 4
        if edge > limit:
            raise ResolutionError(f"image triangles too large ({edge:.3g} rad > {limit:.3g}); refine")
    raw = sector_image_areas(sample, part) / part.areas
    values = np.rint(raw).astype(int)
    residuals = np.abs(raw - values)
    if np.any(residuals > ROUNDING_THRESHOLD):
        raise ResolutionError(f"wrapping numbers not resolved: residuals {residuals.round(3).tolist()}")
    return WrappingResult(values, raw, residuals)


def degree_at_value(sample: SurfaceMapSample, s) -> tuple[int, int]:
    """(algebraic, absolute) number of preimages of ``s`` under the PL map."""
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > 1e-9:
        raise InvalidInputError("target must be a unit vector")
    t = sample.image_triangles()
    if len(t) == 0:
        return 0, 0
    p0, p1, p2 = t[:, 0], t[:, 1], t[:, 2]
    orient = np.einsum("ij,ij->i", p0, np.cross(p1, p2))
    e = []
    for a, b in ((p0, p1), (p1, p2), (p2, p0)):
        nrm = np.cross(a, b)
        ln = np.linalg.norm(nrm, axis=1)
        e.append(np.where(ln > 0, (nrm @ s) / np.where(ln > 0, ln, 1.0), 0.0))
    e = np.array(e).T                                          # (m, 3)
    front = (t.sum(axis=1) @ s) > 0
    nondegen = np.abs(orient) > 1e-15
    sgn = np.sign(orient)[:, None]
    inside = front & nondegen & np.all(e * sgn > 0, axis=1)
    near = front & nondegen & np.all(e * sgn > -REGULAR_TOL, axis=1) & np.any(np.abs(e) < REGULAR_TOL, axis=1)
    if np.any(near):
        raise NotRegularError("value lies within tolerance of a triangle image edge")
    alg = int(sample.orientation * np.sum(np.sign(orient[inside])))
    return alg, int(np.sum(inside))
