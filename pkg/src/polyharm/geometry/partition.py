"""Sectors of the sphere cut out by the great circles tangent to the faces."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .polyhedron import Polyhedron
from .sphere import normalize

CIRCLE_DEDUP_TOL = 1e-10
ON_CIRCLE_TOL = 1e-12
BOUNDARY_ANGLE = 1e-9
BOUNDARY = -1


def _canonical_sign(n: np.ndarray) -> np.ndarray:
    for c in n:
        if abs(c) > CIRCLE_DEDUP_TOL:
            return n if c > 0 else -n
    return n


def dedupe_circles(normals) -> np.ndarray:
    """Unit normals of distinct great circles, identified up to sign."""
    out: list[np.ndarray] = []
    for n in normalize(np.asarray(normals, dtype=float)):
        n = _canonical_sign(n)
        if not any(abs(abs(np.dot(n, m)) - 1.0) < CIRCLE_DEDUP_TOL for m in out):
            out.append(n)
    return np.array(out)


@dataclass(frozen=True)
class Sector:
    id: int
    signs: tuple
    vertices: np.ndarray  # ordered counterclockwise about ``interior``
    area: float
    interior: np.ndarray
    inradius: float


@dataclass(frozen=True)
class SectorPartition:
    circles: np.ndarray
    sectors: tuple
    adjacency: tuple

    @property
    def areas(self) -> np.ndarray:
        return np.array([s.area for s in self.sectors])

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    @property
    def min_inradius(self) -> float:
        return min(s.inradius for s in self.sectors)

    def sector_of_signs(self, signs) -> int:
        return self._lookup[tuple(int(s) for s in signs)]

    @property
    def _lookup(self) -> dict:
        return {s.signs: s.id for s in self.sectors}

    @property
    def is_octant_partition(self) -> bool:
        if len(self.circles) != 3:
            return False
        return bool(np.allclose(np.abs(self.circles), np.eye(3), atol=1e-10))

    def to_json(self) -> str:
        return json.dumps({
            "circles": self.circles.tolist(),
            "sectors": [{"id": s.id, "signs": list(s.signs), "vertices": s.vertices.tolist(),
                         "area": s.area} for s in self.sectors],
            "adjacency": [list(a) for a in self.adjacency],
        })


def _sign_vector(normals, point, tangent=None):
    d = normals @ point
    s = np.sign(d)
    if tangent is not None:
        on = np.abs(d) < ON_CIRCLE_TOL
        s[on] = np.sign(normals[on] @ tangent)
    return tuple(int(x) for x in s)


def partition_from_circles(circles) -> SectorPartition:
    """Arrangement of great circles given by unit normals (already deduplicated)."""
    circles = np.asarray(circles, dtype=float)
    k = len(circles)
    if k == 0:
        raise InvalidInputError("need at least one great circle")
    if k == 1:
        n = circles[0]
        sectors = []
        for sid, sgn in enumerate((-1, 1)):
            sectors.append(Sector(sid, (sgn,), np.zeros((0, 3)), 2 * np.pi, sgn * n, np.pi / 2))
        return SectorPartition(circles, tuple(sectors), ((1,), (0,)))

    # arrangement vertices: pairwise circle intersections, merged
    verts: list[np.ndarray] = []
    for i in range(k):
        for j in range(i + 1, k):
            p = normalize(np.cross(circles[i], circles[j]))
            for q in (p, -p):
                if not any(np.dot(q, v) > 1 - CIRCLE_DEDUP_TOL for v in verts):
                    verts.append(q)

    cells: dict = {}
    eps = 1e-3
    for v in verts:
        through = np.flatnonzero(np.abs(circles @ v) < 1e-10)
        # tangent plane basis at v
        a = normalize(np.cross(v, [1.0, 0.0, 0.0] if abs(v[0]) < 0.9 else [0.0, 1.0, 0.0]))
        b = np.cross(v, a)
        dirs = []
        for i in through:
            t = normalize(np.cross(circles[i], v))
            dirs.extend([t, -t])
        ang = np.sort(np.array([np.arctan2(t @ b, t @ a) for t in dirs]))
        gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
        for lo, gap in zip(ang, gaps):
            if gap < 1e-12:
                continue
            mid = lo + gap / 2
            bis = np.cos(mid) * a + np.sin(mid) * b
            sig = _sign_vector(circles, v, bis)
            cells.setdefault(sig, []).append((v, gap, np.cos(eps) * v + np.sin(eps) * bis))

    keys = sorted(cells)
    sectors = []
    for sid, sig in enumerate(keys):
        entries = cells[sig]
        vs = np.array([e[0] for e in entries])
        angles = np.array([e[1] for e in entries])
        area = float(angles.sum() - (len(entries) - 2) * np.pi)
        c = normalize(np.sum([e[2] for e in entries], axis=0))
        u = normalize(vs[0] - (vs[0] @ c) * c)
        w = np.cross(c, u)
        order = np.argsort(np.arctan2(vs @ w, vs @ u))
        inr = float(np.min(np.arcsin(np.clip(np.abs(circles @ c), 0, 1))))
        sectors.append(Sector(sid, sig, vs[order], area, c, inr))

    index = {s.signs: s.id for s in sectors}
    adjacency = []
    for s in sectors:
        nb = []
        for i in range(k):
            flipped = list(s.signs)
            flipped[i] = -flipped[i]
            j = index.get(tuple(flipped))
            if j is not None:
                nb.append(j)
        adjacency.append(tuple(sorted(nb)))
    return SectorPartition(circles, tuple(sectors), tuple(adjacency))


def tangent_partition(P: Polyhedron) -> SectorPartition:
    """Sectors of the sphere minus the directions tangent to some face of ``P``.

    Sector ids follow the lexicographic order of their sign vectors
    (``-1 < +1``) against the canonical circle normals; for a prism the
    octant with signs ``(sx, sy, sz)`` gets id ``4[sx>0] + 2[sy>0] + [sz>0]``.
    """
    return partition_from_circles(dedupe_circles(P.normals))


def classify_directions(part: SectorPartition, e) -> np.ndarray:
    """Vectorised :func:`classify_direction`; boundary points get ``BOUNDARY``."""
    e = np.atleast_2d(np.asarray(e, dtype=float))
    if np.any(np.abs(np.linalg.norm(e, axis=1) - 1.0) > ON_CIRCLE_TOL * 1e3):
        raise InvalidInputError("directions must be unit vectors")
    d = e @ part.circles.T
    on = np.any(np.abs(d) < np.sin(BOUNDARY_ANGLE), axis=1)
    lookup = part._lookup
    out = np.full(len(e), BOUNDARY, dtype=int)
    signs = np.where(d > 0, 1, -1)
    for idx in np.flatnonzero(~on):
        out[idx] = lookup.get(tuple(int(s) for s in signs[idx]), BOUNDARY)
    return out


def classify_direction(part: SectorPartition, e) -> int:
    """Sector id containing unit vector ``e``, or ``BOUNDARY`` near a circle."""
    e = np.asarray(e, dtype=float)
    if e.shape != (3,) or abs(np.linalg.norm(e) - 1.0) > ON_CIRCLE_TOL:
        raise InvalidInputError(f"expected a unit 3-vector, got {e!r}")
    return int(classify_directions(part, e[None, :])[0])
