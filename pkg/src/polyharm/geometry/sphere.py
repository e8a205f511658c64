"""Unit-sphere utilities: geodesic polygons, signed areas, stereographic charts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegeneracyError, InvalidInputError

UNIT_TOL = 1e-12


def normalize(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def triangle_signed_area(a, b, c):
    """Signed area of the geodesic triangle(s) ``abc`` (Van Oosterom-Strackee).

    Positive when ``a, b, c`` run counterclockwise seen from outside the
    sphere. Broadcasts over leading axes.
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = (1.0 + np.einsum("...i,...i->...", a, b)
           + np.einsum("...i,...i->...", b, c)
           + np.einsum("...i,...i->...", c, a))
    return 2.0 * np.arctan2(num, den)


def polygon_signed_area_fan(points) -> float:
    """Signed area of a small polygon by a fan from its first vertex.

    Only valid when the polygon fits comfortably inside a hemisphere, which
    is the case for clipped image triangles.
    """
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        return 0.0
    return float(np.sum(triangle_signed_area(p[0], p[1:-1], p[2:])))


@dataclass(frozen=True)
class SphericalPolygon:
    """Geodesic polygon given by its ordered vertices on the unit sphere."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 3:
            raise InvalidInputError("a spherical polygon needs at least 3 unit 3-vectors")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-9):
            raise InvalidInputError("polygon vertices must be unit vectors")
        object.__setattr__(self, "vertices", v)

    @property
    def area(self) -> float:
        return polygon_area(self)

    def reversed(self) -> "SphericalPolygon":
        return SphericalPolygon(self.vertices[::-1].copy())


def polygon_area(poly: SphericalPolygon) -> float:
    """Signed area by Gauss-Bonnet: 2*pi minus the total turning angle.

    The result is reduced into (-2*pi, 2*pi], so a clockwise octant gives
    -pi/2 rather than the 7*pi/2 of its complement.
    """
    v = poly.vertices
    n = len(v)
    total_turn = 0.0
    for k in range(n):
        prev, cur, nxt = v[k - 1], v[k], v[(k + 1) % n]
        if np.dot(prev, cur) < -1.0 + 1e-12 or np.dot(cur, nxt) < -1.0 + 1e-12:
            raise DegeneracyError(f"antipodal consecutive vertices at index {k}")
        # direction of travel on arrival at cur, and on departure
        t_in = -(prev - np.dot(prev, cur) * cur)
        t_out = nxt - np.dot(nxt, cur) * cur
        if np.linalg.norm(t_in) < 1e-15 or np.linalg.norm(t_out) < 1e-15:
            raise DegeneracyError(f"repeated vertex at index {k}")
        total_turn += np.arctan2(np.dot(cur, np.cross(t_in, t_out)), np.dot(t_in, t_out))
    area = 2.0 * np.pi - total_turn
    area = (area + 2.0 * np.pi) % (4.0 * np.pi) - 2.0 * np.pi
    if np.isclose(area, -2.0 * np.pi, atol=1e-12):
        area = 2.0 * np.pi
    return float(area)


def stereographic(e):
    """Map unit vectors to the extended complex plane, ``w = (e_x + i e_y)/(1 + e_z)``.

    The south pole ``(0, 0, -1)`` maps to ``complex(inf, 0)``. Accepts a
    single 3-vector or an ``(..., 3)`` array.
    """
    e = np.asarray(e, dtype=float)
    if np.any(np.abs(np.linalg.norm(e, axis=-1) - 1.0) > 1e-9):
        raise InvalidInputError("stereographic projection needs unit vectors")
    x, y, z = e[..., 0], e[..., 1], e[..., 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        north = (x + 1j * y) / (1.0 + z)
        # |w|^2 = (1 - z)/(1 + z); the second form keeps precision near the south pole
        south = (1.0 - z) / (x - 1j * y)
    w = np.where(z >= 0.0, north, south)
    pole = (x == 0.0) & (y == 0.0) & (z < 0.0)
    w = np.where(pole, complex(np.inf, 0.0), w)
    if w.ndim == 0:
        return complex(w)
    return w


def inverse_stereographic(w):
    """Inverse of :func:`stereographic`; infinite input maps to ``(0, 0, -1)``."""
    w = np.asarray(w, dtype=complex)
    inf = ~np.isfinite(w)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big = np.abs(w) > 1.0
        u = np.where(big, 1.0 / np.where(inf, 1.0, w), 0.0)
        u = np.where(inf, 0.0, u)
        ww = np.where(big | inf, 0.0, w)
        a_small = np.abs(ww) ** 2
        xy_small = 2.0 * ww / (1.0 + a_small)
        z_small = (1.0 - a_small) / (1.0 + a_small)
        a_big = np.abs(u) ** 2
        xy_big = 2.0 * np.conj(u) / (1.0 + a_big)
        z_big = (a_big - 1.0) / (a_big + 1.0)
    use_big = big | inf
    xy = np.where(use_big, xy_big, xy_small)
    z = np.where(use_big, z_big, z_small)
    return np.stack([xy.real, xy.imag, z], axis=-1)
