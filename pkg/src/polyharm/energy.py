"""Dirichlet energy of director fields, the Appell-function upper bound and
the pointwise check ``|grad n|^2 >= 2 |J|``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .conformal import ConformalMapSpec
from .errors import AccuracyError, InvalidInputError
from .geometry.sphere import stereographic
from .reflection import delta, improved_lower_bound, symmetric_lower_bound
from .topology import ReflSymClass

CHUNK = 1 << 17


@dataclass
class EnergyReport:
    energy: float            # value at the finer resolution
    coarse: float            # value at the coarser resolution
    extrapolated: float
    error: float             # |fine - coarse|, a conservative error estimate
    eps_scaled: float        # extrapolated / (Lx Ly Lz)^(1/3)
    resolution: int
    tail: float = 0.0        # contribution of the excluded vertex blocks (fine level)
    eps: float = 0.0         # vertex exclusion radius

    def to_json(self) -> str:
        return json.dumps({"E": self.energy, "eps_scaled": self.eps_scaled,
                           "resolution": self.resolution, "extrapolated": self.extrapolated,
                           "error": self.error, "coarse": self.coarse, "tail": self.tail,
                           "eps": self.eps})

    def __float__(self):
        return float(self.extrapolated)


# --------------------------------------------------------------------------- quadrature

def _grad_sq(field, X, hf):
    out = np.zeros(len(X))
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = hf
        d = (field(X + dx) - field(X - dx)) / (2 * hf)
        out += np.einsum("ij,ij->i", d, d)
    return out


def _gauss_octant(m: int):
    """Nodes and weights for integration over the positive octant of directions."""
    x, w = np.polynomial.legendre.leggauss(m)
    t = (x + 1) * np.pi / 4
    wt = w * np.pi / 4
    TH, PH = np.meshgrid(t, t, indexing="ij")
    W = np.outer(wt, wt) * np.sin(TH)
    E = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], -1)
    return E.reshape(-1, 3), W.ravel()


def _vertex_tail(field, vertex, inward, side: float, m: int = 48) -> float:
    """Energy in the cube ``[0, side]^3`` at a vertex, for a field constant on rays.

    For such a field ``|grad n|^2 = g(e) / rho^2`` and the energy over the
    block is ``int g(e) R(e) dOmega`` with ``R(e) = side / max_i e_i``.
    """
    E, W = _gauss_octant(m)
    rho = side / 4
    pts = vertex + rho * E * inward
    g = _grad_sq(field, pts, rho / 64) * rho ** 2
    R = side / E.max(axis=1)
    return float(np.sum(W * g * R))


def _box_energy(field, L, n, eps):
    """Midpoint rule over ``[0, L]`` with cubic cells, vertex blocks replaced by the cone tail."""
    L = np.asarray(L, dtype=float)
    c = L.min() / n
    counts = np.maximum(np.rint(L / c).astype(int), 1)
    cs = L / counts
    k = max(1, int(math.ceil(eps / cs.min())))
    if np.any(2 * k > counts):
        raise AccuracyError("vertex exclusion is larger than the resolution allows")
    hf = cs.min() / 8
    axes = [(np.arange(m) + 0.5) * h for m, h in zip(counts, cs)]
    total = 0.0
    nx, ny, nz = counts
    # iterate over x-slabs to bound memory
    yz = np.stack(np.meshgrid(axes[1], axes[2], indexing="ij"), -1).reshape(-1, 2)
    jy = np.repeat(np.arange(ny), nz)
    jz = np.tile(np.arange(nz), ny)
    step = max(1, CHUNK // len(yz))
    near_y = (jy < k) | (jy >= ny - k)
    near_z = (jz < k) | (jz >= nz - k)
    for i0 in range(0, nx, step):
        ii = np.arange(i0, min(nx, i0 + step))
        X = np.empty((len(ii) * len(yz), 3))
        X[:, 0] = np.repeat(axes[0][ii], len(yz))
        X[:, 1:] = np.tile(yz, (len(ii), 1))
        near_x = np.repeat((ii < k) | (ii >= nx - k), len(yz))
        keep = ~(near_x & np.tile(near_y & near_z, len(ii)))
        total += float(np.sum(_grad_sq(field, X[keep], hf)))
    return total * float(np.prod(cs)), k * cs


def _corner_signs(a):
    bits = np.array([(a >> 2) & 1, (a >> 1) & 1, a & 1])
    return np.where(bits == 1, -1.0, 1.0)


def _energy_at(field, n, eps):
    L = np.array(field.dims, dtype=float)
    if field.octant_symmetric:
        bulk, block = _box_energy(field, L / 2, n, eps)
        tail = _vertex_tail(field, np.zeros(3), np.ones(3), block.min())
        return 8 * (bulk + tail), 8 * tail
    bulk, block = _box_energy(field, L, n, eps)
    tail = 0.0
    for a in range(8):
        s = _corner_signs(a)
        v = np.where(s > 0, 0.0, L)
        tail += _vertex_tail(field, v, s, block.min())
    return bulk + tail, tail


def energy_quadrature(field, n_cells: int = 16, eps: Optional[float] = None,
                      order: float = 1.0) -> EnergyReport:
    """Dirichlet energy of an analytic field on a prism.

    The energy is computed with a cell-midpoint rule and central differences
    at ``n_cells`` and ``2 n_cells`` cells along the shortest edge, and the two
    values are combined by Richardson extrapolation of the given order.
    Blocks of cells covering the balls of radius ``eps`` about the vertices
    are left out and replaced by the exact block integral for a field that is
    constant along rays from the vertex.
    """
    if n_cells < 2:
        raise InvalidInputError("need at least two cells along the shortest edge")
    L = np.array(field.dims, dtype=float)
    if eps is None:
        eps = L.min() / 64
    coarse, _ = _energy_at(field, n_cells, eps)
    fine, tail = _energy_at(field, 2 * n_cells, eps)
    ext = fine + (fine - coarse) / (2 ** order - 1)
    if not np.isfinite(ext):
        raise AccuracyError("energy quadrature produced a non-finite value")
    vol = float(np.prod(L)) ** (1 / 3)
    return EnergyReport(fine, coarse, ext, abs(fine - coarse), ext / vol, 2 * n_cells, tail, eps)


def energy_grid(g) -> float:
    """Discrete energy of a grid field (see :mod:`polyharm.grid`)."""
    from .grid import VERTEX

    free = g.mask != VERTEX
    if np.any(np.abs(np.linalg.norm(g.values[free], axis=-1) - 1) > 1e-10):
        raise InvalidInputError("grid has non-unit node vectors")
    return float(g.energy())


# --------------------------------------------------------------------------- face-integral form

def reflection_energy(dims, spec, epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """Energy of the mirror-symmetric field built from a conformal corner map.

    On each of the eight sub-boxes the field is constant on rays from the
    vertex, with ``|grad n|^2 = 2 lam(e)^2 / r^2`` (``lam`` is the stretch
    factor of the corner map). Integrating along rays turns the volume
    integral into integrals over the three far faces of a sub-box:
    ``E = 8 sum_i int_{face i} 2 lam^2 a_i / |q|^2 dA`` with ``a_i = L_i / 2``.
    """
    if not isinstance(spec, ConformalMapSpec):
        raise InvalidInputError("face-integral form needs a (anti)conformal corner map")
    a = np.asarray(dims, dtype=float) / 2
    total = 0.0
    for i in range(3):
        j, k = [x for x in range(3) if x != i]

        def integrand(v, u, i=i, j=j, k=k):
            q = np.zeros(3)
            q[i], q[j], q[k] = a[i], u, v
            r2 = q @ q
            w = stereographic(q / math.sqrt(r2))
            lam = float(spec.spherical_derivative(w))
            return 2 * lam * lam * a[i] / r2

        val, _ = integrate.dblquad(integrand, 0, a[j], 0, a[k], epsabs=epsabs, epsrel=epsrel)
        total += val
    return 8 * total


# --------------------------------------------------------------------------- Appell F2

def appell_f2_series(alpha, beta, beta2, gamma, gamma2, x, y, tol=1e-15, max_terms=4000):
    """Double power series; converges for ``|x| + |y| < 1``."""
    if abs(x) + abs(y) >= 1:
        raise InvalidInputError("series needs |x| + |y| < 1")
    total = 0.0
    # term(m, n) built by ratios along m, then along n
    row = 1.0
    for m in range(max_terms):
        if m > 0:
            row *= (alpha + m - 1) * (beta + m - 1) / ((gamma + m - 1) * m) * x
        term = row
        s = 0.0
        for n in range(max_terms):
            if n > 0:
                term *= (alpha + m + n - 1) * (beta2 + n - 1) / ((gamma2 + n - 1) * n) * y
            s += term
            if abs(term) < tol * max(1.0, abs(s)) and n > 2:
                break
        total += s
        if abs(row) < tol and abs(s) < tol * max(1.0, abs(total)) and m > 2:
            break
    return total


def appell_f2(alpha, beta, beta2, gamma, gamma2, x, y, epsrel=1e-11):
    """Appell ``F2`` from its double Euler integral (``gamma > beta > 0``, ``gamma2 > beta2 > 0``).

    Valid whenever ``x, y <= 0`` or more generally ``1 - u x - v y > 0`` on the unit
    square. The substitution ``u = s**(1/beta)`` removes the endpoint singularity.
    """
    if not (gamma > beta > 0 and gamma2 > beta2 > 0):
        raise InvalidInputError("Euler integral needs gamma > beta > 0 and gamma2 > beta2 > 0")
    if x + max(y, 0) >= 1 or y + max(x, 0) >= 1:
        raise InvalidInputError("Euler integral diverges for these arguments")
    pref = (special.gamma(gamma) * special.gamma(gamma2)
            / (special.gamma(beta) * special.gamma(beta2)
               * special.gamma(gamma - beta) * special.gamma(gamma2 - beta2)))

    def f(t, s):
        u = s ** (1 / beta)
        v = t ** (1 / beta2)
        return ((1 - u) ** (gamma - beta - 1) * (1 - v) ** (gamma2 - beta2 - 1)
                * (1 - u * x - v * y) ** (-alpha))

    val, _ = integrate.dblquad(f, 0, 1, 0, 1, epsabs=0, epsrel=epsrel)
    return pref * val / (beta * beta2)


def appell_upper_bound(Lx: float, Ly: float, Lz: float) -> float:
    """Energy of the mirror-symmetric identity field: an upper bound for the unwrapped class.

    ``sum over cyclic (a, b, c) of 8 (b c / a) F2(1; 1/2, 1/2; 3/2, 3/2; -(b/a)^2, -(c/a)^2)``.
    """
    L = np.array([Lx, Ly, Lz], dtype=float)
    if np.any(~np.isfinite(L)) or np.any(L <= 0):
        raise InvalidInputError("prism dimensions must be positive")
    total = 0.0
    for i in range(3):
        a, b, c = L[i], L[(i + 1) % 3], L[(i + 2) % 3]
        total += 8 * b * c / a * appell_f2(1, 0.5, 0.5, 1.5, 1.5, -(b / a) ** 2, -(c / a) ** 2)
    return total


# --------------------------------------------------------------------------- bounds

def theorem3_bound(rs: ReflSymClass, energy_lower: Optional[float] = None) -> float:
    """Lower bound on the minimal energy of the reflection-symmetric class ``rs``.

    ``sqrt(Lx^2 + Ly^2 + Lz^2) / Lz`` times the corner lower bound: the
    symmetric bound when the class is conformal at a vertex, else the
    improved bound with the excess term.
    """
    Lx, Ly, Lz = rs.dims
    diag = math.sqrt(Lx * Lx + Ly * Ly + Lz * Lz)
    if energy_lower is None:
        energy_lower = symmetric_lower_bound(rs) if delta(rs).conformal else improved_lower_bound(rs)
    return diag / Lz * energy_lower


# --------------------------------------------------------------------------- pointwise check

@dataclass
class PointwiseViolation:
    point: tuple
    grad_sq: float
    jacobian: float


def pointwise_inequality_check(field, samples, fd: float = 1e-5, rel_tol: float = 0.05,
                               abs_tol: float = 1e-6):
    """Points where ``|grad n|^2 < 2 |J|`` beyond tolerance.

    ``J`` is the Jacobian of ``n`` restricted to the sphere about the nearest
    vertex through the sample point (the pull-back of the area form), from
    forward differences along two orthonormal tangent directions.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    V = field.domain.vertices
    near = V[np.argmin(np.linalg.norm(X[:, None, :] - V[None], axis=2), axis=1)]
    r = X - near
    rn = np.linalg.norm(r, axis=1, keepdims=True)
    if np.any(rn < 10 * fd):
        raise InvalidInputError("sample points too close to a vertex")
    e = r / rn
    helper = np.where(np.abs(e[:, [0]]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
    t1 = np.cross(e, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(e, t1)
    g = _grad_sq(field, X, fd)
    h = 2 * fd
    n0 = field(X)
    d1 = (field(X + h * t1) - n0) / h
    d2 = (field(X + h * t2) - n0) / h
    J = np.einsum("ij,ij->i", n0, np.cross(d1, d2))
    bad = 2 * np.abs(J) > g * (1 + rel_tol) + abs_tol
    return [PointwiseViolation(tuple(X[i]), float(g[i]), float(J[i])) for i in np.flatnonzero(bad)]
