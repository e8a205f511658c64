"""Projected gradient descent for the Dirichlet energy on a prism grid.

Nodes sit at ``(i hx, j hy, k hz)``. The discrete energy is a sum over
nearest-neighbour bonds, ``sum w_b |n_j - n_i|^2``, with trapezoid weights
so that boundary bonds count for their share of the dual cell. The eight
prism corners are excluded: they carry no bonds and are never updated.

A grid may be *octant-symmetric*: it then stores only ``[0, L/2]^3`` and
the mid-planes act as mirrors, which is exact for fields that are
unchanged under the three mid-plane reflections (and stays so under the
flow). Energies are always reported for the whole prism.
"""
from __future__ import annotations

import io
import json
import logging
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import (ClassAmbiguousError, EvaluationError, InvalidInputError,
                     NumericalFailure, ResolutionError)
from .geometry.partition import SectorPartition, tangent_partition
from .geometry.polyhedron import build_prism
from .topology import HomotopyClass, max_image_edge, sector_image_areas
from .trial import DirectorField, vertex_sample

log = logging.getLogger(__name__)

# node kinds in the BC mask
INTERIOR = 0
FACE = (1, 2, 3)        # face with normal along x, y, z
EDGE = (4, 5, 6)        # edge along x, y, z
VERTEX = 7

MAGIC = b"PHGRID1\n"


def _trap(n_cells: int) -> np.ndarray:
    w = np.ones(n_cells + 1)
    w[0] = w[-1] = 0.5
    return w


def axis_counts(dims, N: int) -> np.ndarray:
    """Cells per axis for ``N`` cells along the shortest edge."""
    L = np.asarray(dims, dtype=float)
    if N < 1:
        raise InvalidInputError("grid resolution must be positive")
    return np.maximum(np.rint(L / (L.min() / N)).astype(int), 1)


def _slices(ax):
    a = [slice(None)] * 3
    b = [slice(None)] * 3
    a[ax] = slice(0, -1)
    b[ax] = slice(1, None)
    return tuple(a), tuple(b)


@dataclass
class GridField:
    """Unit vectors on the nodes of a prism grid.

    ``values`` has shape ``(nx+1, ny+1, nz+1, 3)`` covering the solved
    region (the whole prism, or ``[0, L/2]^3`` when ``symmetric``).
    ``mask`` holds the node kinds; ``free_boundary=True`` makes every
    non-corner node interior (no boundary conditions).
    """

    dims: tuple
    N: int
    values: np.ndarray
    symmetric: bool = False
    free_boundary: bool = False
    iteration: int = 0
    mask: np.ndarray = field(init=False, repr=False)
    _weights: list = field(init=False, repr=False)
    _mass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(float(x) for x in self.dims)
        L = np.array(self.dims)
        if np.any(~np.isfinite(L)) or np.any(L <= 0):
            raise InvalidInputError("prism dimensions must be positive")
        counts = axis_counts(L, self.N)
        if self.symmetric:
            if np.any(counts % 2):
                raise InvalidInputError("octant-symmetric grids need an even number of cells per axis")
            counts = counts // 2
        self.cells = counts
        self.extent = L / 2 if self.symmetric else L
        self.spacing = self.extent / counts
        shape = tuple(int(c) + 1 for c in counts)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != shape + (3,):
            raise InvalidInputError(f"values must have shape {shape + (3,)}, got {self.values.shape}")
        self.mask = self._build_mask(shape)
        self._weights, self._mass = self._build_weights(shape)

    # ------------------------------------------------------------------ structure
    @property
    def shape(self) -> tuple:
        return self.values.shape[:3]

    @property
    def h(self) -> float:
        return float(self.spacing.min())

    def _build_mask(self, shape):
        on = []
        for ax in range(3):
            m = np.zeros(shape, bool)
            sl = [slice(None)] * 3
            sl[ax] = 0
            m[tuple(sl)] = True
            if not self.symmetric:
                sl[ax] = -1
                m[tuple(sl)] = True
            on.append(m)
        count = on[0].astype(int) + on[1] + on[2]
        mask = np.full(shape, INTERIOR, dtype=np.int8)
        if not self.free_boundary:
            for ax in range(3):
                mask[on[ax] & (count == 1)] = FACE[ax]
                others = [o for o in range(3) if o != ax]
                mask[on[others[0]] & on[others[1]] & ~on[ax]] = EDGE[ax]
        mask[count == 3] = VERTEX
        return mask

    def _build_weights(self, shape):
        tw = [_trap(s - 1) for s in shape]
        h = self.spacing
        corner = self.mask == VERTEX
        W = []
        for ax in range(3):
            i, j = [o for o in range(3) if o != ax]
            wshape = [1, 1, 1]
            w = np.full([s - 1 if a == ax else s for a, s in enumerate(shape)], h[i] * h[j] / h[ax])
            wshape[i] = -1
            w = w * tw[i].reshape(wshape)
            wshape = [1, 1, 1]
            wshape[j] = -1
            w = w * tw[j].reshape(wshape)
            a, b = _slices(ax)
            w = w * ~corner[a] * ~corner[b]
            W.append(w)
        m = tw[0][:, None, None] * tw[1][None, :, None] * tw[2][None, None, :] * np.prod(h)
        return W, m

    @property
    def copies(self) -> int:
        return 8 if self.symmetric else 1

    def coordinates(self) -> np.ndarray:
        axes = [np.arange(s) * hh for s, hh in zip(self.shape, self.spacing)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1)

    # ------------------------------------------------------------------ energy
    def energy_and_gradient(self, n: Optional[np.ndarray] = None):
        """Energy (whole prism) and ``G = sum_b w_b (n_j - n_i)`` at each node.

        ``G`` equals minus half the energy gradient of the solved region;
        ``G / mass`` approximates the Laplacian.
        """
        n = self.values if n is None else n
        E = 0.0
        G = np.zeros_like(n)
        for ax in range(3):
            a, b = _slices(ax)
            D = n[b] - n[a]
            WD = self._weights[ax][..., None] * D
            E += float(np.sum(WD * D))
            G[a] += WD
            G[b] -= WD
        return self.copies * E, G

    def energy(self) -> float:
        return self.energy_and_gradient()[0]

    def laplacian(self, n: Optional[np.ndarray] = None) -> np.ndarray:
        _, G = self.energy_and_gradient(n)
        return G / self._mass[..., None]

    def euler_lagrange_residual(self) -> float:
        """Max over updated nodes of the tangential Laplacian, times ``h^2``.

        On face nodes only the part tangent to both the sphere and the face
        counts; edge and corner nodes are constrained and skipped.
        """
        n = self.values
        lap = self.laplacian()
        P = lap - np.sum(lap * n, -1, keepdims=True) * n
        for ax in range(3):
            sel = self.mask == FACE[ax]
            # remove the component along the sphere tangent that leaves the face
            t = np.zeros(3)
            t[ax] = 1.0
            tn = t - n[sel] * n[sel][:, [ax]]
            tn_norm2 = np.sum(tn * tn, -1, keepdims=True)
            coef = np.sum(P[sel] * tn, -1, keepdims=True) / np.where(tn_norm2 > 0, tn_norm2, 1)
            P[sel] = P[sel] - coef * tn
        free = (self.mask == INTERIOR) | np.isin(self.mask, FACE)
        if not np.any(free):
            return 0.0
        return float(np.max(np.linalg.norm(P[free], axis=-1))) * self.h ** 2

    def max_bond_jump(self, exclude_radius: Optional[float] = None) -> float:
        """Largest ``|n_j - n_i|`` over bonds away from the vertices."""
        X = self.coordinates()
        if exclude_radius is None:
            exclude_radius = min(self.dims) / 4
        corners = np.array([[(a >> 2) & 1, (a >> 1) & 1, a & 1] for a in range(8)], float) * np.array(self.dims)
        d = np.min(np.linalg.norm(X[..., None, :] - corners, axis=-1), axis=-1)
        far = d > exclude_radius
        best = 0.0
        for ax in range(3):
            a, b = _slices(ax)
            D = np.linalg.norm(self.values[b] - self.values[a], axis=-1)
            keep = far[a] & far[b]
            if np.any(keep):
                best = max(best, float(D[keep].max()))
        return best

    # ------------------------------------------------------------------ sampling
    def full_values(self) -> np.ndarray:
        """Values on the whole prism grid (unfolds a symmetric grid)."""
        if not self.symmetric:
            return self.values.copy()
        v = self.values
        for ax in range(3):
            mirrored = np.flip(v, axis=ax)
            sl = [slice(None)] * 3
            sl[ax] = slice(1, None)
            v = np.concatenate([v, mirrored[tuple(sl)]], axis=ax)
        return v

    def interpolate(self, points) -> np.ndarray:
        """Trilinear interpolation, renormalised to unit length."""
        X = np.asarray(points, dtype=float)
        shp = X.shape
        X = X.reshape(-1, 3)
        L = np.array(self.dims)
        if self.symmetric:
            X = np.minimum(X, L - X)
        u = np.clip(X / self.spacing, 0, np.array(self.shape) - 1)
        i0 = np.minimum(np.floor(u).astype(int), np.array(self.shape) - 2)
        i0 = np.maximum(i0, 0)
        f = u - i0
        out = np.zeros((len(X), 3))
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    w = ((f[:, 0] if di else 1 - f[:, 0]) * (f[:, 1] if dj else 1 - f[:, 1])
                         * (f[:, 2] if dk else 1 - f[:, 2]))
                    out += w[:, None] * self.values[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
        nrm = np.linalg.norm(out, axis=1, keepdims=True)
        if np.any(nrm < 1e-12):
            raise EvaluationError("interpolated field vanishes", location=X[np.argmin(nrm)].tolist())
        return (out / nrm).reshape(shp)

    def to_director_field(self) -> DirectorField:
        return DirectorField(self.interpolate, build_prism(*self.dims), "grid",
                             octant_symmetric=self.symmetric, meta={"N": self.N})

    def copy(self) -> "GridField":
        return GridField(self.dims, self.N, self.values.copy(), self.symmetric,
                         self.free_boundary, self.iteration)


# --------------------------------------------------------------------------- construction

def init_from_field(f: DirectorField, N: int, symmetric: Optional[bool] = None,
                    free_boundary: bool = False) -> GridField:
    """Sample an analytic field at the grid nodes and impose the boundary conditions.

    ``symmetric=None`` uses an octant-symmetric grid when the field is
    mirror-symmetric and the cell counts allow it.
    """
    dims = f.dims
    if symmetric is None:
        symmetric = bool(f.octant_symmetric) and not np.any(axis_counts(dims, N) % 2)
    if symmetric and not f.octant_symmetric:
        raise InvalidInputError("octant-symmetric grid requested for a field without mirror symmetry")
    counts = axis_counts(dims, N) // (2 if symmetric else 1)
    shape = tuple(int(c) + 1 for c in counts)
    g = GridField(dims, N, np.zeros(shape + (3,)), symmetric, free_boundary)
    X = g.coordinates()
    try:
        vals = f(X.reshape(-1, 3)).reshape(shape + (3,))
    except EvaluationError as exc:
        raise EvaluationError(f"field evaluation failed on the grid: {exc}",
                              location=getattr(exc, "location", None)) from exc
    bad = ~np.all(np.isfinite(vals), axis=-1) | (np.linalg.norm(vals, axis=-1) == 0)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise EvaluationError(f"field not evaluable at node {idx}", location=list(idx))
    g.values = vals / np.linalg.norm(vals, axis=-1, keepdims=True)
    return enforce_bc(g)


def constant_grid(dims, N: int, value=(0.0, 0.0, 1.0), free_boundary: bool = True,
                  symmetric: bool = False) -> GridField:
    counts = axis_counts(dims, N) // (2 if symmetric else 1)
    shape = tuple(int(c) + 1 for c in counts)
    v = np.asarray(value, dtype=float)
    v = v / np.linalg.norm(v)
    g = GridField(dims, N, np.broadcast_to(v, shape + (3,)).copy(), symmetric, free_boundary)
    return enforce_bc(g)


def _first_tangent(ax: int) -> np.ndarray:
    t = np.zeros(3)
    t[0 if ax != 0 else 1] = 1.0
    return t


def enforce_bc(g: GridField, raw: Optional[np.ndarray] = None, freeze: Optional[np.ndarray] = None) -> GridField:
    """Project face nodes onto their face, snap edge nodes to the edge, renormalise.

    Edge nodes take the sign of ``raw . t`` (``raw`` defaults to the current
    values, so the sign is preserved); a zero component picks ``+t``, and
    when ``freeze`` holds previous values their signs are kept instead.
    A face node exactly along the normal is replaced by the mean of its
    in-face neighbours, or by the first tangent basis vector if that vanishes.
    """
    n = g.values
    raw = n if raw is None else raw
    mask = g.mask
    out = n.copy()
    for ax in range(3):
        sel = mask == FACE[ax]
        if not np.any(sel):
            continue
        v = out[sel]
        v[:, ax] = 0.0
        nrm = np.linalg.norm(v, axis=1)
        degenerate = nrm < 1e-14
        if np.any(degenerate):
            idx = np.argwhere(sel)[degenerate]
            for pos, node in zip(np.flatnonzero(degenerate), idx):
                v_new = np.zeros(3)
                for o in range(3):
                    if o == ax:
                        continue
                    for step in (-1, 1):
                        nb = node.copy()
                        nb[o] += step
                        if 0 <= nb[o] < g.shape[o]:
                            val = n[tuple(nb)].copy()
                            val[ax] = 0.0
                            v_new += val
                if np.linalg.norm(v_new) < 1e-14:
                    v_new = _first_tangent(ax)
                v[pos] = v_new
            nrm = np.linalg.norm(v, axis=1)
        out[sel] = v / nrm[:, None]
    for ax in range(3):
        sel = mask == EDGE[ax]
        if not np.any(sel):
            continue
        src = freeze if freeze is not None else raw
        s = np.sign(src[sel][:, ax])
        s[s == 0] = 1.0
        v = np.zeros((int(sel.sum()), 3))
        v[:, ax] = s
        out[sel] = v
    free = mask != VERTEX
    out[free] /= np.linalg.norm(out[free], axis=-1, keepdims=True)
    g.values = out
    return g


# --------------------------------------------------------------------------- descent

@dataclass
class DescentParams:
    step: float = 0.9              # fraction of the explicit stability limit
    max_iter: int = 200_000
    tol: float = 1e-9              # relative energy decrease over `window` accepted steps
    window: int = 100
    snapshot_every: int = 1000     # invariant spot-checks and progress logging
    seed: int = 0
    freeze_edges: bool = False
    time_limit: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.step <= 1:
            raise InvalidInputError("step must lie in (0, 1]")
        if not self.tol > 0:
            raise InvalidInputError("tolerance must be positive")
        if self.max_iter < 0 or self.window < 1:
            raise InvalidInputError("bad iteration limits")


@dataclass
class DescentTrace:
    energies: list
    iterations: list
    converged: bool
    tau: float
    halvings: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iter,E\n")
        for it, E in zip(self.iterations, self.energies):
            buf.write(f"{it},{E:.17g}\n")
        return buf.getvalue()

    @property
    def final(self) -> float:
        return self.energies[-1]


def check_invariants(g: GridField, tol_norm: float = 1e-12, tol_face: float = 1e-10) -> None:
    n = g.values
    free = g.mask != VERTEX
    if np.any(np.abs(np.linalg.norm(n[free], axis=-1) - 1) > tol_norm):
        raise NumericalFailure("unit-norm invariant violated", iteration=g.iteration)
    for ax in range(3):
        if np.any(np.abs(n[g.mask == FACE[ax]][:, ax]) > tol_face):
            raise NumericalFailure("face tangency violated", iteration=g.iteration)
        e = n[g.mask == EDGE[ax]]
        if len(e) and np.any(np.abs(np.abs(e[:, ax]) - 1) > tol_face):
            raise NumericalFailure("edge alignment violated", iteration=g.iteration)


def _update(g: GridField, n, G, tau, freeze):
    lap = G / g._mass[..., None]
    P = lap - np.sum(lap * n, -1, keepdims=True) * n
    trial = n + tau * P
    corner = g.mask == VERTEX
    trial[corner] = n[corner]
    h = GridField.__new__(GridField)
    h.__dict__.update(g.__dict__)
    h.values = trial
    # edges follow the unprojected flow so their orientation can reverse
    enforce_bc(h, raw=n + tau * lap, freeze=freeze)
    return h.values


def descend(g: GridField, params: Optional[DescentParams] = None,
            callback: Optional[Callable[[GridField, float], None]] = None):
    """Harmonic-map gradient flow ``n <- normalize(n + tau P_n(Lap n))`` with step halving.

    Returns ``(grid, trace)``; the input grid is not modified.
    """
    params = params or DescentParams()
    g = g.copy()
    if params.seed:
        # optional deterministic jitter to break exact symmetries
        rng = np.random.default_rng(params.seed)
        free = g.mask != VERTEX
        g.values[free] += 1e-6 * rng.standard_normal(g.values[free].shape)
        g.values[free] /= np.linalg.norm(g.values[free], axis=-1, keepdims=True)
        enforce_bc(g)
    freeze = g.values.copy() if params.freeze_edges else None
    h = g.spacing
    tau = params.step / float(np.sum(2 / h ** 2))
    E, G = g.energy_and_gradient()
    if not np.isfinite(E):
        raise NumericalFailure("initial energy is not finite", iteration=0)
    energies, iters = [E], [g.iteration]
    converged = False
    halvings = 0
    t0 = time.time()
    it = 0
    n = g.values
    while it < params.max_iter:
        it += 1
        new = _update(g, n, G, tau, freeze)
        En, Gn = g.energy_and_gradient(new)
        if not np.isfinite(En):
            raise NumericalFailure("energy became NaN/inf", iteration=g.iteration + it)
        if En > E + 1e-12 * abs(E):
            tau *= 0.5
            halvings += 1
            if tau < 1e-12 * float(np.min(h)) ** 2:
                raise NumericalFailure("step size collapsed", iteration=g.iteration + it)
            continue
        n, E, G = new, En, Gn
        energies.append(E)
        iters.append(g.iteration + it)
        if params.snapshot_every and it % params.snapshot_every == 0:
            g.values = n
            check_invariants(g)
            log.info("iter %d  E=%.12g  tau/h^2=%.3g", g.iteration + it, E, tau / float(np.min(h)) ** 2)
            if callback:
                callback(g, E)
        w = params.window
        if len(energies) > w and energies[-w - 1] - energies[-1] < params.tol * abs(energies[-1]):
            converged = True
            break
        if params.time_limit and time.time() - t0 > params.time_limit:
            break
    g.values = n
    g.iteration += it
    check_invariants(g)
    return g, DescentTrace(energies, iters, converged, tau, halvings)


# --------------------------------------------------------------------------- classes

def _mesh_resolution(g: GridField, radius: float) -> int:
    # a few mesh points per grid cell along the octant arc
    return int(max(16, math.ceil(2 * (math.pi / 2) * radius / g.h)))


def extract_class(g: GridField, part: Optional[SectorPartition] = None,
                  radius: Optional[float] = None, max_n: int = 512):
    """Wrapping matrix of a grid field from spherical cleaved surfaces.

    Returns ``(HomotopyClass, residuals)`` where ``residuals[a, sigma]`` is the
    distance of the normalised image area from the nearest integer.
    """
    P = build_prism(*g.dims)
    part = part or tangent_partition(P)
    radius = min(g.dims) / 4 if radius is None else radius
    rows, res = [], []
    for a in range(8):
        n = _mesh_resolution(g, radius)
        while True:
            sample = vertex_sample(g.interpolate, g.dims, a, radius, n)
            if max_image_edge(sample) <= part.min_inradius / 4 or 2 * n > max_n:
                break
            n *= 2
        raw = sector_image_areas(sample, part) / part.areas
        vals = np.rint(raw).astype(int)
        rows.append(vals)
        res.append(np.abs(raw - vals))
    residuals = np.array(res)
    if residuals.max() > 0.1:
        raise ClassAmbiguousError("wrapping numbers are not close to integers", residuals=residuals)
    return HomotopyClass(np.array(rows)), residuals


# --------------------------------------------------------------------------- I/O

def save_checkpoint(g: GridField, path, energy: Optional[float] = None) -> None:
    """Header line (JSON) after a magic string, then little-endian float64 node vectors."""
    header = {"dims": list(g.dims), "N": g.N, "shape": list(g.shape),
              "spacing": [float(x) for x in g.spacing], "iteration": int(g.iteration),
              "energy": float(g.energy() if energy is None else energy),
              "symmetric": bool(g.symmetric), "free_boundary": bool(g.free_boundary)}
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(g.values, dtype="<f8").tobytes())


def load_checkpoint(path) -> GridField:
    data = Path(path).read_bytes()
    try:
        if not data.startswith(MAGIC):
            raise ValueError("bad magic")
        off = len(MAGIC)
        (hlen,) = struct.unpack_from("<Q", data, off)
        off += 8
        header = json.loads(data[off:off + hlen].decode())
        off += hlen
        shape = tuple(header["shape"]) + (3,)
        arr = np.frombuffer(data, dtype="<f8", offset=off)
        if arr.size != int(np.prod(shape)):
            raise ValueError("payload size does not match header")
        g = GridField(tuple(header["dims"]), int(header["N"]), arr.reshape(shape).astype(float),
                      bool(header["symmetric"]), bool(header.get("free_boundary", False)),
                      int(header["iteration"]))
    except (ValueError, KeyError, TypeError, struct.error, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"corrupted checkpoint {path}: {exc}") from exc
    if not np.all(np.isfinite(g.values)):
        raise InvalidInputError(f"corrupted checkpoint {path}: non-finite values")
    return g


def grid_to_csv(g: GridField) -> str:
    X = g.coordinates().reshape(-1, 3)
    V = g.values.reshape(-1, 3)
    buf = io.StringIO()
    buf.write("x,y,z,nx,ny,nz\n")
    np.savetxt(buf, np.hstack([X, V]), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def grid_from_csv(text: str, dims, N: int, symmetric: bool = False) -> GridField:
    try:
        arr = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        counts = axis_counts(dims, N) // (2 if symmetric else 1)
        shape = tuple(int(c) + 1 for c in counts)
        if arr.shape != (int(np.prod(shape)), 6):
            raise ValueError("row count does not match the grid")
        return GridField(dims, N, arr[:, 3:].reshape(shape + (3,)), symmetric)
    except ValueError as exc:
        raise InvalidInputError(f"bad grid CSV: {exc}") from exc
