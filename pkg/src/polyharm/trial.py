"""Closed-form tangent director fields on rectangular prisms.

Two constructions are available.

``reflection``
    Mirror-symmetric field ``n(r) = nu(d / |d|)`` where ``d`` holds the
    distances from ``r`` to the nearest face in each axis and ``nu`` is a
    corner map on the positive octant. Within each of the eight sub-boxes
    the field is constant along rays from that sub-box's vertex.

``cone``
    The general recipe: radially constant cones of radius ``r_a`` around
    every vertex, a tangent field on the truncated faces obtained by
    harmonic extension, and constant values along rays from a centre point
    ``p``, tilted toward the face normal away from the face boundaries.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .conformal import CapBlendSpec, ConformalMapSpec, corner_values, f1
from .errors import ClassConsistencyError, EvaluationError, InvalidInputError
from .geometry.polyhedron import Polyhedron, build_prism

CornerSpec = Union[ConformalMapSpec, CapBlendSpec]


@dataclass
class DirectorField:
    """Unit-vector field on a polyhedron given by a vectorised evaluator."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    domain: Polyhedron
    kind: str = "analytic"
    class_id: Optional[str] = None
    # reflection-symmetric fields can be integrated over one sub-box
    octant_symmetric: bool = False
    seam_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    meta: dict = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.asarray(self.evaluator(pts), dtype=float)
        bad = ~np.all(np.isfinite(out), axis=-1)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise EvaluationError("field is not finite", location=pts[tuple(idx)].tolist())
        return out

    @property
    def dims(self) -> tuple:
        if self.domain.dims is None:
            raise InvalidInputError("field domain is not a prism")
        return self.domain.dims

    def to_csv(self, points) -> str:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        vals = self(pts)
        buf = io.StringIO()
        buf.write("x,y,z,nx,ny,nz\n")
        np.savetxt(buf, np.hstack([pts, vals]), delimiter=",", fmt="%.17g")
        return buf.getvalue()

    def rotated(self, R) -> "DirectorField":
        """Same field with a rotation applied to the target sphere."""
        R = np.asarray(R, dtype=float)
        return DirectorField(lambda x: self.evaluator(x) @ R.T, self.domain, self.kind,
                             self.class_id, self.octant_symmetric, self.seam_distance, dict(self.meta))


def constant_field(P: Polyhedron, value=(0.0, 0.0, 1.0)) -> DirectorField:
    v = np.asarray(value, dtype=float)
    v = v / np.linalg.norm(v)
    return DirectorField(lambda x: np.broadcast_to(v, np.shape(x)).copy(), P, "constant",
                         octant_symmetric=True)


# --------------------------------------------------------------------------- corner maps

def corner_map(spec: CornerSpec, n: int = 32):
    """The corner map ``inverse_stereo o f o stereo`` sampled on the positive octant.

    Returns a :class:`~polyharm.topology.SurfaceMapSample` on a geodesic
    triangulation of the octant, oriented like a cleaved surface at the
    origin vertex. Raises when a node lands on a pole of ``f``.
    """
    from .topology import SurfaceMapSample, geodesic_triangle_mesh

    nodes, tris = geodesic_triangle_mesh(np.eye(3)[0], np.eye(3)[1], np.eye(3)[2], n)
    vals = corner_values(spec, nodes)
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("corner map has a pole on the octant")
    return SurfaceMapSample(nodes, tris, vals, orientation=-1)


def _check_prism(P: Polyhedron) -> np.ndarray:
    if not P.is_prism:
        raise InvalidInputError("trial fields are built on rectangular prisms only")
    return np.array(P.dims)


def reflection_field(P: Polyhedron, spec: CornerSpec, class_id: Optional[str] = None) -> DirectorField:
    L = _check_prism(P)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        d = np.minimum(x, L - x)
        d = np.clip(d, 0.0, None)
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        # at a vertex itself use the cone value along the diagonal
        e = np.where(r > 0, d / np.where(r > 0, r, 1.0), 1 / np.sqrt(3.0))
        return corner_values(spec, e)

    def seams(x):
        x = np.asarray(x, dtype=float)
        return np.min(np.abs(x - L / 2), axis=-1)

    return DirectorField(evaluate, P, "conformal-trial", class_id, True, seams,
                         {"construction": "reflection", "spec": spec})


# --------------------------------------------------------------------------- cone construction

def _vertex_reflection(a: int) -> np.ndarray:
    """Signs mapping vertex ``a``'s inward directions onto the positive octant."""
    bits = np.array([(a >> 2) & 1, (a >> 1) & 1, a & 1])
    return np.where(bits == 1, -1.0, 1.0)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def edge_orientation(spec: CornerSpec, axis: int) -> int:
    """Sign of the value a corner map takes along the edge in direction ``axis``."""
    e = np.zeros(3)
    e[axis] = 1.0
    v = corner_values(spec, e)
    return int(np.sign(v[axis])) if abs(v[axis]) > 0.5 else 0


class _FaceField:
    """Tangent unit field on one face: harmonic extension of its boundary data."""

    def __init__(self, P: Polyhedron, axis: int, side: int, corner_fns, radii, h: float):
        L = np.array(P.dims)
        self.axis, self.side = axis, side
        self.plane = [i for i in range(3) if i != axis]
        i, j = self.plane
        self.Li, self.Lj = L[i], L[j]
        ni = max(int(np.ceil(self.Li / h)), 4)
        nj = max(int(np.ceil(self.Lj / h)), 4)
        self.hi, self.hj = self.Li / ni, self.Lj / nj
        gi = np.linspace(0, self.Li, ni + 1)
        gj = np.linspace(0, self.Lj, nj + 1)
        I, J = np.meshgrid(gi, gj, indexing="ij")
        pts = np.zeros(I.shape + (3,))
        pts[..., i] = I
        pts[..., j] = J
        pts[..., axis] = side * L[axis]

        fixed = np.zeros(I.shape, bool)
        val = np.zeros(I.shape + (3,))
        # edges of the face: values along the edge direction with the corner's sign
        self.corners = [a for a in range(8) if ((a >> (2 - axis)) & 1) == side]
        for a in self.corners:
            va = np.array([(a >> 2) & 1, (a >> 1) & 1, a & 1], float) * L
            r = np.linalg.norm(pts - va, axis=-1)
            inside = r <= radii[a]
            fixed |= inside
            if np.any(inside):
                val[inside] = corner_fns[a](pts[inside] - va)
        for k, (ax, n_ax) in enumerate(((i, ni), (j, nj))):
            other = j if ax == i else i
            for s in (0, 1):
                sl = [slice(None), slice(None)]
                sl[1 - k] = 0 if s == 0 else -1
                sl = tuple(sl)
                # the edge runs along `ax`; it is an edge of the axis `other`... value parallel to ax
                edge_pts = pts[sl]
                # orientation from the corner at the start of this edge
                a0 = self._corner_index(axis, side, other, s, ax, L)
                sgn = corner_fns[a0].edge_sign(ax)
                vec = np.zeros(3)
                vec[ax] = sgn
                keep = ~fixed[sl]
                sub = val[sl]
                sub[keep] = vec
                val[sl] = sub
                fixed[sl] = True
        self.L = L
        self.corner_fns, self.radii = corner_fns, radii
        self.vertex = {a: np.array([(a >> 2) & 1, (a >> 1) & 1, a & 1], float) * L for a in self.corners}
        self._solve(fixed, val, ni, nj)

    @staticmethod
    def _corner_index(axis, side, other, s, ax, L):
        bits = [0, 0, 0]
        bits[axis] = side
        bits[other] = s
        bits[ax] = 0
        return 4 * bits[0] + 2 * bits[1] + bits[2]

    def _solve(self, fixed, val, ni, nj):
        i, j = self.plane
        shape = fixed.shape
        n = fixed.size
        idx = np.arange(n).reshape(shape)
        free = ~fixed
        fid = -np.ones(n, dtype=int)
        fid[free.ravel()] = np.arange(free.sum())
        rows, cols, data = [], [], []
        rhs = np.zeros((free.sum(), 2))
        wi, wj = 1.0 / self.hi ** 2, 1.0 / self.hj ** 2
        comp = val[..., [i, j]]
        fi, fj = np.nonzero(free)
        for di, dj, w in ((1, 0, wi), (-1, 0, wi), (0, 1, wj), (0, -1, wj)):
            ni_, nj_ = fi + di, fj + dj
            me = fid[idx[fi, fj]]
            rows.append(me)
            cols.append(me)
            data.append(np.full(len(me), w))
            nb_free = free[ni_, nj_]
            nb = idx[ni_, nj_]
            rows.append(me[nb_free])
            cols.append(fid[nb[nb_free]])
            data.append(np.full(nb_free.sum(), -w))
            rhs[~nb_free] += w * comp[ni_[~nb_free], nj_[~nb_free]]
        if free.sum():
            A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(free.sum(), free.sum()))
            sol = spla.splu(A.tocsc()).solve(rhs)
            comp = comp.copy()
            comp[fi, fj] = sol
        norm = np.linalg.norm(comp, axis=-1)
        if norm.min() < 1e-3:
            raise ClassConsistencyError(
                f"boundary data on face (axis {self.axis}, side {self.side}) winds around; "
                "no tangent extension")
        self.grid = comp / norm[..., None]

    def __call__(self, q):
        """Bilinear interpolation of the face field at points ``q`` on the face."""
        i, j = self.plane
        u = np.clip(q[:, i] / self.hi, 0, self.grid.shape[0] - 1 - 1e-9)
        v = np.clip(q[:, j] / self.hj, 0, self.grid.shape[1] - 1 - 1e-9)
        i0, j0 = np.floor(u).astype(int), np.floor(v).astype(int)
        fu, fv = (u - i0)[:, None], (v - j0)[:, None]
        g = self.grid
        c = (g[i0, j0] * (1 - fu) * (1 - fv) + g[i0 + 1, j0] * fu * (1 - fv)
             + g[i0, j0 + 1] * (1 - fu) * fv + g[i0 + 1, j0 + 1] * fu * fv)
        c /= np.linalg.norm(c, axis=-1, keepdims=True)
        out = np.zeros((len(q), 3))
        out[:, i] = c[:, 0]
        out[:, j] = c[:, 1]
        # next to the cone disks the grid under-resolves the corner data:
        # blend toward the exact values over a band of a few grid cells
        band = 3 * max(self.hi, self.hj)
        for a in self.corners:
            rel = q - self.vertex[a]
            beta = _smoothstep((np.linalg.norm(rel, axis=1) - self.radii[a]) / band)
            sel = beta < 1
            if np.any(sel):
                exact = self.corner_fns[a](rel[sel])
                mix = (1 - beta[sel, None]) * exact + beta[sel, None] * out[sel]
                out[sel] = mix / np.linalg.norm(mix, axis=1, keepdims=True)
        return out


class _Corner:
    def __init__(self, a: int, spec: CornerSpec):
        self.a = a
        self.spec = spec
        self.R = _vertex_reflection(a)

    def __call__(self, rel):
        """Field value for displacement ``rel`` from the vertex (any length)."""
        r = np.linalg.norm(rel, axis=-1, keepdims=True)
        e = np.where(r > 0, rel / np.where(r > 0, r, 1.0), self.R / np.sqrt(3.0))
        return corner_values(self.spec, e * self.R)

    def edge_sign(self, axis: int) -> int:
        return edge_orientation(self.spec, axis)


def cone_field(P: Polyhedron, corner_specs: Sequence[CornerSpec], p=None, radii=None,
               face_h: Optional[float] = None, class_id: Optional[str] = None) -> DirectorField:
    L = _check_prism(P)
    if len(corner_specs) != 8:
        raise InvalidInputError("need one corner map per vertex (8)")
    V = P.vertices
    short = min(L)
    if radii is None:
        radii = np.full(8, short / 4)
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (8,) or np.any(radii <= 0) or np.any(radii >= short / 2):
        raise InvalidInputError("cone radii must lie strictly between 0 and half the shortest edge")
    delta = radii.min() / 4
    p = L / 2 if p is None else np.asarray(p, dtype=float)
    if np.any(p < 2 * delta) or np.any(p > L - 2 * delta):
        raise InvalidInputError("centre point too close to the boundary")
    if np.any(np.linalg.norm(V - p, axis=1) < radii + 2 * delta):
        raise InvalidInputError("centre point too close to a vertex cone")

    corners = [_Corner(a, s) for a, s in enumerate(corner_specs)]
    # edge consistency: both ends of every edge must agree on its orientation
    for a, b in P.edges:
        axis = int(np.flatnonzero(V[a] != V[b])[0])
        sa, sb = corners[a].edge_sign(axis), corners[b].edge_sign(axis)
        if sa == 0 or sa != sb:
            raise ClassConsistencyError(f"corner maps at vertices {a} and {b} disagree on edge orientation")

    h = face_h or radii.min() / 8
    faces = {}
    for axis in range(3):
        for side in (0, 1):
            faces[axis, side] = _FaceField(P, axis, side, corners, radii, h)
    width = radii.min()

    def boundary_distance(q, axis, side):
        i, j = [k for k in range(3) if k != axis]
        d = np.minimum.reduce([q[:, i], L[i] - q[:, i], q[:, j], L[j] - q[:, j]])
        for a in faces[axis, side].corners:
            d = np.minimum(d, np.linalg.norm(q - V[a], axis=1) - radii[a])
        return d

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        X = x.reshape(-1, 3)
        out = np.zeros_like(X)
        done = np.zeros(len(X), bool)
        for a in range(8):
            rel = X - V[a]
            inside = (np.linalg.norm(rel, axis=1) < radii[a]) & ~done
            if np.any(inside):
                out[inside] = corners[a](rel[inside])
                done |= inside
        rest = np.flatnonzero(~done)
        if len(rest):
            out[rest] = _ray_values(X[rest])
        return out.reshape(shape)

    def _ray_values(X):
        d = X - p
        dist = np.linalg.norm(d, axis=1)
        at_p = dist < 1e-300
        d[at_p] = [0.0, 0.0, 1.0]
        dist[at_p] = 0.0
        t_exit = np.full(len(X), np.inf)
        hit_face = np.full(len(X), -1)
        for axis in range(3):
            for side in (0, 1):
                n = np.zeros(3)
                n[axis] = 1.0 if side else -1.0
                c = side * L[axis] * n[axis]
                nd = d @ n
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = np.where(nd > 0, (c - p @ n) / nd, np.inf)
                better = t < t_exit
                t_exit = np.where(better, t, t_exit)
                hit_face = np.where(better, 2 * axis + side, hit_face)
        hit_ball = np.full(len(X), -1)
        dd = np.einsum("ij,ij->i", d, d)
        for a in range(8):
            pv = p - V[a]
            b = d @ pv
            c = pv @ pv - radii[a] ** 2
            disc = b * b - dd * c
            ok = disc >= 0
            with np.errstate(invalid="ignore", divide="ignore"):
                t1 = np.where(ok, (-b - np.sqrt(np.where(ok, disc, 0))) / dd, np.inf)
            # only hits beyond the point itself count (the point lies outside the ball)
            t1 = np.where(t1 >= 1 - 1e-12, t1, np.inf)
            better = t1 < t_exit
            t_exit = np.where(better, t1, t_exit)
            hit_ball = np.where(better, a, hit_ball)
        q = p + t_exit[:, None] * d
        out = np.zeros_like(X)
        for a in range(8):
            sel = hit_ball == a
            if np.any(sel):
                out[sel] = corners[a](q[sel] - V[a])
        face_sel = hit_ball < 0
        if np.any(face_sel):
            idx = np.flatnonzero(face_sel)
            seg = np.linalg.norm(q[idx] - p, axis=1)
            rho = np.where(seg > 0, dist[idx] / seg, 1.0)
            rho = np.maximum(rho, np.where(seg > 0, delta / seg, 1.0))
            for code in np.unique(hit_face[idx]):
                axis, side = divmod(int(code), 2)
                sub = idx[hit_face[idx] == code]
                r_sub = rho[hit_face[idx] == code]
                qq = q[sub].copy()
                qq[:, axis] = side * L[axis]
                m = faces[axis, side](qq)
                lam = _smoothstep(boundary_distance(qq, axis, side) / width)
                theta = lam * (np.pi / 2) * (1 - _smoothstep(r_sub))
                nrm = np.zeros(3)
                nrm[axis] = 1.0 if side else -1.0
                out[sub] = np.cos(theta)[:, None] * m + np.sin(theta)[:, None] * nrm
        return out

    return DirectorField(evaluate, P, "conformal-trial", class_id, False, None,
                         {"construction": "cone", "specs": list(corner_specs), "p": p,
                          "radii": radii, "delta": delta})


def build_trial_field(P: Polyhedron, corner_specs: Union[CornerSpec, Sequence[CornerSpec]],
                      p=None, radii=None, method: Optional[str] = None,
                      class_id: Optional[str] = None) -> DirectorField:
    """Trial field on prism ``P`` with the given corner maps.

    A single corner map with no ``p``/``radii`` gives the mirror-symmetric
    ``reflection`` construction; otherwise (or with ``method="cone"``) the
    cone/ray construction is used, where per-vertex maps are interpreted in
    each vertex's own octant.
    """
    _check_prism(P)
    single = isinstance(corner_specs, (ConformalMapSpec, CapBlendSpec))
    if method is None:
        method = "reflection" if single and p is None and radii is None else "cone"
    if method == "reflection":
        if not single:
            specs = list(corner_specs)
            if any(s != specs[0] for s in specs):
                raise InvalidInputError("the reflection construction needs one common corner map")
            corner_specs = specs[0]
        if radii is not None:
            L = np.array(P.dims)
            if np.any(np.asarray(radii) >= min(L) / 2):
                raise InvalidInputError("cone radii must be below half the shortest edge")
        return reflection_field(P, corner_specs, class_id)
    if method == "cone":
        specs = [corner_specs] * 8 if single else list(corner_specs)
        return cone_field(P, specs, p, radii, class_id=class_id)
    raise InvalidInputError(f"unknown construction {method!r}")


def family_scan(P: Polyhedron, s_values, method: str = "exact", n_cells: int = 16):
    """Energies of the mirror-symmetric ``f1(s)`` trial fields.

    Returns ``(s, E, eps)`` triples with ``eps = E / (Lx Ly Lz)**(1/3)``.
    ``method="exact"`` integrates the face-integral form of the energy;
    ``"quadrature"`` integrates the 3D field numerically.
    """
    from .energy import energy_quadrature, reflection_energy

    L = _check_prism(P)
    vol = float(np.prod(L)) ** (1 / 3)
    s_values = [float(s) for s in s_values]
    for s in s_values:
        if not 0 < s < 1:
            raise InvalidInputError(f"s must lie in (0, 1), got {s}")
    out = []
    for s in s_values:
        spec = f1(s)
        if method == "exact":
            E = reflection_energy(tuple(L), spec)
        else:
            E = energy_quadrature(build_trial_field(P, spec), n_cells).extrapolated
        out.append((s, E, E / vol))
    return out


def prism(Lx, Ly, Lz) -> Polyhedron:
    return build_prism(Lx, Ly, Lz)


# --------------------------------------------------------------------------- class extraction

def vertex_sample(evaluator, dims, a: int, radius: float, n: int):
    """Cleaved surface at vertex ``a``: the spherical octant of given radius.

    Values are ``evaluator`` at the mesh nodes. The orientation makes the
    surface normal point toward the vertex.
    """
    from .topology import SurfaceMapSample, geodesic_triangle_mesh

    L = np.asarray(dims, dtype=float)
    signs = _vertex_reflection(a)
    corner = np.where(signs > 0, 0.0, L)
    unit, tris = geodesic_triangle_mesh(np.eye(3)[0], np.eye(3)[1], np.eye(3)[2], n)
    nodes = corner + radius * unit * signs
    vals = np.asarray(evaluator(nodes), dtype=float)
    vals = vals / np.linalg.norm(vals, axis=1, keepdims=True)
    return SurfaceMapSample(nodes, tris, vals, orientation=-int(np.prod(signs)))


def vertex_wrapping(evaluator, dims, a: int, part=None, radius: Optional[float] = None,
                    n: int = 16, max_n: int = 256):
    """Wrapping numbers at vertex ``a``, refining the surface mesh until resolved."""
    from .errors import ResolutionError
    from .geometry.partition import tangent_partition
    from .topology import wrapping_from_surface

    L = np.asarray(dims, dtype=float)
    if part is None:
        part = tangent_partition(build_prism(*L))
    radius = min(L) / 4 if radius is None else radius
    while True:
        try:
            return wrapping_from_surface(vertex_sample(evaluator, L, a, radius, n), part)
        except ResolutionError:
            if 2 * n > max_n:
                raise
            n *= 2


def field_class(field: DirectorField, radius: Optional[float] = None, n: int = 16,
                max_n: int = 256):
    """Homotopy class (wrapping matrix) of a field on a prism."""
    from .geometry.partition import tangent_partition
    from .topology import HomotopyClass

    part = tangent_partition(field.domain)
    if radius is None and "radii" in field.meta:
        # stay inside the cones, where the field is exactly the corner map
        radius = float(np.min(field.meta["radii"])) / 2
    rows = [vertex_wrapping(field, field.dims, a, part, radius, n, max_n).values for a in range(8)]
    return HomotopyClass(np.array(rows, dtype=int))
