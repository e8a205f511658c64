"""Minimal connections between point defects and the lower bounds they give.

The minimal connection of two equal-size point sets is the cheapest
perfect matching under Euclidean distance. Its dual is a 1-Lipschitz
potential ``xi`` on the points maximising ``sum(xi[pos]) - sum(xi[neg])``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InadmissibleError, InvalidInputError, NumericalFailure
from .geometry.partition import SectorPartition
from .geometry.polyhedron import Polyhedron
from .topology import HomotopyClass, validate_class

TIE_TOL = 1e-12


@dataclass(frozen=True)
class DefectConfiguration:
    points: np.ndarray
    degrees: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        degs = tuple(int(d) for d in self.degrees)
        if len(degs) != len(pts):
            raise InvalidInputError("need one degree per defect")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "degrees", degs)

    def expanded(self):
        """Positive and negative copies, degree +-k contributing k copies."""
        pos = [p for p, d in zip(self.points, self.degrees) for _ in range(max(d, 0))]
        neg = [p for p, d in zip(self.points, self.degrees) for _ in range(max(-d, 0))]
        return np.array(pos).reshape(-1, 3), np.array(neg).reshape(-1, 3)


@dataclass(frozen=True)
class ConnectionResult:
    length: float
    pairing: tuple              # pairing[j] = index of the negative point matched to positive j
    dual_pos: np.ndarray = field(repr=False)
    dual_neg: np.ndarray = field(repr=False)

    @property
    def dual_objective(self) -> float:
        return float(np.sum(self.dual_pos) - np.sum(self.dual_neg))

    @property
    def gap(self) -> float:
        return abs(self.length - self.dual_objective)


def _distance_matrix(pos, neg) -> np.ndarray:
    return np.linalg.norm(pos[:, None, :] - neg[None, :, :], axis=-1)


def _lex_smallest_optimum(C: np.ndarray, best: float) -> tuple:
    """Lexicographically smallest permutation achieving ``best``.

    Fixes positions greedily: for each row take the smallest column whose
    choice still admits an optimal completion.
    """
    m = len(C)
    tol = TIE_TOL * (1 + abs(best))
    rows_left = list(range(m))
    cols_left = list(range(m))
    perm = []
    acc = 0.0
    for r in range(m):
        rest_rows = rows_left[1:]
        for c in sorted(cols_left):
            rest_cols = [x for x in cols_left if x != c]
            sub = C[np.ix_(rest_rows, rest_cols)] if rest_rows else np.zeros((0, 0))
            if len(rest_rows):
                ri, ci = linear_sum_assignment(sub)
                rest = sub[ri, ci].sum()
            else:
                rest = 0.0
            if acc + C[r, c] + rest <= best + tol:
                perm.append(c)
                acc += C[r, c]
                cols_left = rest_cols
                rows_left = rest_rows
                break
        else:  # pragma: no cover - only on inconsistent arithmetic
            raise NumericalFailure("could not reconstruct an optimal pairing")
    return tuple(perm)


def _dual_potentials(pos, neg, perm):
    """Optimal dual potentials from shortest paths in the residual graph.

    Nodes are all positive and negative copies. Constraint
    ``xi_u - xi_v <= |r_u - r_v|`` gives an edge ``v -> u`` of that weight;
    complementary slackness on matched pairs adds ``xi_neg - xi_pos <= -d``.
    Shortest-path distances from a virtual source are then feasible and
    tight on the matching.
    """
    pts = np.vstack([pos, neg])
    m = len(pos)
    n = len(pts)
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    W = D.copy()
    for j, k in enumerate(perm):
        W[j, m + k] = min(W[j, m + k], -D[j, m + k])
    # weight W[v, u] bounds xi_u - xi_v from above; Floyd-Warshall from a
    # virtual source (dense numpy, the graphs are tiny and may have 0 weights)
    G = np.full((n + 1, n + 1), np.inf)
    G[:n, :n] = W
    np.fill_diagonal(G, 0.0)
    G[n, :n] = 0.0
    dist = G
    for k in range(n + 1):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    if not np.all(np.isfinite(dist[n, :n])) or np.any(np.diag(dist) < -1e-9):
        raise NumericalFailure("dual constraint graph has a negative cycle; pairing not optimal")
    xi = dist[n, :n]
    xi = xi - xi.min()
    return xi[:m], xi[m:]


def minimal_connection(pos, neg) -> ConnectionResult:
    """Cheapest pairing of ``pos`` with ``neg``, with optimal dual potentials."""
    pos = np.asarray(pos, dtype=float).reshape(-1, 3)
    neg = np.asarray(neg, dtype=float).reshape(-1, 3)
    if len(pos) != len(neg):
        raise InvalidInputError(f"size mismatch: {len(pos)} positive vs {len(neg)} negative points")
    m = len(pos)
    if m == 0:
        return ConnectionResult(0.0, (), np.zeros(0), np.zeros(0))
    C = _distance_matrix(pos, neg)
    r, c = linear_sum_assignment(C)
    perm = _lex_smallest_optimum(C, float(C[r, c].sum()))
    length = float(C[np.arange(m), perm].sum())
    xi_p, xi_n = _dual_potentials(pos, neg, perm)
    return ConnectionResult(length, perm, xi_p, xi_n)


def bcl_infimum(cfg: DefectConfiguration) -> float:
    """Infimum energy ``8*pi*L`` of fields with the given point defects."""
    if sum(cfg.degrees) != 0:
        raise InadmissibleError(f"defect degrees sum to {sum(cfg.degrees)}, not 0",
                                [{"rule": "degree_sum", "value": sum(cfg.degrees)}])
    pos, neg = cfg.expanded()
    return 8 * np.pi * minimal_connection(pos, neg).length


@dataclass(frozen=True)
class DualCertificate:
    xi: np.ndarray               # one potential per defect (not per copy)
    objective: float             # sum_j xi_j d_j
    length: float
    gap: float
    lipschitz_ok: bool


def dual_certificate(cfg: DefectConfiguration) -> DualCertificate:
    """Feasible 1-Lipschitz potential attaining the minimal connection length.

    Copies of one defect share a position; potentials are merged with the
    McShane extension ``xi(r) = max_j (xi_j - |r - r_j|)`` evaluated at the
    defect sites, which preserves both feasibility and the objective.
    """
    if sum(cfg.degrees) != 0:
        raise InadmissibleError("defect degrees must sum to zero")
    pos, neg = cfg.expanded()
    res = minimal_connection(pos, neg)
    copies = np.vstack([pos, neg]) if len(pos) else np.zeros((0, 3))
    xi_copies = np.concatenate([res.dual_pos, res.dual_neg])
    pts = cfg.points
    if len(copies):
        dist = np.linalg.norm(pts[:, None, :] - copies[None, :, :], axis=-1)
        xi = np.max(xi_copies[None, :] - dist, axis=1)
    else:
        xi = np.zeros(len(pts))
    xi = xi - (xi.min() if len(xi) else 0.0)
    obj = float(np.dot(xi, cfg.degrees))
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    lip = bool(np.all(np.abs(xi[:, None] - xi[None, :]) <= D + 1e-12))
    return DualCertificate(xi, obj, res.length, abs(obj - res.length), lip)


@dataclass(frozen=True)
class SectorBound:
    sigma: int
    area: float
    length: float
    pairing: tuple

    @property
    def contribution(self) -> float:
        return 2 * self.area * self.length


@dataclass(frozen=True)
class LowerBoundReport:
    value: float
    per_sector: tuple

    def to_json(self) -> str:
        return json.dumps({"lower_bound": self.value,
                           "per_sector": [{"sigma": s.sigma, "area": s.area, "L": s.length,
                                           "pairing": list(s.pairing)} for s in self.per_sector]})


def polyhedron_lower_bound_report(P: Polyhedron, h: HomotopyClass,
                                  part: SectorPartition) -> LowerBoundReport:
    violations = validate_class(h, P.n_vertices, part.n_sectors)
    if violations:
        raise InadmissibleError("class violates the sector sum rule", violations)
    rows = []
    for sigma, sector in enumerate(part.sectors):
        col = h.wrapping[:, sigma]
        cfg = DefectConfiguration(P.vertices, tuple(col))
        pos, neg = cfg.expanded()
        res = minimal_connection(pos, neg)
        rows.append(SectorBound(sigma, sector.area, res.length, res.pairing))
    value = float(np.sum([r.contribution for r in rows]))
    return LowerBoundReport(value, tuple(rows))


def polyhedron_lower_bound(P: Polyhedron, h: HomotopyClass, part: Optional[SectorPartition] = None) -> float:
    """Sum over sectors of ``2 * area * L`` where ``L`` connects the vertices
    with positive and negative wrapping numbers (with multiplicity)."""
    if part is None:
        from .geometry.partition import tangent_partition
        part = tangent_partition(P)
    return polyhedron_lower_bound_report(P, h, part).value
