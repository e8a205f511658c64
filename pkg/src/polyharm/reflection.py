"""Lower bounds for mirror-symmetric classes on a rectangular prism.

Octants are the prism sectors, numbered ``4[x>0] + 2[y>0] + [z>0]``; two
octants share an edge exactly when their ids differ in one bit.
"""
from __future__ import annotations

import itertools
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError
from .topology import ReflSymClass

OCTANT_ADJACENCY = tuple(tuple(sorted(s ^ b for b in (1, 2, 4))) for s in range(8))


class DeltaResult(NamedTuple):
    value: int
    conformal: bool


def _excess(w: tuple, sigma: int, sign: int, chi: int, adjacency) -> int:
    nb = sum(abs(w[t]) for t in adjacency[sigma] if sign * w[t] > 0)
    return abs(w[sigma]) - nb - chi


def delta(rs: ReflSymClass, adjacency=OCTANT_ADJACENCY) -> DeltaResult:
    """Excess of the extreme wrapping numbers over their same-signed neighbours.

    ``max(W+ - (positive neighbours of sigma+) - chi,
    |W-| - (|negative neighbours| of sigma-) - chi, 0)``. When several
    octants share the extreme value the smallest excess is used, which keeps
    the bound valid whichever one is meant. Conformal classes give 0.
    """
    # plain tuples: this runs once per class in exhaustive enumerations
    w = rs.octant_wrapping
    if adjacency is not OCTANT_ADJACENCY and (
            len(adjacency) != len(w) or any(len(a) != 3 for a in adjacency)):
        raise InvalidInputError("each octant needs exactly three neighbours")
    wp, wm = max(w), min(w)
    if wp <= 0 or wm >= 0:
        return DeltaResult(0, True)
    plus = min(_excess(w, s, 1, rs.chi, adjacency) for s in range(8) if w[s] == wp)
    minus = min(_excess(w, s, -1, rs.chi, adjacency) for s in range(8) if w[s] == wm)
    return DeltaResult(int(max(plus, minus, 0)), False)


def symmetric_lower_bound(rs: ReflSymClass) -> float:
    """``4*pi*Lz * sum |w|``: the minimal-connection bound for these classes."""
    return 4 * np.pi * float(sum(map(abs, rs.octant_wrapping))) * rs.dims[2]


def improved_lower_bound(rs: ReflSymClass) -> float:
    """``4*pi*Lz * (sum |w| + 2*delta)``."""
    d = delta(rs).value
    return 4 * np.pi * (float(sum(map(abs, rs.octant_wrapping))) + 2 * d) * rs.dims[2]


def enumerate_classes(max_abs: int = 2, dims=(1.0, 1.0, 1.0)):
    """All reflection-symmetric classes with entries in ``[-max_abs, max_abs]``, both chi."""
    rng = range(-max_abs, max_abs + 1)
    for w in itertools.product(rng, repeat=8):
        for chi in (0, 1):
            yield ReflSymClass(w, chi, dims)


H0 = (0, 0, 0, 0, 0, 0, 0, -1)
H1 = (0, -1, 0, -1, 0, 0, 0, -1)


def h0_class(dims=(1.0, 1.0, 1.0)) -> ReflSymClass:
    """Class of the unwrapped field: -1 on the octant pointing into the prism."""
    return ReflSymClass(H0, 0, dims)


def h1_class(dims=(1.0, 1.0, 1.0)) -> ReflSymClass:
    """Three contiguous octants of the upper hemisphere covered with degree -1."""
    return ReflSymClass(H1, 0, dims)


def class_of_wrapping(w0, chi: int = 0, dims=(1.0, 1.0, 1.0)) -> Optional[ReflSymClass]:
    return ReflSymClass(tuple(int(x) for x in w0), chi, dims)
