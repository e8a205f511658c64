"""Odd rational maps of the sphere preserving the three coordinate great circles.

Under ``w = (e_x + i e_y)/(1 + e_z)`` the great circles about x, y and z
become the imaginary axis, the real axis and the unit circle. A map that is
real on the real axis, imaginary on the imaginary axis and unimodular on
the unit circle has the form

    f(w) = sign * w**(2m+1)
           * prod ((w^2 - r^2)/(r^2 w^2 - 1))**rho
           * prod ((w^2 + s^2)/(s^2 w^2 + 1))**sigma
           * prod ((w^2 - t^2)(w^2 - conj(t)^2)/((t^2 w^2 - 1)(conj(t)^2 w^2 - 1)))**tau

with ``0 < r, s < 1``, ``|t| < 1``, ``0 < arg t < pi/2`` and exponents +-1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import InvalidInputError
from .geometry.sphere import inverse_stereographic, stereographic


@dataclass(frozen=True)
class ConformalMapSpec:
    sign: int = 1
    m: int = 0
    real_zeros: tuple = ()      # (r, rho)
    imag_zeros: tuple = ()      # (s, sigma)
    complex_zeros: tuple = ()   # (t, tau), t complex
    anticonformal: bool = False
    _num: np.ndarray = field(init=False, repr=False, compare=False)
    _den: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidInputError("sign must be +1 or -1")
        if int(self.m) != self.m or self.m < 0:
            raise InvalidInputError("m must be a non-negative integer")
        real = tuple((float(r), int(e)) for r, e in self.real_zeros)
        imag = tuple((float(s), int(e)) for s, e in self.imag_zeros)
        cplx = tuple((complex(t), int(e)) for t, e in self.complex_zeros)
        for r, e in real + imag:
            if not 0 < r < 1:
                raise InvalidInputError(f"real/imaginary zero modulus {r} must lie in (0, 1)")
            if e not in (1, -1):
                raise InvalidInputError("exponents must be +1 or -1")
        for t, e in cplx:
            if not (abs(t) < 1 and 0 < np.angle(t) < np.pi / 2):
                raise InvalidInputError(f"complex zero {t} must have |t| < 1 and 0 < arg t < pi/2")
            if e not in (1, -1):
                raise InvalidInputError("exponents must be +1 or -1")
        if any(e < 0 for _, e in real + imag):
            # such poles sit on the real or imaginary axis inside the disk,
            # i.e. on a side of the octant of directions
            raise InvalidInputError("pole on a side of the octant (negative real/imaginary exponent)")
        object.__setattr__(self, "real_zeros", real)
        object.__setattr__(self, "imag_zeros", imag)
        object.__setattr__(self, "complex_zeros", cplx)

        num = np.zeros(2 * self.m + 2, dtype=complex)
        num[-1] = self.sign
        den = np.array([1.0 + 0j])
        factors = []
        for r, e in real:
            factors.append(([-r * r, 0, 1], [-1, 0, r * r], e))
        for s, e in imag:
            factors.append(([s * s, 0, 1], [1, 0, s * s], e))
        for t, e in cplx:
            tb = np.conj(t)
            a = npoly.polymul([-t * t, 0, 1], [-tb * tb, 0, 1])
            b = npoly.polymul([-1, 0, t * t], [-1, 0, tb * tb])
            factors.append((a, b, e))
        for a, b, e in factors:
            if e > 0:
                num, den = npoly.polymul(num, a), npoly.polymul(den, b)
            else:
                num, den = npoly.polymul(num, b), npoly.polymul(den, a)
        # the coefficients are real by construction; drop rounding residue
        object.__setattr__(self, "_num", np.real_if_close(num, tol=1e6).astype(complex))
        object.__setattr__(self, "_den", np.real_if_close(den, tol=1e6).astype(complex))

    # ------------------------------------------------------------------ evaluation
    def _inside(self, w):
        p = npoly.polyval(w, self._num)
        q = npoly.polyval(w, self._den)
        return p, q

    def __call__(self, w):
        return evaluate_conformal(self, w)

    def spherical_derivative(self, w):
        """``|f'(w)| (1 + |w|^2) / (1 + |f(w)|^2)``, the local stretch factor."""
        w = np.asarray(w, dtype=complex)
        if self.anticonformal:
            w = np.conj(w)
        big = ~(np.abs(w) <= 1)
        # the stretch factor is invariant under w -> 1/w since f(1/w) = 1/f(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(big, 1.0 / np.where(np.isfinite(w), w, 1.0), w)
        u = np.where(big & ~np.isfinite(w), 0.0, u)
        p, q = self._inside(u)
        dp = npoly.polyval(u, npoly.polyder(self._num))
        dq = npoly.polyval(u, npoly.polyder(self._den))
        return np.abs(dp * q - p * dq) * (1 + np.abs(u) ** 2) / (np.abs(p) ** 2 + np.abs(q) ** 2)

    # ------------------------------------------------------------------ serialisation
    def to_json(self) -> str:
        return json.dumps({"sign": self.sign, "m": self.m,
                           "real": [[r, e] for r, e in self.real_zeros],
                           "imag": [[s, e] for s, e in self.imag_zeros],
                           "complex": [[t.real, t.imag, e] for t, e in self.complex_zeros],
                           "anticonformal": self.anticonformal})

    @classmethod
    def from_json(cls, text: str) -> "ConformalMapSpec":
        d = json.loads(text)
        return cls(d.get("sign", 1), d.get("m", 0),
                   tuple(tuple(x) for x in d.get("real", [])),
                   tuple(tuple(x) for x in d.get("imag", [])),
                   tuple((complex(a, b), e) for a, b, e in d.get("complex", [])),
                   bool(d.get("anticonformal", False)))


def evaluate_conformal(spec: ConformalMapSpec, w):
    """Value of the map on the extended plane; poles and infinity give ``inf``."""
    w = np.asarray(w, dtype=complex)
    if spec.anticonformal:
        w = np.conj(w)
    finite = np.isfinite(w)
    big = ~(np.abs(w) <= 1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.where(big, 1.0 / np.where(finite, w, 1.0), w)
        u = np.where(big & ~finite, 0.0, u)
        p, q = spec._inside(u)
        val = p / q
        val = np.where(q == 0, complex(np.inf, 0), val)
        # outside the unit disk use f(w) = 1/f(1/w)
        inv = np.where(val == 0, complex(np.inf, 0), 1.0 / np.where(val == 0, 1.0, val))
        inv = np.where(~np.isfinite(val), 0.0, inv)
        out = np.where(big, inv, val)
    if out.ndim == 0:
        return complex(out)
    return out


def f0() -> ConformalMapSpec:
    """The identity ``f(w) = w``."""
    return ConformalMapSpec()


def f1(s: float) -> ConformalMapSpec:
    """``w (w^2 + s^2)/(s^2 w^2 + 1)``: three octants of one hemisphere."""
    if not 0 < s < 1:
        raise InvalidInputError(f"s must lie in (0, 1), got {s}")
    return ConformalMapSpec(imag_zeros=((s, 1),))


@dataclass(frozen=True)
class CapBlendSpec:
    """A conformal map followed by an anticonformal bubble around ``center``.

    Inside the spherical cap of angular radius ``radius`` about the target
    direction ``center`` the values are turned inside out (polar angle about
    ``center`` sent from ``[0, radius]`` onto ``[pi, radius]``), so the cap's
    preimage now covers the rest of the sphere with reversed orientation.
    The boundary circle is fixed, so the result is continuous; the modified
    patch raises every wrapping number of the corner by one. Experimental.
    """

    base: ConformalMapSpec
    center: tuple = (0.0, 0.0, 1.0)
    radius: float = 0.2

    def __call__(self, w):
        v = inverse_stereographic(evaluate_conformal(self.base, w))
        c = np.asarray(self.center, dtype=float)
        c = c / np.linalg.norm(c)
        cosr = np.cos(self.radius)
        d = v @ c
        inside = d > cosr
        # send the polar angle theta in [0, radius] to [pi, radius] keeping the
        # azimuth: the boundary circle stays fixed, the centre goes to the
        # antipode and the radial direction (hence orientation) is reversed
        theta = np.arccos(np.clip(d, -1, 1))
        new_theta = np.pi - (np.pi - self.radius) * theta / self.radius
        perp = v - d[..., None] * c
        pn = np.linalg.norm(perp, axis=-1, keepdims=True)
        fallback = np.cross(c, [1.0, 0.0, 0.0] if abs(c[0]) < 0.9 else [0.0, 1.0, 0.0])
        fallback /= np.linalg.norm(fallback)
        perp = np.where(pn > 1e-15, perp / np.where(pn > 1e-15, pn, 1.0), fallback)
        moved = np.cos(new_theta)[..., None] * c + np.sin(new_theta)[..., None] * perp
        out = np.where(inside[..., None], moved, v)
        return stereographic(out / np.linalg.norm(out, axis=-1, keepdims=True))

    @property
    def anticonformal(self) -> bool:
        return self.base.anticonformal


def corner_values(spec, e):
    """Target unit vectors ``inverse_stereo(f(stereo(e)))`` for unit vectors ``e``."""
    e = np.asarray(e, dtype=float)
    return inverse_stereographic(spec(stereographic(e)))
