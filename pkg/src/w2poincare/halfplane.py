"""Moebius arithmetic on the upper half-plane and the local coordinates q, zeta.

Conventions fixed here and used everywhere else:

* group elements are real 2x2 matrices with det 1, identified projectively
  (M and -M are the same element);
* the Cayley map is zeta(tau) = (tau - i)/(tau + i), so zeta(i) = 0;
* q(tau) = exp(2 pi i tau).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "MoebiusElement",
    "HPoint",
    "moebius_apply",
    "moebius_derivative",
    "cayley",
    "cayley_inverse",
    "q_coordinate",
]

_DET_TOL = 1e-12


class HPoint(NamedTuple):
    """Point tau = x + iy of the open upper half-plane."""

    x: float
    y: float

    @property
    def tau(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, tau) -> "HPoint":
        tau = complex(tau)
        if not tau.imag > 0.0:
            raise ValueError(f"point {tau} is not in the upper half-plane")
        return cls(tau.real, tau.imag)


def _as_tau(tau):
    """Accept HPoint, complex scalar, or complex array; validate Im > 0."""
    if isinstance(tau, HPoint):
        return complex(tau.x, tau.y)
    arr = np.asarray(tau, dtype=complex)
    if not np.all(arr.imag > 0.0):
        raise ValueError("point(s) must have positive imaginary part")
    if arr.ndim == 0:
        return complex(arr)
    return arr


@dataclass(frozen=True)
class MoebiusElement:
    """Element of PSL(2, R), stored as a det-1 matrix, sign-insensitive.

    Construction normalizes by 1/sqrt(det); matrices with det <= 0 are
    rejected (orientation-reversing maps do not act on H).
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det <= 0.0:
            raise ValueError(f"matrix has nonpositive determinant {det}")
        r = 1.0 / np.sqrt(det)
        if abs(det - 1.0) > _DET_TOL:
            object.__setattr__(self, "a", self.a * r)
            object.__setattr__(self, "b", self.b * r)
            object.__setattr__(self, "c", self.c * r)
            object.__setattr__(self, "d", self.d * r)

    @classmethod
    def from_matrix(cls, m) -> "MoebiusElement":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected 2x2 matrix, got shape {m.shape}")
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def identity(cls) -> "MoebiusElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    def inv(self) -> "MoebiusElement":
        return MoebiusElement(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        return MoebiusElement.from_matrix(self.matrix @ other.matrix)

    def trace(self) -> float:
        return self.a + self.d

    def apply(self, tau):
        tau = _as_tau(tau)
        return (self.a * tau + self.b) / (self.c * tau + self.d)

    def derivative(self, tau):
        tau = _as_tau(tau)
        return 1.0 / (self.c * tau + self.d) ** 2

    def __call__(self, tau):
        return self.apply(tau)

    def almost_equal(self, other: "MoebiusElement", tol: float = 1e-10) -> bool:
        m, n = self.matrix, other.matrix
        return bool(np.abs(m - n).max() <= tol or np.abs(m + n).max() <= tol)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MoebiusElement):
            return NotImplemented
        return self.almost_equal(other, tol=1e-12)

    def __hash__(self):
        # projective canonical sign: first nonzero of (c, d, a) positive
        m = self.matrix
        for v in (self.c, self.d, self.a):
            if abs(v) > 1e-12:
                if v < 0:
                    m = -m
                break
        return hash(tuple(np.round(m.ravel(), 9)))

    def __repr__(self):
        return (f"MoebiusElement([[{self.a:.12g}, {self.b:.12g}], "
                f"[{self.c:.12g}, {self.d:.12g}]])")

    def is_parabolic(self, tol: float = 1e-9) -> bool:
        return abs(abs(self.trace()) - 2.0) <= tol and not self.almost_equal(
            MoebiusElement.identity(), tol)

    def is_elliptic(self, tol: float = 1e-9) -> bool:
        return abs(self.trace()) < 2.0 - tol

    def fixed_point_elliptic(self) -> complex:
        """Fixed point in H of an elliptic element."""
        if not self.is_elliptic():
            raise ValueError("element is not elliptic")
        # c tau^2 + (d - a) tau - b = 0, root with positive imaginary part
        disc = (self.d - self.a) ** 2 + 4.0 * self.b * self.c  # < 0
        root = (self.a - self.d + 1j * np.sqrt(-disc)) / (2.0 * self.c)
        if root.imag < 0:
            root = (self.a - self.d - 1j * np.sqrt(-disc)) / (2.0 * self.c)
        return root

    def fixed_point_parabolic(self) -> float:
        """Fixed point on R u {inf} of a parabolic element."""
        if not self.is_parabolic():
            raise ValueError("element is not parabolic")
        if abs(self.c) < 1e-12:
            return np.inf
        return (self.a - self.d) / (2.0 * self.c)


def moebius_apply(g: MoebiusElement, tau):
    """g tau = (a tau + b)/(c tau + d); maps H to H."""
    return g.apply(tau)


def moebius_derivative(g: MoebiusElement, tau):
    """g'(tau) = 1/(c tau + d)^2; satisfies |g'(tau)| Im tau = Im(g tau)."""
    return g.derivative(tau)


def cayley(tau):
    """Cayley map zeta = (tau - i)/(tau + i), H -> D, zeta(i) = 0."""
    tau = _as_tau(tau)
    return (tau - 1j) / (tau + 1j)


def cayley_inverse(zeta):
    """Inverse Cayley map D -> H."""
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(np.abs(zeta) >= 1.0):
        raise ValueError("point(s) must lie in the open unit disk")
    out = 1j * (1 + zeta) / (1 - zeta)
    if out.ndim == 0:
        return complex(out)
    return out


def q_coordinate(tau):
    """q = exp(2 pi i tau); |q| = exp(-2 pi Im tau) < 1."""
    tau = _as_tau(tau)
    return np.exp(2j * np.pi * tau)
