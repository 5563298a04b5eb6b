"""Unitary representation data: spectra, weights, flags, adjoint action.

A unitary matrix M is stored through its spectral datum {W, [U]}: sorted
weights alpha_1 <= ... <= alpha_r in [0, 1) with M = U e^{2 pi i W} U^{-1}
and U a unitary eigenvector matrix.  The flag representative U is not
unique; only reconstructed matrices are ever compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .fuchsian import GroupPresentation

__all__ = [
    "SpectralDatum",
    "UnitaryRep",
    "WeightSystem",
    "spectral_datum",
    "dual_weights",
    "ad_weights",
    "flag_dim",
    "is_irreducible",
    "ad_rep",
    "weight_system",
    "rank1_character",
    "rep_from_dict",
    "rep_to_dict",
]

_UNITARY_TOL = 1e-10
_PHASE_ONE_TOL = 1e-12     # phases this close to 1 count as weight 0
_CLUSTER_TOL = 1e-9


def _check_unitary(M: np.ndarray, tol: float = _UNITARY_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    defect = np.abs(M.conj().T @ M - np.eye(M.shape[0])).max()
    if defect > tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
    return M


@dataclass
class SpectralDatum:
    """Weights and flag representative of a unitary matrix."""

    weights: np.ndarray        # sorted ascending in [0, 1)
    U: np.ndarray              # columns are orthonormal eigenvectors
    multiplicities: list
    s_zero: int                # dim ker(I - M)

    @property
    def rank(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        return (self.U * np.exp(2j * np.pi * self.weights)) @ self.U.conj().T

    def phase_matrix(self, tau):
        """Diagonal q^W(tau) = diag(e^{2 pi i alpha_j tau}) as an array of
        shape (..., r) of diagonal entries."""
        tau = np.asarray(tau, dtype=complex)
        return np.exp(2j * np.pi * np.multiply.outer(tau, self.weights))


def spectral_datum(M, tol: float = _UNITARY_TOL) -> SpectralDatum:
    """Eigen-decompose a unitary matrix into weights in [0,1) and a flag.

    A complex Schur decomposition of a normal matrix is diagonal, so the
    Schur vectors give orthonormal eigenvectors even for repeated spectra.
    """
    M = _check_unitary(M, tol)
    Tm, Q = scipy.linalg.schur(M, output="complex")
    # normality cross-check: off-diagonal part of T must vanish
    off = np.abs(Tm - np.diag(np.diag(Tm))).max()
    if off > 1e-8:
        raise ValueError(f"matrix is not normal (Schur off-diagonal {off:.3e})")
    eigs = np.diag(Tm)
    phases = np.angle(eigs) / (2.0 * np.pi)
    phases = np.mod(phases, 1.0)
    phases[phases >= 1.0 - _PHASE_ONE_TOL] = 0.0
    order = np.argsort(phases, kind="stable")
    phases = phases[order]
    U = Q[:, order]
    mult = []
    for p in phases:
        if mult and abs(p - mult[-1][0]) <= _CLUSTER_TOL:
            mult[-1][1] += 1
        else:
            mult.append([p, 1])
    s = int(np.sum(phases <= _CLUSTER_TOL))
    return SpectralDatum(weights=phases, U=U,
                         multiplicities=[m for _, m in mult], s_zero=s)


def dual_weights(d: SpectralDatum) -> np.ndarray:
    """Weights of the contragredient matrix, Eq.-level: 0 for the kernel of
    I - M, then 1 - alpha reversed for the rest; sorted ascending."""
    r, s = d.rank, d.s_zero
    out = np.zeros(r)
    for j in range(s + 1, r + 1):
        out[j - 1] = 1.0 - d.weights[r + s - j]   # alpha_{r+s+1-j}, 0-based
    return out


def ad_weights(W) -> list:
    """Weights inherited by Ad rho at one point: frac(alpha_j - alpha_k) over
    all ordered pairs.  Exact (Fraction) input is preserved exactly."""
    W = list(W)
    out = []
    for aj in W:
        for ak in W:
            x = aj - ak
            out.append(x - (x // 1 if isinstance(x, Fraction) else np.floor(x)))
    return sorted(out)


def flag_dim(W) -> tuple:
    """(complex, real) dimension of the partial flag manifold of a weight
    vector: (r^2 - sum m_k^2)/2 complex, twice that real."""
    W = list(W)
    r = len(W)
    mults = []
    for w in sorted(W):
        if mults and _weights_equal(w, mults[-1][0]):
            mults[-1][1] += 1
        else:
            mults.append([w, 1])
    c2 = r * r - sum(m * m for _, m in mults)
    if c2 % 2 != 0:
        raise AssertionError("flag dimension parity violated")
    return (c2 // 2, c2)


def _weights_equal(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= _CLUSTER_TOL


@dataclass
class WeightSystem:
    """Spectral data at every cusp and elliptic point (cusps first)."""

    cusp_data: list            # SpectralDatum per cusp
    elliptic_data: list        # SpectralDatum per elliptic point
    nu: list = field(default_factory=list)
    rank: int = 1

    def __post_init__(self):
        if self.cusp_data:
            self.rank = self.cusp_data[0].rank

    def datum(self, i: int) -> SpectralDatum:
        """1-based point index: cusps 1..n, then elliptic n+1..n+m."""
        n = len(self.cusp_data)
        if 1 <= i <= n:
            return self.cusp_data[i - 1]
        j = i - n
        if 1 <= j <= len(self.elliptic_data):
            return self.elliptic_data[j - 1]
        raise IndexError(f"point index {i} out of range")

    def all_weights(self) -> list:
        return [d.weights for d in self.cusp_data + self.elliptic_data]

    @property
    def n_points(self) -> int:
        return len(self.cusp_data) + len(self.elliptic_data)


@dataclass
class UnitaryRep:
    """Generator images of a unitary representation of a presented group."""

    rank: int
    images: dict               # generator name -> (r, r) complex unitary

    def __post_init__(self):
        for name, M in self.images.items():
            self.images[name] = _check_unitary(M)
            if self.images[name].shape != (self.rank, self.rank):
                raise ValueError(f"image {name} has wrong shape")

    def image(self, name: str, exponent: int = 1) -> np.ndarray:
        M = self.images[name]
        if exponent < 0:
            M = M.conj().T
        out = np.eye(self.rank, dtype=complex)
        for _ in range(abs(exponent)):
            out = out @ M
        return out

    def of_word(self, word) -> np.ndarray:
        """Image of a word [(name, exponent), ...]."""
        out = np.eye(self.rank, dtype=complex)
        for name, e in word:
            out = out @ self.image(name, e)
        return out

    def relation_residuals(self, G: GroupPresentation) -> dict:
        """Deviation of the images from the defining relations."""
        res = {}
        eye = np.eye(self.rank)
        rel = self.of_word(G.relation_word())
        res["long_relation"] = float(np.abs(rel - eye).max())
        for j, nu in enumerate(G.signature.nu):
            p = self.image(f"S{j+1}")
            res[f"S{j+1}^nu"] = float(np.abs(np.linalg.matrix_power(p, nu) - eye).max())
        return res

    def check(self, G: GroupPresentation, tol: float = 1e-8) -> bool:
        return all(v <= tol for v in self.relation_residuals(G).values())


def weight_system(G: GroupPresentation, rho: UnitaryRep,
                  snap_elliptic: bool = True) -> WeightSystem:
    """Spectral data of rho at every cusp and elliptic point of G.

    Elliptic weights are rational with denominator nu_j; they are snapped to
    the nearest multiple of 1/nu_j and an error is raised if the snap exceeds
    tolerance (that would mean the image violates S^nu = e).
    """
    cusp_data = [spectral_datum(rho.images[f"T{i+1}"])
                 for i in range(G.signature.n)]
    ell_data = []
    for j, nu in enumerate(G.signature.nu):
        d = spectral_datum(rho.images[f"S{j+1}"])
        if snap_elliptic:
            snapped = np.round(d.weights * nu) / nu
            snapped[snapped >= 1.0] = 0.0
            if np.abs(snapped - d.weights).max() > 1e-6:
                raise ValueError(
                    f"elliptic weights at S{j+1} are not multiples of 1/{nu}")
            d.weights = snapped
        ell_data.append(d)
    return WeightSystem(cusp_data=cusp_data, elliptic_data=ell_data,
                        nu=list(G.signature.nu), rank=rho.rank)


def rank1_character(G: GroupPresentation, phases: Sequence[float],
                    hyperbolic_phases: Optional[Sequence[float]] = None,
                    tol: float = 1e-8) -> UnitaryRep:
    """Unitary character from phases chi(gen) = e^{2 pi i phase}.

    ``phases`` lists the elliptic then parabolic generators in presentation
    order (S1..Sm, T1..Tn); hyperbolic generators default to phase 0.  The
    defining relations are validated.
    """
    sig = G.signature
    if len(phases) != sig.m + sig.n:
        raise ValueError(f"need {sig.m + sig.n} phases (elliptic then parabolic)")
    hyp = list(hyperbolic_phases) if hyperbolic_phases is not None else [0.0] * (2 * sig.g)
    images = {}
    for i in range(sig.g):
        images[f"A{i+1}"] = np.array([[np.exp(2j * np.pi * hyp[2 * i])]])
        images[f"B{i+1}"] = np.array([[np.exp(2j * np.pi * hyp[2 * i + 1])]])
    for j in range(sig.m):
        images[f"S{j+1}"] = np.array([[np.exp(2j * np.pi * phases[j])]])
    for k in range(sig.n):
        images[f"T{k+1}"] = np.array([[np.exp(2j * np.pi * phases[sig.m + k])]])
    rho = UnitaryRep(rank=1, images=images)
    bad = {k: v for k, v in rho.relation_residuals(G).items() if v > tol}
    if bad:
        raise ValueError(f"phases violate the group relations: {bad}")
    return rho


# ---------------------------------------------------------------------------
# commutant and adjoint representation
# ---------------------------------------------------------------------------

def _commutant_dimension(rho: UnitaryRep, tol: float = 1e-8) -> int:
    r = rho.rank
    basis = [np.zeros((r, r), dtype=complex) for _ in range(r * r)]
    for k in range(r * r):
        basis[k][k // r, k % r] = 1.0
    rows = []
    for M in rho.images.values():
        block = np.zeros((r * r, r * r), dtype=complex)
        for k, E in enumerate(basis):
            block[:, k] = (E @ M - M @ E).ravel()
        rows.append(block)
    sys = np.vstack(rows)
    sv = np.linalg.svd(sys, compute_uv=False)
    return int(np.sum(sv <= tol * max(1.0, sv[0])))


def is_irreducible(rho: UnitaryRep, tol: float = 1e-8) -> bool:
    """Schur test: the commutant of the generator images is 1-dimensional."""
    return _commutant_dimension(rho, tol) == 1


def ad_rep(rho: UnitaryRep) -> UnitaryRep:
    """Adjoint representation X -> rho X rho^{-1} as r^2 x r^2 unitaries.

    Matrices are flattened row-major, so the action on basis matrices E_{jk}
    matches numpy ravel order.
    """
    r = rho.rank
    images = {}
    for name, M in rho.images.items():
        images[name] = np.kron(M, M.conj())
    return UnitaryRep(rank=r * r, images=images)


def ad_apply(rho: UnitaryRep, name: str, X: np.ndarray,
             exponent: int = 1) -> np.ndarray:
    """Ad rho(g) X = rho(g) X rho(g)^{-1} without flattening."""
    M = rho.image(name, exponent)
    return M @ X @ M.conj().T


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def rep_to_dict(rho: UnitaryRep) -> dict:
    images = {}
    for name, M in rho.images.items():
        images[name] = [[float(v.real), float(v.imag)] for v in M.ravel()]
    return {"rank": rho.rank, "images": images}


def rep_from_dict(d: dict) -> UnitaryRep:
    """{"rank": r, "images": {"T1": [[re, im], ...], ...}} with matrices as
    row-major lists of [re, im] pairs."""
    r = int(d["rank"])
    images = {}
    for name, entries in d["images"].items():
        vals = np.array([complex(re, im) for re, im in entries])
        images[name] = vals.reshape(r, r)
    return UnitaryRep(rank=r, images=images)
