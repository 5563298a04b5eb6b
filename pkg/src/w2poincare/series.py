"""Truncated Poincare series, Eisenstein majorants, the s -> 0 limit, and
numerical q- and zeta-expansion extraction.

Series terms for the multi-index I = (i, j, l) with kappa = alpha_ij + l:

    P^s term:  m'(tau) Im(m tau)^s  e^{2 pi i kappa m tau} rho(gamma)^{-1} U e_j
    Q^s term:  |m'(tau)|^2 Im(m tau)^{s-1} e^{...} (same vector factor)

with m = sigma_i^{-1} gamma running over a coset table.  Terms are summed in
the table's deterministic norm order in fixed-size blocks with compensated
combination of the block partials, so results are reproducible bit-for-bit
across thread counts and representative choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .fuchsian import CosetTable, GroupPresentation, coset_reps
from .halfplane import cayley_inverse
from .repdata import UnitaryRep, WeightSystem

__all__ = [
    "MultiIndex",
    "SeriesValue",
    "QExpansion",
    "multi_index",
    "eisenstein",
    "PoincareSeries",
    "PoincareLimit",
    "poincare_s",
    "q_series_s",
    "dbar_residual",
    "poincare_limit",
    "qexp_coeffs",
    "elliptic_coeffs",
]

_BLOCK = 256
_IM_SKIP_FACTOR = 50.0


@dataclass(frozen=True)
class MultiIndex:
    """Admissible index (cusp i, coordinate j, Fourier order l), 1-based."""

    i: int
    j: int
    l: int
    kappa: float

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("Fourier order l must be >= 0")
        if not self.kappa > 0.0:
            raise ValueError(
                f"inadmissible multi-index ({self.i},{self.j},{self.l}): "
                f"kappa = {self.kappa} <= 0")


def multi_index(weights: WeightSystem, i: int, j: int, l: int) -> MultiIndex:
    """Validated index; kappa = alpha_ij + l must be positive."""
    d = weights.datum(i)
    if not 1 <= j <= d.rank:
        raise ValueError(f"coordinate {j} out of range 1..{d.rank}")
    return MultiIndex(i=i, j=j, l=l, kappa=float(d.weights[j - 1] + l))


@dataclass
class SeriesValue:
    """Truncated series value with its truncation metadata."""

    value: np.ndarray
    s: float
    R: float
    tail_bound: float


@dataclass
class QExpansion:
    """Fourier coefficients a(0..k_max) extracted on a horocycle."""

    cusp_index: int
    coeffs: np.ndarray          # (k_max+1, D)
    y0: float
    M: int
    weights: np.ndarray
    U: np.ndarray
    alias_bound: float

    def a(self, k: int) -> np.ndarray:
        return self.coeffs[k]


def _lambda_min(tau: complex) -> float:
    """Smallest eigenvalue of [[|tau|^2, x], [x, 1]]; |c tau + d|^2 >= lam*(c^2+d^2)."""
    t2 = abs(tau) ** 2
    tr = 1.0 + t2
    disc = tr * tr - 4.0 * tau.imag ** 2
    return 0.5 * (tr - math.sqrt(max(disc, 0.0)))


def _eisenstein_tail(tau: complex, s: float, R: float, count_fit: float) -> float:
    lam = _lambda_min(tau)
    return (count_fit / s) * tau.imag ** (1.0 + s) * lam ** (-(1.0 + s)) * R ** (-2.0 * s)


def _block_sum(terms: np.ndarray) -> np.ndarray:
    """Deterministic compensated sum over axis 1 of (T, K, ...) terms.

    Fixed blocks of _BLOCK terms are reduced with the native sum; block
    partials are combined sequentially with Neumaier compensation.  The
    result is independent of threading and identical for any caller that
    presents the terms in the same order.
    """
    T, K = terms.shape[0], terms.shape[1]
    total = np.zeros((T,) + terms.shape[2:], dtype=complex)
    comp = np.zeros_like(total)
    for start in range(0, K, _BLOCK):
        part = terms[:, start:start + _BLOCK].sum(axis=1)
        t = total + part
        big = np.abs(total) >= np.abs(part)
        comp = comp + np.where(big, (total - t) + part, (part - t) + total)
        total = t
    return total + comp


class _Engine:
    """Shared evaluation machinery over one coset table."""

    def __init__(self, G: GroupPresentation, rho: UnitaryRep,
                 weights: WeightSystem, I: MultiIndex,
                 table: CosetTable):
        if table.cusp_index != I.i:
            raise ValueError("coset table belongs to a different cusp")
        self.G = G
        self.I = I
        self.table = table
        d = weights.datum(I.i)
        if not 1 <= I.j <= rho.rank:
            raise ValueError(f"coordinate {I.j} out of range for rank {rho.rank}")
        names = G.generator_names()
        ucol = d.U[:, I.j - 1]
        vs = np.empty((len(table), rho.rank), dtype=complex)
        cache = {}
        for k, word in enumerate(table.words):
            key = tuple(word)
            rv = cache.get(key)
            if rv is None:
                m = np.eye(rho.rank, dtype=complex)
                for gi, e in word:
                    m = m @ rho.image(names[gi], e)
                rv = np.linalg.inv(m) if rho.rank > 1 else (1.0 / m)
                cache[key] = rv
            vs[k] = rv @ ucol
        self.vs = vs
        ms = table.ms
        self.mc = ms[:, 1, 0].astype(complex)
        self.md = ms[:, 1, 1].astype(complex)
        self.ma = ms[:, 0, 0].astype(complex)
        self.mb = ms[:, 0, 1].astype(complex)

    def _values(self, tau: np.ndarray, s: float, kind: str,
                skip: bool) -> tuple:
        """Values (T, r) plus the per-tau bound on skipped-term norms."""
        tau = np.atleast_1d(np.asarray(tau, dtype=complex))
        if np.any(tau.imag <= 0):
            raise ValueError("evaluation points must lie in the upper half-plane")
        kap = self.I.kappa
        thresh = _IM_SKIP_FACTOR / kap if skip else np.inf
        out = np.empty((tau.size, self.vs.shape[1]), dtype=complex)
        skipped = np.zeros(tau.size)
        chunk = max(1, int(2.0e6 // max(len(self.table), 1)))
        for lo in range(0, tau.size, chunk):
            t = tau[lo:lo + chunk, None]
            den = self.mc[None, :] * t + self.md[None, :]
            imw = t.imag / np.abs(den) ** 2
            w = (self.ma[None, :] * t + self.mb[None, :]) / den
            if kind == "P":
                scal = den ** (-2) * imw ** s * np.exp(2j * np.pi * kap * w)
            else:
                scal = np.abs(den) ** (-4) * imw ** (s - 1.0) \
                    * np.exp(2j * np.pi * kap * w)
            mask = imw > thresh
            if mask.any():
                y = t.real * 0 + t.imag
                if kind == "P":
                    bnd = imw ** (1.0 + s) / y * np.exp(-2 * np.pi * kap * imw)
                else:
                    bnd = imw ** (1.0 + s) / y ** 2 * np.exp(-2 * np.pi * kap * imw)
                skipped[lo:lo + chunk] = np.where(mask, bnd, 0.0).sum(axis=1)
                scal = np.where(mask, 0.0, scal)
            out[lo:lo + chunk] = _block_sum(scal[:, :, None] * self.vs[None, :, :])
        return out, skipped

    def tail(self, tau, s: float, kind: str) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=complex))
        base = np.array([_eisenstein_tail(complex(t), s, self.table.R,
                                          self.table.count_fit) for t in tau])
        if kind == "P":
            return base / tau.imag
        return base / tau.imag ** 2


class PoincareSeries:
    """Evaluator of the truncated series P^s_I (kind="P") or Q^s_I ("Q")."""

    def __init__(self, G: GroupPresentation, rho: UnitaryRep,
                 weights: WeightSystem, I: MultiIndex, s: float, R: float,
                 kind: str = "P", table: Optional[CosetTable] = None,
                 margin: float = 4.0, skip_far_terms: bool = True):
        if s <= 0.0:
            raise ValueError("regularization parameter s must be positive")
        if kind not in ("P", "Q"):
            raise ValueError("kind must be 'P' or 'Q'")
        self.s = float(s)
        self.kind = kind
        self.skip = skip_far_terms
        if table is None:
            table = coset_reps(G, I.i, R, margin=margin)
        self.engine = _Engine(G, rho, weights, I, table)
        self.R = float(table.R)
        self.I = I

    def values(self, tau) -> np.ndarray:
        v, _ = self.engine._values(tau, self.s, self.kind, self.skip)
        return v

    def __call__(self, tau) -> np.ndarray:
        return self.values(tau)

    def at(self, tau) -> SeriesValue:
        tau = complex(tau)
        v, skipped = self.engine._values(tau, self.s, self.kind, self.skip)
        tail = float(self.engine.tail(tau, self.s, self.kind)[0]) + float(skipped[0])
        return SeriesValue(value=v[0], s=self.s, R=self.R, tail_bound=tail)


def _neville_to_zero(svals: Sequence[float], fvals: list) -> tuple:
    """Polynomial extrapolation to s = 0.

    Returns (limit, residual) where the residual is the difference between
    the full extrapolant and the one omitting the last ladder point.
    """
    n = len(svals)
    T = [np.asarray(f, dtype=complex) for f in fvals]
    x = [float(s) for s in svals]
    diag = [T[0].copy()]
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            T[i] = T[i] + (T[i] - T[i - 1]) * x[i] / (x[i - 1] - x[i])
        diag.append(T[j].copy())
    return diag[-1], float(np.abs(diag[-1] - diag[-2]).max())


def _neville_weight_scale(svals: Sequence[float]) -> float:
    """Sum of |Lagrange weights| of the extrapolation at 0."""
    total = 0.0
    for i, si in enumerate(svals):
        w = 1.0
        for j, sj in enumerate(svals):
            if j != i:
                w *= sj / (sj - si)
        total += abs(w)
    return total


class PoincareLimit:
    """Richardson-extrapolated s -> 0 limit, including the 4 pi kappa factor.

    The ladder should stay shallow (default max 0.2): the truncation tail of
    the underlying series behaves like R^{-2s}, which a polynomial model only
    tracks when 2 s ln R stays order one.
    """

    DEFAULT_LADDER = (0.2, 0.1, 0.05, 0.025)

    def __init__(self, G: GroupPresentation, rho: UnitaryRep,
                 weights: WeightSystem, I: MultiIndex,
                 ladder: Optional[Sequence[float]] = None, R: float = 120.0,
                 table: Optional[CosetTable] = None, margin: float = 4.0):
        ladder = tuple(ladder) if ladder is not None else self.DEFAULT_LADDER
        if len(ladder) < 3:
            raise ValueError("ladder needs at least 3 values")
        if any(s <= 0 for s in ladder) or any(
                a <= b for a, b in zip(ladder, ladder[1:])):
            raise ValueError("ladder must be positive and strictly decreasing")
        if table is None:
            table = coset_reps(G, I.i, R, margin=margin)
        self.engine = _Engine(G, rho, weights, I, table)
        self.ladder = ladder
        self.I = I
        self.R = float(table.R)
        self._wscale = _neville_weight_scale(ladder)

    def values(self, tau) -> np.ndarray:
        vals = [self.engine._values(tau, s, "P", True)[0] for s in self.ladder]
        lim, _ = _neville_to_zero(self.ladder, vals)
        return 4.0 * np.pi * self.I.kappa * lim

    def __call__(self, tau) -> np.ndarray:
        return self.values(tau)

    def at(self, tau) -> SeriesValue:
        tau = complex(tau)
        vals = []
        skipped = 0.0
        for s in self.ladder:
            v, sk = self.engine._values(tau, s, "P", True)
            vals.append(v)
            skipped = max(skipped, float(sk[0]))
        lim, resid = _neville_to_zero(self.ladder, vals)
        scale = 4.0 * np.pi * self.I.kappa
        tails = max(float(self.engine.tail(tau, s, "P")[0]) for s in self.ladder)
        tail = scale * (self._wscale * (tails + skipped) + resid)
        return SeriesValue(value=scale * lim[0], s=0.0, R=self.R, tail_bound=tail)


# ---------------------------------------------------------------------------
# functional wrappers
# ---------------------------------------------------------------------------

def eisenstein(G: GroupPresentation, i: int, tau, s: float, R: float,
               table: Optional[CosetTable] = None,
               margin: float = 4.0) -> SeriesValue:
    """Truncated Eisenstein majorant E_i(tau, 1+s) = sum Im(sigma_i^{-1} gamma tau)^{1+s}."""
    if s <= 0.0:
        raise ValueError("regularization parameter s must be positive")
    if table is None:
        table = coset_reps(G, i, R, margin=margin)
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("evaluation point must lie in the upper half-plane")
    ms = table.ms
    den = ms[:, 1, 0] * tau + ms[:, 1, 1]
    imw = tau.imag / np.abs(den) ** 2
    order = np.argsort(imw, kind="stable")           # ascending: small terms first
    val = float(math.fsum(imw[order] ** (1.0 + s)))
    tail = _eisenstein_tail(tau, s, table.R, table.count_fit)
    return SeriesValue(value=np.array([val]), s=s, R=table.R, tail_bound=tail)


def poincare_s(G, rho, weights, I: MultiIndex, tau, s: float, R: float,
               table=None, margin: float = 4.0) -> SeriesValue:
    """Truncated P^s_I at one point."""
    return PoincareSeries(G, rho, weights, I, s, R, "P", table, margin).at(tau)


def q_series_s(G, rho, weights, I: MultiIndex, tau, s: float, R: float,
               table=None, margin: float = 4.0) -> SeriesValue:
    """Truncated auxiliary series Q^s_I at one point."""
    return PoincareSeries(G, rho, weights, I, s, R, "Q", table, margin).at(tau)


def poincare_limit(G, rho, weights, I: MultiIndex, tau,
                   s_ladder=None, R: float = 120.0, table=None,
                   margin: float = 4.0) -> SeriesValue:
    """4 pi kappa_I times the extrapolated s -> 0 value of P^s_I."""
    return PoincareLimit(G, rho, weights, I, s_ladder, R, table, margin).at(tau)


def dbar_residual(G, rho, weights, I: MultiIndex, tau, s: float, R: float,
                  h: float, table=None, margin: float = 4.0) -> float:
    """Finite-difference residual of dbar P^s = -(s / 2i) Q^s.

    The stencil is evaluated with far-term skipping disabled so both sides
    run over the identical term set; the identity then holds termwise and
    the residual is pure O(h^2) differencing error.
    """
    tau = complex(tau)
    if not 0.0 < h < tau.imag / 10.0:
        raise ValueError("step h must lie in (0, Im(tau)/10)")
    if table is None:
        table = coset_reps(G, I.i, R, margin=margin)
    P = PoincareSeries(G, rho, weights, I, s, R, "P", table,
                       skip_far_terms=False)
    Q = PoincareSeries(G, rho, weights, I, s, R, "Q", table,
                       skip_far_terms=False)
    stencil = np.array([tau + h, tau - h, tau + 1j * h, tau - 1j * h])
    pv = P.values(stencil)
    dx = (pv[0] - pv[1]) / (2.0 * h)
    dy = (pv[2] - pv[3]) / (2.0 * h)
    dbar = 0.5 * (dx + 1j * dy)
    qv = Q.values(np.array([tau]))[0]
    return float(np.linalg.norm(dbar + (s / 2j) * qv))


# ---------------------------------------------------------------------------
# expansion extraction
# ---------------------------------------------------------------------------

def _as_vector_samples(vals: np.ndarray, T: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != T:
        raise ValueError("evaluator returned wrong number of samples")
    return vals


def qexp_coeffs(f: Callable, G: GroupPresentation, weights: WeightSystem,
                i: int, k_max: int, y0: float = 1.0, M: int = 32) -> QExpansion:
    """Fourier coefficients of an automorphic evaluator at cusp i.

    Samples g(tau) = f(sigma_i tau) sigma_i'(tau) on the horocycle of height
    y0, strips the U_i q^{W_i} prefactor, and projects with the discrete
    Fourier transform.  The caller is responsible for f actually satisfying
    the weight-2 automorphy; the recorded alias bound assumes coefficient
    growth no faster than the sampled scale.
    """
    if M <= 2 * (k_max + 1):
        raise ValueError("need M > 2 (k_max + 1) sample points")
    if y0 <= 0.0:
        raise ValueError("sampling height must be positive")
    d = weights.datum(i)
    sig = G.sigma[i - 1]
    t = np.arange(M) / M
    tau = t + 1j * y0
    den = sig.c * tau + sig.d
    stau = (sig.a * tau + sig.b) / den
    g = _as_vector_samples(f(stau), M) / den[:, None] ** 2
    # strip U q^W:  h = q^{-W} U^* g
    h = (d.U.conj().T @ g.T).T
    h = h * np.exp(-2j * np.pi * np.outer(tau, d.weights))
    co = np.fft.fft(h, axis=0) / M
    ks = np.arange(k_max + 1)
    coeffs = co[ks] * np.exp(2.0 * np.pi * ks * y0)[:, None]
    scale = float(np.abs(h).max())
    alias = scale * math.exp(-2.0 * math.pi * (M - k_max) * y0) \
        * math.exp(2.0 * math.pi * k_max * y0)
    return QExpansion(cusp_index=i, coeffs=coeffs, y0=y0, M=M,
                      weights=d.weights.copy(), U=d.U.copy(), alias_bound=alias)


def elliptic_coeffs(f: Callable, G: GroupPresentation, weights: WeightSystem,
                    j: int, k_max: int, radius: float = 0.35,
                    M: int = 64) -> np.ndarray:
    """Power-series coefficients b(0..k_max) at the j-th elliptic point.

    Samples the normalized local expression on the circle |zeta| = radius and
    projects onto powers zeta^{k nu}.  Elliptic weights are multiples of
    1/nu, so zeta^{nu W} is single-valued.
    """
    if not G.signature.nu:
        raise ValueError("group has no elliptic points")
    if not 1 <= j <= G.signature.m:
        raise ValueError(f"elliptic index {j} out of range 1..{G.signature.m}")
    if not 0.0 < radius < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    nu = G.signature.nu[j - 1]
    if M <= 2 * nu * (k_max + 1):
        raise ValueError("need M > 2 nu (k_max + 1) sample points")
    d = weights.datum(G.signature.n + j)
    phi = G.phi[j - 1]
    t = np.arange(M) / M
    eta = radius * np.exp(2j * np.pi * t)
    tau = cayley_inverse(eta)
    den = phi.c * tau + phi.d
    ptau = (phi.a * tau + phi.b) / den
    zprime = 2j / (tau + 1j) ** 2
    g = _as_vector_samples(f(ptau), M) / den[:, None] ** 2
    g = g / (eta ** (nu - 1) * zprime)[:, None]
    h = (d.U.conj().T @ g.T).T
    nw = np.round(np.asarray(d.weights) * nu).astype(int)
    h = h * eta[:, None] ** (-nw[None, :])
    co = np.fft.fft(h, axis=0) / M
    ks = nu * np.arange(k_max + 1)
    return co[ks] / (radius ** ks)[:, None]
