"""Fuchsian group presentations, built-in test groups, coset tables, tiling.

A presentation stores hyperbolic pairs (A_i, B_i), elliptic generators S_j of
order nu_j, and parabolic generators T_k, subject to

    prod [A_i, B_i] * prod S_j * prod T_k = e,     S_j^{nu_j} = e.

Every cusp carries a scaling map sigma_i with sigma_i^{-1} T_i sigma_i equal
to tau -> tau + 1 (the built-in groups are constructed so the translation
direction is always +1; the direction is recorded per cusp regardless).
Every elliptic point carries the affine map phi_j sending i to the fixed
point e_j, which conjugates S_j to the canonical rotation about i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .halfplane import MoebiusElement

__all__ = [
    "Signature",
    "GroupPresentation",
    "CosetTable",
    "builtin_group",
    "coset_reps",
    "tiling",
    "group_from_dict",
    "group_to_dict",
    "BUILTIN_NAMES",
]

BUILTIN_NAMES = ("PSL2Z", "Gamma2", "Gamma0_4", "Gamma0_11", "Gamma4")


@dataclass(frozen=True)
class Signature:
    """Signature (g; nu_1..nu_m; n) of an H-group."""

    g: int
    nu: tuple
    n: int

    def __post_init__(self):
        if self.g < 0 or self.n <= 0:
            raise ValueError("need genus >= 0 and at least one cusp")
        if any(v < 2 for v in self.nu):
            raise ValueError("elliptic orders must be >= 2")
        if self.area() <= 0.0:
            raise ValueError("signature violates the hyperbolicity inequality")

    @property
    def m(self) -> int:
        return len(self.nu)

    def area(self) -> float:
        """2g - 2 + sum(1 - 1/nu_i) + n, positive for hyperbolic signatures."""
        return 2 * self.g - 2 + sum(1.0 - 1.0 / v for v in self.nu) + self.n


def _rotation(t: float) -> MoebiusElement:
    """Elliptic element fixing i with derivative e^{2it} there."""
    return MoebiusElement(math.cos(t), math.sin(t), -math.sin(t), math.cos(t))


def _affine_to(point: complex) -> MoebiusElement:
    """tau -> y*tau + x, the affine map sending i to x + iy."""
    x, y = point.real, point.imag
    s = math.sqrt(y)
    return MoebiusElement(s, x / s, 0.0, 1.0 / s)


@dataclass
class GroupPresentation:
    """Presented H-group with scaling maps and cusp/elliptic data.

    Generator names are "A1","B1",...,"S1",...,"T1",... in presentation
    order.  ``cusps[i]`` is the fixed point of T_{i+1} (math.inf allowed);
    indices in the public API are 1-based to match multi-index conventions.
    """

    name: str
    signature: Signature
    hyperbolic: list          # [(A_1, B_1), ...]
    elliptic: list            # [S_1, ...]
    parabolic: list           # [T_1, ...]
    sigma: list               # scaling map per cusp
    cusps: list               # fixed points on R u {inf}
    phi: list = field(default_factory=list)        # scaling map per elliptic point
    elliptic_points: list = field(default_factory=list)
    translation_sign: list = field(default_factory=list)  # +-1 per cusp (Eq. tau -> tau +- 1)
    member: Optional[Callable] = None   # membership oracle for modular subgroups
    modular_index: Optional[int] = None

    def __post_init__(self):
        sig = self.signature
        if len(self.hyperbolic) != sig.g or len(self.elliptic) != sig.m \
                or len(self.parabolic) != sig.n:
            raise ValueError("generator counts do not match the signature")
        if not self.translation_sign:
            self.translation_sign = [self._direction(i) for i in range(sig.n)]
        if not self.elliptic_points and self.elliptic:
            self.elliptic_points = [S.fixed_point_elliptic() for S in self.elliptic]
        if not self.phi and self.elliptic:
            self.phi = [_affine_to(e) for e in self.elliptic_points]

    # -- naming ---------------------------------------------------------
    def generator_names(self) -> list:
        names = []
        for i in range(self.signature.g):
            names += [f"A{i+1}", f"B{i+1}"]
        names += [f"S{j+1}" for j in range(self.signature.m)]
        names += [f"T{k+1}" for k in range(self.signature.n)]
        return names

    def generators(self) -> dict:
        out = {}
        for i, (A, B) in enumerate(self.hyperbolic):
            out[f"A{i+1}"] = A
            out[f"B{i+1}"] = B
        for j, S in enumerate(self.elliptic):
            out[f"S{j+1}"] = S
        for k, T in enumerate(self.parabolic):
            out[f"T{k+1}"] = T
        return out

    def relation_word(self) -> list:
        """Long relation prod [A,B] prod S prod T as [(name, exponent), ...]."""
        word = []
        for i in range(self.signature.g):
            word += [(f"A{i+1}", 1), (f"B{i+1}", 1), (f"A{i+1}", -1), (f"B{i+1}", -1)]
        word += [(f"S{j+1}", 1) for j in range(self.signature.m)]
        word += [(f"T{k+1}", 1) for k in range(self.signature.n)]
        return word

    def elliptic_orders(self) -> list:
        return list(self.signature.nu)

    def evaluate_word(self, word) -> MoebiusElement:
        gens = self.generators()
        out = MoebiusElement.identity()
        for name, e in word:
            g = gens[name]
            out = out @ (g if e > 0 else g.inv())
            if abs(e) > 1:
                for _ in range(abs(e) - 1):
                    out = out @ (g if e > 0 else g.inv())
        return out

    # -- invariants -----------------------------------------------------
    def _direction(self, i: int) -> int:
        t = self.sigma[i].inv() @ self.parabolic[i] @ self.sigma[i]
        b = t.b * np.sign(t.a)
        return 1 if b > 0 else -1

    def verify(self, tol: float = 1e-10) -> dict:
        """Residuals of the presentation invariants; raises nothing."""
        ident = MoebiusElement.identity()
        rel = self.evaluate_word(self.relation_word())
        res = {"long_relation": float(min(np.abs(rel.matrix - ident.matrix).max(),
                                          np.abs(rel.matrix + ident.matrix).max()))}
        for j, (S, nu) in enumerate(zip(self.elliptic, self.signature.nu)):
            p = ident
            for _ in range(nu):
                p = p @ S
            res[f"S{j+1}^nu"] = float(min(np.abs(p.matrix - ident.matrix).max(),
                                          np.abs(p.matrix + ident.matrix).max()))
        for i in range(self.signature.n):
            t = self.sigma[i].inv() @ self.parabolic[i] @ self.sigma[i]
            tgt = np.array([[1.0, float(self.translation_sign[i])], [0.0, 1.0]])
            res[f"sigma{i+1}_conj"] = float(min(np.abs(t.matrix - tgt).max(),
                                                np.abs(t.matrix + tgt).max()))
        for j, (S, nu) in enumerate(zip(self.elliptic, self.signature.nu)):
            r = self.phi[j].inv() @ S @ self.phi[j]
            tgt = _rotation(math.pi / nu).matrix
            res[f"phi{j+1}_conj"] = float(min(np.abs(r.matrix - tgt).max(),
                                              np.abs(r.matrix + tgt).max()))
        res["ok"] = all(v <= tol for k, v in res.items() if k != "ok")
        return res

    @property
    def n_cusps(self) -> int:
        return self.signature.n


# ---------------------------------------------------------------------------
# built-in groups
# ---------------------------------------------------------------------------

def _sigma_for_cusp(completion: np.ndarray, width: float) -> MoebiusElement:
    """M * diag(sqrt(w), 1/sqrt(w)) for an SL2(Z) completion M of the cusp."""
    s = math.sqrt(width)
    return MoebiusElement.from_matrix(completion @ np.array([[s, 0.0], [0.0, 1.0 / s]]))


def _mod_member(N: int, kind: str) -> Callable:
    """Congruence membership test (projective) for integral matrices."""
    def member(g: MoebiusElement) -> bool:
        m = g.matrix
        mi = np.rint(m)
        if np.abs(m - mi).max() > 1e-7:
            return False
        mi = mi.astype(np.int64)
        if kind == "gamma0":
            return mi[1, 0] % N == 0
        red = np.mod(mi, N)
        return bool(np.all(red == np.mod(np.eye(2, dtype=np.int64), N)) or
                    np.all(red == np.mod(-np.eye(2, dtype=np.int64), N)))
    return member


def builtin_group(name: str) -> GroupPresentation:
    """One of the shipped test groups.

    PSL2Z     signature (0; 2,3; 1)
    Gamma2    principal congruence level 2, signature (0; -; 3)
    Gamma0_4  Hecke congruence level 4, signature (0; -; 3)
    Gamma0_11 Hecke congruence level 11, signature (1; -; 2)
    Gamma4    principal congruence level 4, signature (0; -; 6)

    All generator matrices are integral; the presentations were certified
    by Todd-Coxeter coset enumeration over PSL2(Z).
    """
    key = name.replace("(", "_").replace(")", "").replace("-", "_").lower()
    M = MoebiusElement.from_matrix
    if key in ("psl2z", "psl2_z", "sl2z"):
        S1 = M([[0, -1], [1, 0]])            # order 2, fixes i
        S2 = M([[0, -1], [1, -1]])           # order 3, fixes exp(i pi/3)
        T = M([[1, 1], [0, 1]])
        return GroupPresentation(
            name="PSL2Z",
            signature=Signature(0, (2, 3), 1),
            hyperbolic=[], elliptic=[S1, S2], parabolic=[T],
            sigma=[MoebiusElement.identity()],
            cusps=[math.inf],
            member=lambda g: np.abs(g.matrix - np.rint(g.matrix)).max() < 1e-7,
            modular_index=1,
        )
    if key == "gamma2":
        T1 = M([[1, 2], [0, 1]])
        T2 = M([[1, 0], [-2, 1]])
        T3 = M([[1, -2], [2, -3]])           # = (T1 T2)^{-1}, fixes 1
        inv0 = np.array([[0.0, -1.0], [1.0, 0.0]])
        to1 = np.array([[1.0, -1.0], [1.0, 0.0]])
        return GroupPresentation(
            name="Gamma2",
            signature=Signature(0, (), 3),
            hyperbolic=[], elliptic=[], parabolic=[T1, T2, T3],
            sigma=[_sigma_for_cusp(np.eye(2), 2.0),
                   _sigma_for_cusp(inv0, 2.0),
                   _sigma_for_cusp(to1, 2.0)],
            cusps=[math.inf, 0.0, 1.0],
            member=_mod_member(2, "principal"),
            modular_index=6,
        )
    if key in ("gamma0_4", "gamma04"):
        T1 = M([[1, 1], [0, 1]])
        T2 = M([[1, 0], [-4, 1]])
        T3 = M([[1, -1], [4, -3]])           # fixes 1/2
        inv0 = np.array([[0.0, -1.0], [1.0, 0.0]])
        to_half = np.array([[1.0, 0.0], [2.0, 1.0]])
        return GroupPresentation(
            name="Gamma0_4",
            signature=Signature(0, (), 3),
            hyperbolic=[], elliptic=[], parabolic=[T1, T2, T3],
            sigma=[_sigma_for_cusp(np.eye(2), 1.0),
                   _sigma_for_cusp(inv0, 4.0),
                   _sigma_for_cusp(to_half, 1.0)],
            cusps=[math.inf, 0.0, 0.5],
            member=_mod_member(4, "gamma0"),
            modular_index=6,
        )
    if key in ("gamma0_11", "gamma011"):
        A = M([[-10, 7], [-33, 23]])
        B = M([[-8, 3], [-11, 4]])
        T1 = M([[1, 1], [0, 1]])
        T2 = M([[1, 0], [-11, 1]])           # [A,B] T1 T2 = e
        inv0 = np.array([[0.0, -1.0], [1.0, 0.0]])
        return GroupPresentation(
            name="Gamma0_11",
            signature=Signature(1, (), 2),
            hyperbolic=[(A, B)], elliptic=[], parabolic=[T1, T2],
            sigma=[_sigma_for_cusp(np.eye(2), 1.0),
                   _sigma_for_cusp(inv0, 11.0)],
            cusps=[math.inf, 0.0],
            member=_mod_member(11, "gamma0"),
            modular_index=12,
        )
    if key == "gamma4":
        # positive stabilizer generators of the cusps inf, 0, 1/2, 1, 2, 3;
        # the product in this cyclic order is the identity
        def par(a, c):
            return M([[1 - 4 * a * c, 4 * a * a], [-4 * c * c, 1 + 4 * a * c]])
        data = [((1, 0), math.inf, np.eye(2)),
                ((0, 1), 0.0, np.array([[0.0, -1.0], [1.0, 0.0]])),
                ((1, 2), 0.5, np.array([[1.0, 0.0], [2.0, 1.0]])),
                ((1, 1), 1.0, np.array([[1.0, 0.0], [1.0, 1.0]])),
                ((2, 1), 2.0, np.array([[2.0, 1.0], [1.0, 1.0]])),
                ((3, 1), 3.0, np.array([[3.0, -1.0], [1.0, 0.0]]))]
        Ts = [par(a, c) for (a, c), _, _ in data]
        return GroupPresentation(
            name="Gamma4",
            signature=Signature(0, (), 6),
            hyperbolic=[], elliptic=[], parabolic=Ts,
            sigma=[_sigma_for_cusp(comp, 4.0) for _, _, comp in data],
            cusps=[p for _, p, _ in data],
            member=_mod_member(4, "principal"),
            modular_index=24,
        )
    raise ValueError(f"unknown builtin group {name!r}; known: {BUILTIN_NAMES}")


# ---------------------------------------------------------------------------
# coset enumeration
# ---------------------------------------------------------------------------

@dataclass
class CosetTable:
    """Representatives of Gamma_i \\ Gamma with bottom-row norm <= R.

    ``ms`` holds the matrices sigma_i^{-1} gamma (shape (K, 2, 2)), sorted by
    bottom-row norm; ``words`` holds the corresponding generator words of the
    gamma as [(gen_index, exponent_sign), ...]; ``count_fit`` is the empirical
    coefficient of the quadratic coset-count law K ~ count_fit * R^2.
    """

    cusp_index: int          # 1-based
    R: float
    ms: np.ndarray
    words: list
    gammas: np.ndarray

    def __post_init__(self):
        rows = self.ms[:, 1, :]
        norms = rows[:, 0] ** 2 + rows[:, 1] ** 2
        order = np.lexsort((np.round(rows[:, 1], 9), np.round(rows[:, 0], 9),
                            np.round(norms, 9)))
        self.ms = self.ms[order]
        self.gammas = self.gammas[order]
        self.words = [self.words[k] for k in order]
        self.norms = norms[order]
        if not (abs(self.ms[0, 1, 0]) <= 1e-9 and abs(abs(self.ms[0, 1, 1]) - 1.0) <= 1e-9):
            raise AssertionError("coset table does not contain the identity coset")

    def __len__(self):
        return self.ms.shape[0]

    @property
    def count_fit(self) -> float:
        return len(self) / self.R ** 2

    def bottom_rows(self) -> np.ndarray:
        return self.ms[:, 1, :].copy()


def _canon_key(c: float, d: float) -> tuple:
    if c < -1e-9 or (abs(c) <= 1e-9 and d < 0.0):
        c, d = -c, -d
    return (round(c, 9), round(d, 9))


def coset_reps(G: GroupPresentation, i: int, R: float,
               margin: float = 4.0) -> CosetTable:
    """Enumerate left cosets of the cusp stabilizer <T_i> in Gamma.

    Breadth-first search over generator words; a coset is identified by the
    bottom row of sigma_i^{-1} gamma canonicalized up to sign.  Words whose
    conjugated bottom-row norm exceeds margin*R are pruned.  ``i`` is the
    1-based cusp index.
    """
    if R < 1.0:
        raise ValueError("norm bound R must be >= 1")
    if not 1 <= i <= G.signature.n:
        raise ValueError(f"cusp index {i} out of range 1..{G.signature.n}")
    si = G.sigma[i - 1].inv().matrix
    gens = list(G.generators().values())
    steps = []
    for k, g in enumerate(gens):
        steps.append((k, 1, g.matrix))
        steps.append((k, -1, g.inv().matrix))

    lim = (margin * R) ** 2
    R2 = R * R + 1e-9
    ident = np.eye(2)
    seen = {_canon_key(si[1, 0], si[1, 1]): 0}
    mats = [ident]
    words = [[]]
    frontier = [0]
    while frontier:
        batch = np.stack([mats[j] for j in frontier])          # (F,2,2)
        new_frontier = []
        for (k, e, gm) in steps:
            cand = batch @ gm                                   # (F,2,2)
            conj = np.einsum("ij,fjk->fik", si, cand)
            rows = conj[:, 1, :]
            norms = rows[:, 0] ** 2 + rows[:, 1] ** 2
            keep = norms <= lim
            for idx in np.nonzero(keep)[0]:
                key = _canon_key(rows[idx, 0], rows[idx, 1])
                if key in seen:
                    continue
                seen[key] = len(mats)
                mats.append(cand[idx])
                words.append(words[frontier[idx]] + [(k, e)])
                new_frontier.append(len(mats) - 1)
        frontier = new_frontier

    gam = np.stack(mats)
    ms = np.einsum("ij,fjk->fik", si, gam)
    rows = ms[:, 1, :]
    inside = rows[:, 0] ** 2 + rows[:, 1] ** 2 <= R2
    return CosetTable(cusp_index=i, R=float(R),
                      ms=ms[inside], gammas=gam[inside],
                      words=[w for w, ok in zip(words, inside) if ok])


def alternate_reps(G: GroupPresentation, table: CosetTable,
                   seed: int = 0) -> CosetTable:
    """Same cosets, different representatives: left-multiply by T_i^{k}.

    Used to exercise the representative-independence of the series.
    """
    rng = np.random.default_rng(seed)
    i = table.cusp_index
    T = G.parabolic[i - 1]
    ks = rng.integers(-2, 3, size=len(table))
    t_idx = None
    for idx, nm in enumerate(G.generator_names()):
        if nm == f"T{i}":
            t_idx = idx
    Tm, Tinv = T.matrix, T.inv().matrix
    gam = []
    words = []
    for g, w, k in zip(table.gammas, table.words, ks):
        m = g.copy()
        step = Tm if k > 0 else Tinv
        for _ in range(abs(int(k))):
            m = step @ m
        gam.append(m)
        words.append([(t_idx, 1 if k > 0 else -1)] * abs(int(k)) + list(w))
    gam = np.stack(gam)
    si = G.sigma[i - 1].inv().matrix
    ms = np.einsum("ij,fjk->fik", si, gam)
    return CosetTable(cusp_index=i, R=table.R, ms=ms, gammas=gam, words=words)


def tiling(G: GroupPresentation) -> list:
    """Right-coset representatives g_1..g_mu of G \\ PSL2(Z).

    The union of g_j F_std over the representatives is a fundamental region
    for G, where F_std is the standard modular triangle.  Only available for
    the built-in finite-index subgroups of the modular group.
    """
    if G.member is None:
        raise ValueError(f"group {G.name} is not marked as a modular subgroup")
    Smat = np.array([[0.0, -1.0], [1.0, 0.0]])
    Tmat = np.array([[1.0, 1.0], [0.0, 1.0]])
    Tinv = np.array([[1.0, -1.0], [0.0, 1.0]])
    reps = [MoebiusElement.identity()]
    frontier = [np.eye(2)]
    seen_mats = [np.eye(2)]

    def in_same_coset(m1: np.ndarray, m2: np.ndarray) -> bool:
        return G.member(MoebiusElement.from_matrix(m1 @ np.array(
            [[m2[1, 1], -m2[0, 1]], [-m2[1, 0], m2[0, 0]]])))

    while frontier:
        new_frontier = []
        for m in frontier:
            for g in (Smat, Tmat, Tinv):
                cand = m @ g
                if any(in_same_coset(cand, old) for old in seen_mats):
                    continue
                seen_mats.append(cand)
                reps.append(MoebiusElement.from_matrix(cand))
                new_frontier.append(cand)
        frontier = new_frontier
        if G.modular_index is not None and len(reps) > G.modular_index:
            raise AssertionError("tiling exceeded the known index; membership "
                                 "oracle is inconsistent")
    if G.modular_index is not None and len(reps) != G.modular_index:
        raise AssertionError(f"tiling found {len(reps)} cosets, expected "
                             f"{G.modular_index}")
    return reps


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def group_to_dict(G: GroupPresentation) -> dict:
    if G.name in BUILTIN_NAMES:
        return {"name": G.name}
    def mat(g):
        return [format(v, ".17g") for v in g.matrix.ravel()]
    return {
        "generators": [mat(g) for g in G.generators().values()],
        "signature": {"g": G.signature.g, "nu": list(G.signature.nu),
                      "n": G.signature.n},
        "sigma": [mat(s) for s in G.sigma],
        "cusps": [("inf" if math.isinf(c) else format(c, ".17g"))
                  for c in G.cusps],
    }


def group_from_dict(d: dict) -> GroupPresentation:
    """Build a presentation from the JSON descriptor.

    Either {"name": <builtin>} or explicit generators (row-major matrices
    with reals as decimal strings) in presentation order A1,B1,...,S1,...,T1,...
    together with the signature, sigma list, and cusps.
    """
    if "name" in d:
        return builtin_group(d["name"])
    sig = Signature(int(d["signature"]["g"]),
                    tuple(int(v) for v in d["signature"].get("nu", [])),
                    int(d["signature"]["n"]))
    def mat(entries):
        vals = [float(v) for v in entries]
        return MoebiusElement.from_matrix(np.array(vals).reshape(2, 2))
    gens = [mat(g) for g in d["generators"]]
    expect = 2 * sig.g + sig.m + sig.n
    if len(gens) != expect:
        raise ValueError(f"expected {expect} generators for signature, got {len(gens)}")
    hyp = [(gens[2 * i], gens[2 * i + 1]) for i in range(sig.g)]
    ell = gens[2 * sig.g:2 * sig.g + sig.m]
    par = gens[2 * sig.g + sig.m:]
    sigma = [mat(s) for s in d["sigma"]]
    cusps = [math.inf if str(c) in ("inf", "Infinity") else float(c)
             for c in d["cusps"]]
    return GroupPresentation(name=d.get("label", "user"), signature=sig,
                             hyperbolic=hyp, elliptic=ell, parabolic=par,
                             sigma=sigma, cusps=cusps)


def load_group(path_or_dict) -> GroupPresentation:
    if isinstance(path_or_dict, dict):
        return group_from_dict(path_or_dict)
    with open(path_or_dict) as fh:
        return group_from_dict(json.load(fh))
