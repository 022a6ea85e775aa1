"""Correlation dynamics with Majorana-quadratic dissipators satisfying closure.

Reduced order-n tensors (strictly increasing indices) obey

    d/dt Tbar_n = Fbar_n Tbar_n + Gbar_n Tbar_{n-2}.

Two assemblies of (Fbar, Gbar) are provided.  ``fock`` treats antisymmetric
tensors as n-particle states of 2L auxiliary modes and builds sparse
second-quantized matrices; ``projector`` applies the two-slot operator
M_{F,n} column by column to expanded basis tensors, antisymmetrizes and reads
the sorted entries.  They agree to round-off; ``fock`` scales to L = 12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import combinatorics as cb
from .model import FermionChainModel
from .structure import StructureMatrices, build_structure

__all__ = [
    "NotClosed",
    "SingularSector",
    "ClosureReport",
    "check_closure",
    "quartic_terms",
    "diagonal_F_gamma",
    "SectorGenerator",
    "build_sector_generators",
    "full_generator_F",
    "apply_full_G",
    "M_F",
    "evolve_reduced",
    "evolve_reduced_closed_form",
    "ReducedSteadyState",
    "steady_state_reduced",
    "mixed_reduced",
    "boundary_observables",
    "covariance_study",
    "covariance_point",
    "reduced_initial",
]


class NotClosed(ValueError):
    pass


class SingularSector(np.linalg.LinAlgError):
    def __init__(self, n: int, msg: str = ""):
        super().__init__(msg or f"reduced generator of order {n} is singular")
        self.n = n


@dataclass(frozen=True)
class ClosureReport:
    residual: float
    scale: float
    closed: bool
    U_H_required_zero: bool = True


def check_closure(model: FermionChainModel, rel_tol: float = 1e-12) -> ClosureReport:
    """Im(sum_mu U_a (x) U_a^*) must vanish."""
    if not model.quadratic:
        return ClosureReport(0.0, 0.0, True)
    S = sum(np.kron(Ua, Ua.conj()) for Ua in model.U_a())
    res = float(np.abs(S.imag).max())
    scale = float(np.abs(S).max())
    return ClosureReport(res, scale, res <= rel_tol * scale)


@dataclass(frozen=True, eq=False)
class QuarticTerms:
    """Single-slot core, the U_a list and F_gamma."""

    core: np.ndarray  # F1 + Re[sum Tr(U_L^*) U_a]
    U_a: tuple
    F_gamma: np.ndarray
    F_B: np.ndarray


def diagonal_F_gamma(model: FermionChainModel) -> np.ndarray:
    """Re sum_mu U_a,jk (U*_jj / 2 + U*_kk / 2 - Tr U*), built from diagonal entries of U_L.

    This inhomogeneous coupling disagrees with the dense oracle whenever its
    real part is nonzero; kept for comparison only (see ``quartic_terms``).
    """
    N = 2 * model.L
    Fg = np.zeros((N, N))
    for U in model.quadratic:
        Ua = U - U.T
        d = np.diag(U).conj()
        Fg += (Ua * (0.5 * d[:, None] + 0.5 * d[None, :] - np.trace(U).conj())).real
    return Fg


def quartic_terms(model: FermionChainModel, sm: StructureMatrices, f_gamma: str = "derived") -> QuarticTerms:
    """Collect the pieces of F_{M,n} and G_{M,2m}.

    A jump operator sum U_ab w_a w_b equals L' + Tr(U)/2 with L' built from
    U_a / 2.  The constant only adds the Hamiltonian i(c^* L' - c L'^dag),
    which is the Re[Tr(U^*) U_a] one-slot term, so the inhomogeneous quartic
    coupling vanishes (``derived``).  ``diagonal`` uses ``diagonal_F_gamma``.
    """
    N = 2 * model.L
    core = sm.F1.real.astype(complex)
    Uas = []
    for U in model.quadratic:
        Ua = U - U.T
        Uas.append(Ua)
        core = core + (np.trace(U).conj() * Ua).real
    if f_gamma == "derived":
        Fg = np.zeros((N, N))
    elif f_gamma == "diagonal":
        Fg = diagonal_F_gamma(model)
    else:
        raise ValueError(f"unknown f_gamma variant {f_gamma!r}")
    return QuarticTerms(core, tuple(Uas), Fg, sm.F_B)


def M_F(terms: QuarticTerms, n: int) -> np.ndarray:
    """Two-slot operator whose antisymmetrized action equals that of F_{M,n}."""
    N = terms.core.shape[0]
    one = terms.core - sum((Ua @ Ua.conj().T for Ua in terms.U_a), np.zeros((N, N), complex))
    two = sum((np.kron(Ua, Ua.conj().T) for Ua in terms.U_a), np.zeros((N * N, N * N), complex))
    return n * np.kron(np.eye(N), one) - 2 * math.comb(n, 2) * two.real


@dataclass(eq=False)
class SectorGenerator:
    n: int
    Fbar: object  # scipy sparse or ndarray, C(2L,n) square
    Gbar: object | None  # C(2L,n) x C(2L,n-2)
    built_from: dict = field(default_factory=dict)

    def dense_F(self) -> np.ndarray:
        return self.Fbar.toarray() if sp.issparse(self.Fbar) else np.asarray(self.Fbar)

    def dense_G(self) -> np.ndarray:
        return self.Gbar.toarray() if sp.issparse(self.Gbar) else np.asarray(self.Gbar)


def _fock_generator(terms: QuarticTerms, N: int, n: int) -> SectorGenerator:
    sec = cb.sector(N, n)
    F = sec.one_body(terms.core)
    for Ua in terms.U_a:
        F = F - sec.one_body(Ua) @ sec.one_body(Ua.conj().T)
    G = None
    if n >= 2 and n % 2 == 0:
        m = n // 2
        W = m * terms.F_gamma + 1j * math.comb(n, 2) * terms.F_B
        G = sec.pair_creation(W, cb.sector(N, n - 2)) / (n * (n - 1))
    return SectorGenerator(n, F.tocsr(), None if G is None else G.tocsr(), {"method": "fock"})


def _projector_generator(terms: QuarticTerms, N: int, n: int) -> SectorGenerator:
    dim = math.comb(N, n)
    F = np.zeros((dim, dim), complex)
    MF = M_F(terms, n) if n >= 2 else None
    for col in range(dim):
        e = np.zeros(dim, complex)
        e[col] = 1
        x = cb.expand(e, N, n)
        if n == 0:
            y = np.zeros(())
        elif n == 1:
            y = terms.core @ x - sum(Ua @ (Ua.conj().T @ x) for Ua in terms.U_a)
        else:
            y = (x.reshape(-1, N * N) @ MF.T).reshape(x.shape)
        F[:, col] = cb.reduce(cb.antisym_project(y)) if n else 0
    G = None
    if n >= 2 and n % 2 == 0:
        m = n // 2
        W = m * terms.F_gamma + 1j * math.comb(n, 2) * terms.F_B
        low = math.comb(N, n - 2)
        G = np.zeros((dim, low), complex)
        for col in range(low):
            e = np.zeros(low, complex)
            e[col] = 1
            y = np.multiply.outer(W, cb.expand(e, N, n - 2))
            G[:, col] = cb.reduce(cb.antisym_project(y))
    return SectorGenerator(n, F, G, {"method": "projector"})


def build_sector_generators(
    model: FermionChainModel,
    sm: StructureMatrices | None = None,
    orders=(0, 2, 4),
    method: str = "fock",
    f_gamma: str = "derived",
) -> dict:
    """Reduced generators {n: SectorGenerator} for the requested orders."""
    rep = check_closure(model)
    if not rep.closed:
        raise NotClosed(f"closure condition violated (residual {rep.residual:.3g})")
    sm = sm or build_structure(model)
    N = 2 * model.L
    terms = quartic_terms(model, sm, f_gamma)
    out = {}
    for n in orders:
        if not 0 <= n <= N:
            raise ValueError(f"order {n} outside 0..{N}")
        if method == "fock":
            out[n] = _fock_generator(terms, N, n)
        elif method == "projector":
            out[n] = _projector_generator(terms, N, n)
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


# -- full (unreduced) generators, small sizes only --------------------------

def _kron_sum(A: np.ndarray, n: int) -> np.ndarray:
    N = A.shape[0]
    out = np.zeros((N**n, N**n), complex)
    for k in range(n):
        out += np.kron(np.kron(np.eye(N**k), A), np.eye(N ** (n - k - 1)))
    return out


def full_generator_F(model: FermionChainModel, sm: StructureMatrices, n: int) -> np.ndarray:
    """Dense F_{M,n} = F_n - sum U^(n) U^(n)dag + Re[sum Tr(U_L^*) U^(n)]."""
    terms = quartic_terms(model, sm)
    F = _kron_sum(terms.core, n)
    for Ua in terms.U_a:
        Un = _kron_sum(Ua, n)
        F -= Un @ Un.conj().T
    return F


def apply_full_G(terms: QuarticTerms, w: np.ndarray) -> np.ndarray:
    """G_{M,2m} applied to a full order 2m-2 tensor."""
    n = w.ndim + 2
    m = n // 2
    out = 1j * cb.apply_R2m(m, w, terms.F_B)
    pairs = [(2 * k, 2 * k - 1, 1) for k in range(1, m + 1)]
    out = out + cb.place_pairs(terms.F_gamma, w, pairs)
    return out


# -- propagation -------------------------------------------------------------

def _augmented(gens: dict, top: int):
    """Block lower-triangular generator acting on [Tbar_0, Tbar_2, ..., Tbar_top]."""
    orders = list(range(0, top + 1, 2))
    blocks = [[None] * len(orders) for _ in orders]
    for i, n in enumerate(orders):
        blocks[i][i] = sp.csr_matrix(gens[n].Fbar)
        if i:
            blocks[i][i - 1] = sp.csr_matrix(gens[n].Gbar)
    return sp.bmat(blocks, format="csc"), orders


def _split(x: np.ndarray, gens: dict, orders) -> dict:
    out, pos = {}, 0
    for n in orders:
        d = gens[n].Fbar.shape[0]
        out[n] = x[pos : pos + d]
        pos += d
    return out


def evolve_reduced(gens: dict, init: dict, times, top: int | None = None) -> list[dict]:
    """Reduced tensors at each time via the augmented block exponential."""
    top = top if top is not None else max(n for n in gens if n % 2 == 0)
    A, orders = _augmented(gens, top)
    x0 = np.concatenate([np.asarray(init[n], complex).reshape(-1) for n in orders])
    out = []
    dense = A.shape[0] <= 600
    Ad = A.toarray() if dense else None
    for t in times:
        if t < 0:
            raise ValueError("t must be non-negative")
        if t == 0:
            x = x0.copy()
        elif dense:
            x = sla.expm(Ad * t) @ x0
        else:
            x = spla.expm_multiply(A * t, x0)
        out.append(_split(x, gens, orders))
    return out


def evolve_reduced_closed_form(gens: dict, init: dict, t: float, rcond: float = 1e-10) -> dict:
    """Orders 2 and 4 from the closed-form solution with a Sylvester-equation K.

    With u_t = Tbar_2(t) + F2^{-1} G2 = e^{F2 t} u_0 and A4 = F4^{-1} G4 F2^{-1} G2:
        Tbar_4(t) = A4 + K u_t + e^{F4 t} (Tbar_4(0) - A4 - K u_0),
    where F4 K - K F2 + G4 = 0.
    """
    F2, G2 = gens[2].dense_F(), gens[2].dense_G()[:, 0]
    F4, G4 = gens[4].dense_F(), gens[4].dense_G()
    for n, F in ((2, F2), (4, F4)):
        if 1.0 / np.linalg.cond(F) < rcond:
            raise SingularSector(n)
    l2, l4 = np.linalg.eigvals(F2), np.linalg.eigvals(F4)
    if np.abs(l4[:, None] - l2[None, :]).min() < 1e-10:
        raise SingularSector(4, "spectra of Fbar_4 and Fbar_2 overlap; Sylvester equation ill-posed")
    c = np.linalg.solve(F2, G2)
    u0 = init[2] + c
    E2 = sla.expm(F2 * t)
    E4 = sla.expm(F4 * t)
    ut = E2 @ u0
    T2 = ut - c
    A4 = np.linalg.solve(F4, G4 @ c)
    K = sla.solve_sylvester(F4.astype(complex), -F2.astype(complex), -G4.astype(complex))
    T4 = A4 + K @ ut + E4 @ (init[4] - A4 - K @ u0)
    return {0: np.array([1.0 + 0j]), 2: T2, 4: T4}


@dataclass(eq=False)
class ReducedSteadyState:
    tensors: dict
    method: dict = field(default_factory=dict)


def _is_singular(F, n: int, rcond: float) -> bool:
    if F.shape[0] <= 3000:
        Fd = F.toarray() if sp.issparse(F) else F
        s = np.linalg.svd(Fd, compute_uv=False)
        return s[-1] <= rcond * s[0]
    try:
        lu = spla.splu(sp.csc_matrix(F))
    except RuntimeError:  # exactly singular pivot
        return True
    d = np.abs(lu.U.diagonal())
    return d.min() <= rcond * d.max()


def mixed_reduced(gens: dict, top: int) -> dict:
    """Reduced tensors of the maximally mixed state: only Tbar_0 = 1 survives."""
    return {n: (np.ones(1, complex) if n == 0 else np.zeros(gens[n].Fbar.shape[0], complex))
            for n in range(0, top + 1, 2)}


def steady_state_reduced(
    gens: dict,
    top: int | None = None,
    rcond: float = 1e-12,
    singular: str = "raise",
    init: dict | None = None,
    t_relax: float = 1e3,
    t_max: float = 1e6,
    tol: float = 1e-12,
) -> ReducedSteadyState:
    """Solve Fbar_n Tbar_n = -Gbar_n Tbar_{n-2} bottom up from Tbar_0 = 1.

    If a sector is singular the NESS is not unique.  ``singular='raise'``
    raises SingularSector; ``singular='evolve'`` propagates ``init`` (the
    maximally mixed state by default) with the augmented exponential,
    multiplying the time by 10 until the stationarity residual drops below
    ``tol`` or ``t_max`` is reached.
    """
    top = top if top is not None else max(n for n in gens if n % 2 == 0)
    orders = list(range(2, top + 1, 2))
    bad = [n for n in orders if _is_singular(gens[n].Fbar, n, rcond)]
    if bad:
        if singular == "raise":
            raise SingularSector(bad[0])
        init = init if init is not None else mixed_reduced(gens, top)
        A, ords = _augmented(gens, top)
        t = t_relax
        while True:
            x = evolve_reduced(gens, init, [t], top)[0]
            vec = np.concatenate([x[n] for n in ords])
            res = float(np.abs(A @ vec).max())
            if res <= tol or t >= t_max:
                break
            t *= 10
        meta = {"path": "evolve", "t": t, "residual": res, "singular_orders": bad}
        return ReducedSteadyState(x, meta)
    out = {0: np.array([1.0 + 0j])}
    for n in orders:
        F, G = gens[n].Fbar, gens[n].Gbar
        rhs = -(G @ out[n - 2])
        if sp.issparse(F):
            out[n] = spla.spsolve(sp.csc_matrix(F), rhs)
        else:
            out[n] = np.linalg.solve(F, rhs)
    return ReducedSteadyState(out, {"path": "solve"})


# -- observables on reduced tensors -----------------------------------------

def boundary_observables(tensors: dict, L: int) -> dict:
    """<n_1>, <n_L>, <n_1 n_L> and Cov from reduced order-2 and order-4 tensors."""
    N = 2 * L
    T2 = tensors[2]
    r = lambda idx: cb.rank(idx, N)
    n1 = 0.5 - 1j * T2[r((0, L))]
    nL = 0.5 - 1j * T2[r((L - 1, 2 * L - 1))]
    n1nL = 0.25 - 0.5j * (T2[r((0, L))] + T2[r((L - 1, 2 * L - 1))]) + tensors[4][r((0, L - 1, L, 2 * L - 1))]
    return {"n1": n1, "nL": nL, "n1nL": n1nL, "cov": n1nL - n1 * nL}


def covariance_point(L: int, J: float, gamma_l: float, gamma_g: float, gamma_t: float) -> dict:
    """NESS Cov(n_1, n_L) for one preset chain."""
    from .model import build_preset_chain

    model = build_preset_chain(L, J, gamma_l, gamma_g, gamma_t)
    gens = build_sector_generators(model, orders=(0, 2, 4))
    ness = steady_state_reduced(gens, singular="evolve")
    obs = boundary_observables(ness.tensors, L)
    return {
        "gamma_l": gamma_l, "gamma_g": gamma_g, "gamma_t": gamma_t,
        "n1": obs["n1"], "nL": obs["nL"], "cov": obs["cov"], "path": ness.method["path"],
    }


def covariance_study(family, deltas, L: int, J: float = 1.0, workers: int = 1) -> list[dict]:
    """Cov(n_1, n_L) of the NESS over a grid of asymmetries delta.

    ``family(delta) -> (gamma_l, gamma_g, gamma_t)``.  Results come back in
    grid order regardless of ``workers``.
    """
    from concurrent.futures import ThreadPoolExecutor

    def point(delta):
        return {"delta": float(delta), **covariance_point(L, J, *family(delta))}

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(point, deltas))
    return [point(d) for d in deltas]


def reduced_initial(state, L: int, max_order: int = 4) -> dict:
    """Reduced tensors {0, 2, .., max_order} of an initial state.

    Gaussian states (vacuum, full, explicit T2) use pairing sums entry by
    entry, so no (2L)^n array is formed.  GHZ uses the vacuum/full average
    when L exceeds the order and the dense oracle otherwise.
    """
    from .quad_dynamics import _check_T2, pairing_sum, vacuum_T2

    N = 2 * L
    out = {0: np.array([1.0 + 0j])}
    if state.kind in ("ghz", "dense"):
        from . import oracle

        vac = reduced_initial(type(state)("vacuum"), L, max_order)
        full = reduced_initial(type(state)("full"), L, max_order)
        rho = None
        for n in range(2, max_order + 1, 2):
            if state.kind == "ghz" and L > n:
                out[n] = 0.5 * (vac[n] + full[n])
                continue
            rho = oracle.initial_density(state, L) if rho is None else rho
            out[n] = cb.reduce(oracle.corr_tensor(rho, n), check=False)
        return out
    if state.kind == "gaussian":
        T2 = np.asarray(state.data, complex)
        _check_T2(T2)
    elif state.kind in ("vacuum", "full"):
        T2 = vacuum_T2(L, filled=state.kind == "full")
    else:
        raise ValueError(f"unsupported initial state {state.kind!r}")
    for n in range(2, max_order + 1, 2):
        out[n] = np.array([pairing_sum(T2, idx) for idx in cb.combinations(N, n)], dtype=complex)
    return out
