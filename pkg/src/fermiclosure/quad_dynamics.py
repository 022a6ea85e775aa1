"""Even-order correlation dynamics for quadratic Liouvillians.

Tensors are full numpy arrays of shape (2L,)*n holding
T_{j1..jn} = Tr[w_j1 ... w_jn rho].  Order-0 is the scalar 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import combinatorics as cb
from .model import InitialState
from .structure import StructureMatrices

__all__ = [
    "SingularCovariance",
    "MemoryGuardError",
    "expm_safe",
    "vacuum_T2",
    "full_T2",
    "initial_corr",
    "evolve_T2",
    "SteadyT2",
    "steady_state_T2",
    "slotwise",
    "high_order",
    "wick",
    "wick_matrix_form",
    "pairing_sum",
    "GaussianState",
    "gaussian_density",
    "fcs",
    "occupation",
    "n1_nL",
    "number_weight",
]

FULL_TENSOR_BUDGET = 2 ** 24


class SingularCovariance(ValueError):
    pass


class MemoryGuardError(MemoryError):
    pass


def expm_safe(A: np.ndarray, t: float, max_condition: float = 1e8) -> np.ndarray:
    """e^{At}: eigendecomposition when well conditioned, else scaling and squaring."""
    if t == 0:
        return np.eye(A.shape[0], dtype=A.dtype)
    w, V = np.linalg.eig(A)
    if np.linalg.cond(V) < max_condition:
        E = (V * np.exp(w * t)) @ np.linalg.inv(V)
        return E.real if np.isrealobj(A) else E
    return sla.expm(A * t)


def vacuum_T2(L: int, filled: bool = False) -> np.ndarray:
    T = 0.5 * np.eye(2 * L, dtype=complex)
    s = 0.5j if filled else -0.5j
    idx = np.arange(L)
    T[idx, L + idx] = s
    T[L + idx, idx] = -s
    return T


def full_T2(L: int) -> np.ndarray:
    return vacuum_T2(L, filled=True)


def _check_T2(T2: np.ndarray, tol: float = 1e-9):
    N = T2.shape[0]
    if np.abs(T2 + T2.T - np.eye(N)).max() > tol or np.abs(T2 - T2.conj().T).max() > tol:
        raise ValueError("T2 must satisfy T2 + T2^T = I and T2^dag = T2")


def initial_corr(state: InitialState, L: int, max_order: int, allow_oracle: bool = True) -> dict:
    """Correlation tensors {0: 1, 2: T2, 4: T4, ...} of an initial state."""
    if max_order % 2:
        raise ValueError("max_order must be even")
    orders = range(2, max_order + 1, 2)
    if state.kind in ("vacuum", "full", "gaussian"):
        if state.kind == "gaussian":
            T2 = np.asarray(state.data, complex)
            _check_T2(T2)
        else:
            T2 = vacuum_T2(L, filled=state.kind == "full")
        return {0: np.array(1.0 + 0j), **{n: wick(T2, n) for n in orders}}
    if state.kind == "ghz":
        out = {0: np.array(1.0 + 0j)}
        vac = initial_corr(InitialState("vacuum"), L, max_order)
        full = initial_corr(InitialState("full"), L, max_order)
        need_oracle = [n for n in orders if L <= n]
        if need_oracle and not allow_oracle:
            raise ValueError(f"GHZ tensors of order >= {L} need the dense oracle")
        rho = None
        for n in orders:
            if L > n:
                out[n] = 0.5 * (vac[n] + full[n])
            else:
                from . import oracle

                if rho is None:
                    rho = oracle.initial_density(state, L)
                out[n] = oracle.corr_tensor(rho, n)
        return out
    if state.kind == "dense":
        if not allow_oracle:
            raise ValueError("dense initial states need the oracle")
        from . import oracle

        rho = oracle.initial_density(state, L)
        return {0: np.array(1.0 + 0j), **{n: oracle.corr_tensor(rho, n) for n in orders}}
    raise ValueError(state.kind)


@dataclass(frozen=True, eq=False)
class SteadyT2:
    T2: np.ndarray
    non_unique: bool
    residual: float


def steady_state_T2(sm: StructureMatrices, tol: float = 1e-10) -> SteadyT2:
    """Solve F1 T + T F1^T - i F_B^T = 0."""
    F1 = sm.F1.real
    rhs = 1j * sm.F_B.T
    lam = np.linalg.eigvals(F1)
    gap = np.abs(lam[:, None] + lam[None, :]).min()
    scale = max(1.0, np.abs(F1).max())
    if gap > tol * scale:
        # scipy mishandles a real A paired with a complex right-hand side
        T = sla.solve_continuous_lyapunov(F1.astype(complex), rhs)
        non_unique = False
    else:
        N = F1.shape[0]
        I = np.eye(N)
        A = np.kron(F1, I) + np.kron(I, F1)
        x, *_ = np.linalg.lstsq(A, rhs.reshape(-1), rcond=None)
        T = x.reshape(N, N)
        non_unique = True
    res = float(np.abs(F1 @ T + T @ F1.T - rhs).max())
    return SteadyT2(T, non_unique, res)


def evolve_T2(sm: StructureMatrices, T2_0: np.ndarray, t: float, steady: SteadyT2 | None = None) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return np.array(T2_0, dtype=complex)
    Tinf = (steady or steady_state_T2(sm)).T2
    E = expm_safe(sm.F1.real, t)
    return E @ (T2_0 - Tinf) @ E.T + Tinf


def slotwise(E: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(E (x) E (x) ... (x) E) v, i.e. e^{bold-F_n t} v with E = e^{F1 t}."""
    out = np.asarray(v)
    for ax in range(out.ndim):
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [ax])), 0, ax)
    return out


def _guard(N: int, n: int, budget: int = FULL_TENSOR_BUDGET):
    if N**n > budget:
        raise MemoryGuardError(
            f"full order-{n} tensor over {N} indices has {N**n} entries; use the reduced path"
        )


def high_order(sm: StructureMatrices, T_init: dict, m: int, t: float, steady: SteadyT2 | None = None) -> np.ndarray:
    """Order-2m tensor at time t from initial tensors of orders 0..2m.

    Sum over l of (-1)^{m-l}/(m-l)! RR_{(2m,2l+2)}[D^{(x)(m-l)} (x) e^{F_{2l} t} T_{2l,0}]
    with D = T2(t)^T - e^{F_2 t} T2(0)^T.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    N = 2 * sm.L
    _guard(N, 2 * m)
    steady = steady or steady_state_T2(sm)
    E = expm_safe(sm.F1.real, t)
    T20 = T_init[2]
    T2t = evolve_T2(sm, T20, t, steady)
    D = T2t.T - E @ T20.T @ E.T
    out = np.zeros((N,) * (2 * m), complex)
    for l in range(m + 1):
        block = slotwise(E, T_init[2 * l]) if l else np.array(1.0 + 0j)
        for _ in range(m - l):
            block = np.multiply.outer(D, block)
        coef = (-1) ** (m - l) / math.factorial(m - l)
        out += coef * cb.apply_RR(m, l, block)
    return out


def wick(T2: np.ndarray, n: int) -> np.ndarray:
    """Signed pairing sum of T2 entries (Pfaffian expansion along the first slot)."""
    if n % 2:
        raise ValueError("Wick expansion needs an even order")
    if n == 0:
        return np.array(1.0 + 0j)
    T2 = np.asarray(T2, complex)
    if n == 2:
        return T2.copy()
    prev = wick(T2, n - 2)
    base = np.multiply.outer(T2, prev)
    out = np.zeros(base.shape, complex)
    for k in range(2, n + 1):
        out += (-1) ** k * np.moveaxis(base, 1, k - 1)
    return out


def pairing_sum(T2: np.ndarray, idx) -> complex:
    """Single Wick entry: signed pairing sum of T2 over the index tuple ``idx``."""
    idx = tuple(int(i) for i in idx)
    if not idx:
        return 1.0 + 0j
    if len(idx) % 2:
        return 0j
    first, rest = idx[0], idx[1:]
    total = 0j
    for k in range(len(rest)):
        v = T2[first, rest[k]]
        if v != 0:
            total += (-1) ** k * v * pairing_sum(T2, rest[:k] + rest[k + 1 :])
    return total


def wick_matrix_form(T2: np.ndarray, n: int) -> np.ndarray:
    """((-1)^l / l!) RR_{(2l,2)} (T2^T (x) ... (x) T2^T), l = n/2."""
    l = n // 2
    v = np.array(1.0 + 0j)
    for _ in range(l):
        v = np.multiply.outer(np.asarray(T2).T, v)
    return (-1) ** l / math.factorial(l) * cb.apply_RR(l, 0, v)


# -- Gaussian states and counting statistics --------------------------------

@dataclass(frozen=True, eq=False)
class GaussianState:
    """rho = exp(log_norm) * exp(sum_ab varrho_ab w_a w_b)."""

    varrho: np.ndarray
    log_norm: float

    def dense(self) -> np.ndarray:
        from . import oracle

        L = self.varrho.shape[0] // 2
        w = oracle.majoranas(L)
        G = np.einsum("ab,aij,bjk->ik", self.varrho, w, w)
        return np.exp(self.log_norm) * sla.expm(G)


def gaussian_density(T2: np.ndarray, tol: float = 1e-12) -> GaussianState:
    """Invert e^{2 varrho} = T2^{-1} - I and the normalization 1/sqrt(det(I + e^{2 varrho}))."""
    T2 = np.asarray(T2, complex)
    _check_T2(T2)
    lam, V = np.linalg.eigh(0.5 * (T2 + T2.conj().T))
    if lam.min() < tol or lam.max() > 1 - tol:
        raise SingularCovariance("T2 has eigenvalues at 0 or 1 (pure directions)")
    vr = 0.5 * (V * np.log(1.0 / lam - 1.0)) @ V.conj().T
    vr = 0.5 * (vr - vr.T)
    log_norm = 0.5 * float(np.sum(np.log(lam)))
    return GaussianState(vr, log_norm)


def _branch_sqrt(f, steps: int, depth: int = 0) -> complex:
    """sqrt(f(1)) continued from sqrt(f(0)) = 1 along s in [0, 1]."""
    prev_val, prev_root = complex(f(0.0)), 1.0 + 0j
    for k in range(1, steps + 1):
        val = complex(f(k / steps))
        if depth < 12 and abs(np.angle(val / prev_val)) > np.pi / 4:
            return _branch_sqrt(f, 2 * steps, depth + 1)
        r = np.sqrt(val)
        if abs(r - prev_root) > abs(-r - prev_root):
            r = -r
        prev_val, prev_root = val, r
    return prev_root


def fcs(T2: np.ndarray, Ws, steps: int = 8, tol: float = 1e-12) -> complex:
    """Tr[prod_r exp(sum_ab W_r,ab w_a w_b) rho] = sqrt det[T2 + (I - T2) prod_r e^{2 W_r}]."""
    T2 = np.asarray(T2, complex)
    Ws = [np.asarray(W, complex) for W in Ws]
    for W in Ws:
        if np.abs(W + W.T).max() > tol * max(1.0, np.abs(W).max()):
            raise ValueError("each W must be antisymmetric")
    N = T2.shape[0]
    I = np.eye(N)

    def det_at(s: float) -> complex:
        P = I.astype(complex)
        for W in Ws:
            P = P @ sla.expm(2 * s * W)
        return np.linalg.det(T2 + (I - T2) @ P)

    return _branch_sqrt(det_at, steps)


def number_weight(L: int, coeffs) -> tuple[np.ndarray, complex]:
    """W and constant c with sum_j coeffs[j] n_j = c + sum_ab W_ab w_a w_b."""
    W = np.zeros((2 * L, 2 * L), complex)
    c = 0.0
    for j, x in enumerate(coeffs):
        if x == 0:
            continue
        W[j, L + j] += -0.5j * x
        W[L + j, j] += 0.5j * x
        c += 0.5 * x
    return W, c


# -- observables -------------------------------------------------------------

def occupation(T2: np.ndarray, j: int) -> complex:
    """<n_j> = 1/2 - i T_{j, L+j} (0-based site)."""
    L = T2.shape[0] // 2
    return 0.5 - 1j * T2[j, L + j]


def n1_nL(T2: np.ndarray, T4_entry: complex) -> complex:
    """<n_1 n_L> from T2 and the single order-4 entry T_{1, L, L+1, 2L}."""
    L = T2.shape[0] // 2
    return 0.25 - 0.5j * (T2[0, L] + T2[L - 1, 2 * L - 1]) + T4_entry
