"""Brute-force reference: dense Liouvillian on the full 4^L operator space.

Jordan-Wigner convention: a_j = (prod_{k<j} Z_k) sigma^-_j, site 1 is the
leftmost tensor factor, basis state |1> is occupied.  Density matrices are
vectorized row-major, |m><n| -> |m> (x) |n>, so that vec(A rho B) =
(A (x) B^T) vec(rho).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg as sla

from .model import FermionChainModel, InitialState

__all__ = [
    "SizeGuardError",
    "DenseLiouvillian",
    "annihilators",
    "majoranas",
    "build_hamiltonian",
    "build_jump_operators",
    "build_liouvillian",
    "initial_density",
    "corr_tensor",
    "exact_corr",
    "parity_blocks",
]

MAX_L = 6

_SM = np.array([[0.0, 1.0], [0.0, 0.0]])  # |1> -> |0>
_Z = np.diag([1.0, -1.0])
_I2 = np.eye(2)


class SizeGuardError(RuntimeError):
    pass


def _guard(L: int, limit: int = MAX_L):
    if L > limit:
        raise SizeGuardError(f"dense oracle limited to L <= {limit} (got L={L})")


def annihilators(L: int) -> list[np.ndarray]:
    ops = []
    for j in range(L):
        factors = [_Z] * j + [_SM] + [_I2] * (L - j - 1)
        ops.append(reduce(np.kron, factors).astype(complex))
    return ops


def majoranas(L: int) -> np.ndarray:
    """Stack of the 2L Majorana matrices, shape (2L, 2^L, 2^L)."""
    a = annihilators(L)
    s = 1.0 / np.sqrt(2.0)
    w = [s * (x + x.conj().T) for x in a] + [1j * s * (x - x.conj().T) for x in a]
    return np.array(w)


def build_hamiltonian(model: FermionChainModel) -> np.ndarray:
    L = model.L
    a = annihilators(L)
    ad = [x.conj().T for x in a]
    H = np.zeros((2**L, 2**L), complex)
    for i in range(L):
        for j in range(L):
            if model.h[i, j] != 0:
                H += model.h[i, j] * ad[i] @ a[j]
            if model.delta[i, j] != 0:
                H += model.delta[i, j] * a[i] @ a[j]
            if model.delta[j, i] != 0:
                H += np.conj(model.delta[j, i]) * ad[i] @ ad[j]
    return H


def build_jump_operators(model: FermionChainModel) -> list[np.ndarray]:
    L = model.L
    a = annihilators(L)
    ops = []
    for l, g in model.linear:
        ops.append(sum(l[j] * a[j] + g[j] * a[j].conj().T for j in range(L)))
    if model.quadratic:
        w = majoranas(L)
        for U in model.quadratic:
            ops.append(np.einsum("ab,aij,bjk->ik", U, w, w))
    return ops


@dataclass(frozen=True, eq=False)
class DenseLiouvillian:
    L: int
    H: np.ndarray
    jumps: tuple
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return 2**self.L

    def evolve(self, rho0: np.ndarray, t: float) -> np.ndarray:
        d = self.dim
        v = sla.expm(self.matrix * t) @ rho0.reshape(-1)
        return v.reshape(d, d)

    def steady_state(self) -> np.ndarray:
        """Trace-normalized null vector of the Liouvillian (assumes uniqueness)."""
        _, s, vh = np.linalg.svd(self.matrix)
        rho = vh[-1].conj().reshape(self.dim, self.dim)
        rho = rho / np.trace(rho)
        return 0.5 * (rho + rho.conj().T)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def build_liouvillian(model: FermionChainModel, max_L: int = MAX_L) -> DenseLiouvillian:
    _guard(model.L, max_L)
    H = build_hamiltonian(model)
    jumps = build_jump_operators(model)
    d = H.shape[0]
    I = np.eye(d)
    Lv = -1j * (np.kron(H, I) - np.kron(I, H.T))
    for J in jumps:
        JdJ = J.conj().T @ J
        Lv += 2 * np.kron(J, J.conj()) - np.kron(JdJ, I) - np.kron(I, JdJ.T)
    return DenseLiouvillian(model.L, H, tuple(jumps), Lv)


def initial_density(state: InitialState, L: int) -> np.ndarray:
    d = 2**L
    if state.kind == "vacuum":
        psi = np.zeros(d, complex)
        psi[0] = 1
    elif state.kind == "full":
        psi = np.zeros(d, complex)
        psi[-1] = 1
    elif state.kind == "ghz":
        psi = np.zeros(d, complex)
        psi[0] = psi[-1] = 1 / np.sqrt(2.0)
    elif state.kind == "dense":
        x = np.asarray(state.data, complex)
        if x.ndim == 2:
            return x
        psi = x / np.linalg.norm(x)
    else:
        raise ValueError(f"oracle cannot build a density matrix for {state.kind!r}")
    return np.outer(psi, psi.conj())


def _chain(w: np.ndarray, n: int) -> np.ndarray:
    """All ordered products w_{j1}...w_{jn}, shape (2L,)*n + (d, d)."""
    d = w.shape[-1]
    out = np.eye(d, dtype=complex)[None]
    for _ in range(n):
        out = np.einsum("Aij,bjk->Abik", out, w).reshape(-1, d, d)
    return out.reshape((w.shape[0],) * n + (d, d))


def corr_tensor(rho: np.ndarray, n: int, w: np.ndarray | None = None) -> np.ndarray:
    """Full tensor T_{j1..jn} = Tr[w_j1 ... w_jn rho]."""
    L = int(round(np.log2(rho.shape[0])))
    if w is None:
        w = majoranas(L)
    m = 2 * L
    d = rho.shape[0]
    if n == 0:
        return np.array(np.trace(rho))
    n1 = n // 2
    left = _chain(w, n1).reshape(-1, d, d)
    right = (_chain(w, n - n1).reshape(-1, d, d) @ rho)
    # Tr[A B] = sum_ij A_ij B_ji
    T = left.reshape(left.shape[0], -1) @ right.transpose(0, 2, 1).reshape(right.shape[0], -1).T
    return T.reshape((m,) * n)


def exact_corr(lv: DenseLiouvillian, state0, indices, t: float) -> complex:
    """Tr[w_j1 ... w_jn rho(t)] for 0-based Majorana indices."""
    rho0 = state0 if isinstance(state0, np.ndarray) else initial_density(state0, lv.L)
    rho = lv.evolve(rho0, t) if t != 0 else rho0
    w = majoranas(lv.L)
    op = reduce(np.matmul, [w[j] for j in indices], np.eye(lv.dim, dtype=complex))
    return complex(np.trace(op @ rho))


def parity_blocks(lv: DenseLiouvillian) -> tuple[np.ndarray, np.ndarray]:
    """Liouvillian restricted to even and odd total-parity operator subspaces.

    |m><n| has parity (-1)^(N_m + N_n); even operators commute with the
    fermion parity.
    """
    d = lv.dim
    N = np.array([bin(k).count("1") for k in range(d)])
    par = (N[:, None] + N[None, :]).reshape(-1) % 2
    ev = np.flatnonzero(par == 0)
    od = np.flatnonzero(par == 1)
    M = lv.matrix
    return M[np.ix_(ev, ev)], M[np.ix_(od, od)]
