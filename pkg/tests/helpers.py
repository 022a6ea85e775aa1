"""Dense reference operators and random models shared by the tests."""
from functools import reduce as _fold

import numpy as np

from fermiclosure.model import FermionChainModel, InitialState
from fermiclosure import oracle


# -- dense permutation operators (small d only) -----------------------------

def eye(d, n):
    return np.eye(d**n)


def swap(d):
    R = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            R[b * d + a, a * d + b] = 1
    return R


def embed(M, d, left, right):
    return np.kron(np.kron(eye(d, left), M), eye(d, right))


def dense_Rk(k, d):
    """R_k = prod_{l=0}^{k-2} (I_{k-2-l} (x) R (x) I_l), left to right; R_1 = I."""
    if k == 1:
        return eye(d, 1)
    R = swap(d)
    return _fold(np.matmul, [embed(R, d, k - 2 - l, l) for l in range(k - 1)], eye(d, k))


def dense_bold_R(n, d):
    out = np.zeros((d**n, d**n))
    for k in range(1, n + 1):
        for s in range(1, k):
            out += (-1) ** (k - s) * embed(dense_Rk(s, d), d, 0, n - s) @ embed(dense_Rk(k, d), d, 0, n - k)
    return out


def dense_RR(m, l, d):
    """prod_{r=0}^{m-l-1} (I_{2r} (x) bold-R_{2m-2r}), left to right."""
    n = 2 * m
    mats = [embed(dense_bold_R(n - 2 * r, d), d, 2 * r, 0) for r in range(m - l)]
    return _fold(np.matmul, mats, eye(d, n))


def dense_PFA_product(n, d):
    """(1/n!) prod_{l=0}^{n} [sum_{s=1}^{n-l} (-1)^{s+1} I_l (x) R_s (x) I_{n-l-s}].

    The l = n factor is an empty sum; it is taken as the identity.
    """
    import math

    out = eye(d, n)
    for l in range(n):
        fac = sum((-1) ** (s + 1) * embed(dense_Rk(s, d), d, l, n - l - s) for s in range(1, n - l + 1))
        out = out @ fac
    return out / math.factorial(n)


def dense_PFA_def(n, d):
    import itertools
    import math

    from fermiclosure.combinatorics import perm_sign

    P = np.zeros((d**n, d**n))
    for idx in itertools.product(range(d), repeat=n):
        row = np.ravel_multi_index(idx, (d,) * n)
        for p in itertools.permutations(range(n)):
            col = np.ravel_multi_index(tuple(idx[q] for q in p), (d,) * n)
            P[row, col] += perm_sign(p)
    return P / math.factorial(n)


def tensor_op(M, v):
    """Apply a dense (d^n x d^n) matrix to an order-n tensor."""
    return (M @ v.reshape(-1)).reshape(v.shape)


# -- random models -----------------------------------------------------------

def random_quadratic_model(L, rng, n_linear=2, pairing=True):
    h = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    h = h + h.conj().T
    delta = None
    if pairing:
        delta = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
        delta = delta - delta.T
    lin = [
        (rng.normal(size=L) + 1j * rng.normal(size=L), rng.normal(size=L) + 1j * rng.normal(size=L))
        for _ in range(n_linear)
    ]
    return FermionChainModel.create(L, h, delta, lin, [])


def random_closed_model(L, rng, scale=0.4, diag=True):
    """Linear part plus one quadratic dissipator with U_a purely imaginary (closed)."""
    base = random_quadratic_model(L, rng, n_linear=1)
    N = 2 * L
    A = rng.normal(size=(N, N))
    A = A - A.T
    U = 1j * scale * A
    if diag:
        U = U + np.diag(rng.normal(size=N) + 1j * rng.normal(size=N)) * scale
    return FermionChainModel.create(L, base.h, base.delta, list(base.linear), [U])


def random_gaussian_T2(L, rng, scale=0.6):
    """T2 = (I + e^{2 i K})^{-1} for a random real antisymmetric K."""
    import scipy.linalg as sla

    N = 2 * L
    K = rng.normal(size=(N, N)) * scale
    K = K - K.T
    return np.linalg.inv(np.eye(N) + sla.expm(2j * K))


def oracle_tensor(rho, n):
    return oracle.corr_tensor(rho, n)


STATES = ("vacuum", "full", "ghz")


def state(kind):
    return InitialState(kind)
