"""Index permutations, antisymmetric projection and reduced (sorted) sectors.

Full tensors of order n are numpy arrays of shape (2L,)*n, with the first axis
the most significant digit of the linear index.  Reduced tensors keep only
entries with strictly increasing indices, listed in lexicographic order.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ReduceLossy",
    "apply_Rk",
    "apply_Rk_inverse",
    "apply_R2m",
    "apply_R2m_tensor",
    "apply_RR",
    "place_pairs",
    "antisym_project",
    "perm_sign",
    "combinations",
    "rank",
    "unrank",
    "reduce",
    "expand",
    "Sector",
    "sector",
]


class ReduceLossy(ValueError):
    pass


def _order(v: np.ndarray) -> int:
    return v.ndim


def apply_Rk(k: int, v: np.ndarray) -> np.ndarray:
    """(R_k (x) I) v: result[j1..jn] = v[jk, j1, .., j_{k-1}, j_{k+1}, ..]  (k is 1-based)."""
    n = _order(v)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for order {n}")
    return np.moveaxis(v, 0, k - 1)


def apply_Rk_inverse(k: int, v: np.ndarray) -> np.ndarray:
    return np.moveaxis(v, k - 1, 0)


def place_pairs(F: np.ndarray, w: np.ndarray, pairs) -> np.ndarray:
    """Sum over (s, k, sign) of sign * (F at slots s, k) (x) w on the other slots.

    The output entry is F[j_k, j_s] * w[rest], i.e. F's row index goes to
    slot k and its column index to slot s (both 1-based).
    """
    base = np.multiply.outer(F, w)
    out = np.zeros(base.shape, dtype=np.result_type(base, complex))
    for s, k, sign in pairs:
        out += sign * np.moveaxis(base, [0, 1], [k - 1, s - 1])
    return out


def _r2m_pairs(n: int):
    return [(s, k, (-1) ** (k - s)) for k in range(2, n + 1) for s in range(1, k)]


def apply_R2m(m: int, w: np.ndarray, F: np.ndarray) -> np.ndarray:
    """bold-R_{2m} (vec(F) (x) w) for an order 2m-2 tensor w."""
    if m < 1:
        raise ValueError("m must be >= 1")
    w = np.asarray(w)
    if w.ndim != 2 * m - 2:
        raise ValueError(f"w must have order {2 * m - 2}, got {w.ndim}")
    if w.ndim and w.shape[0] != F.shape[0]:
        raise ValueError("dimension mismatch between F and w")
    return place_pairs(F, w, _r2m_pairs(2 * m))


def apply_R2m_tensor(v: np.ndarray, nslots: int | None = None) -> np.ndarray:
    """bold-R_n applied to the first ``nslots`` axes of v (default: all)."""
    n = v.ndim if nslots is None else nslots
    out = np.zeros(v.shape, dtype=np.result_type(v, complex))
    for s, k, sign in _r2m_pairs(n):
        out += sign * np.moveaxis(v, [0, 1], [k - 1, s - 1])
    return out


def apply_RR(m: int, l: int, v: np.ndarray) -> np.ndarray:
    """Blackboard-R_{(2m, 2l+2)} = prod_{r=0}^{m-l-1} (I_{2r} (x) bold-R_{2m-2r}) applied to v."""
    n = v.ndim
    if n != 2 * m:
        raise ValueError(f"expected order {2 * m}, got {n}")
    out = v
    for r in range(m - l - 1, -1, -1):
        lead = 2 * r
        moved = np.moveaxis(out, list(range(lead)), list(range(n - lead, n))) if lead else out
        moved = apply_R2m_tensor(moved, n - lead)
        out = np.moveaxis(moved, list(range(n - lead, n)), list(range(lead))) if lead else moved
    return out


def perm_sign(p) -> int:
    p = list(p)
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return sign


@lru_cache(maxsize=None)
def _perms(n: int):
    return tuple((p, perm_sign(p)) for p in itertools.permutations(range(n)))


def antisym_project(v: np.ndarray) -> np.ndarray:
    """(1/n!) sum_sigma sgn(sigma) v_{sigma(j)}."""
    n = v.ndim
    if n <= 1:
        return v.copy()
    out = np.zeros(v.shape, dtype=v.dtype)
    for p, s in _perms(n):
        out += s * np.transpose(v, p)
    return out / math.factorial(n)


# -- combinations ------------------------------------------------------------

@lru_cache(maxsize=None)
def combinations(N: int, n: int) -> np.ndarray:
    """All strictly increasing n-tuples over range(N), lexicographic, shape (C(N,n), n)."""
    arr = np.array(list(itertools.combinations(range(N), n)), dtype=np.int64)
    arr = arr.reshape(math.comb(N, n), n)
    arr.setflags(write=False)
    return arr


def rank(comb, N: int) -> int:
    """Lexicographic rank of a sorted combination (combinatorial number system)."""
    n = len(comb)
    r, prev = 0, -1
    for i, c in enumerate(comb):
        for v in range(prev + 1, c):
            r += math.comb(N - v - 1, n - i - 1)
        prev = c
    return r


def unrank(r: int, N: int, n: int) -> tuple:
    out, v = [], 0
    for i in range(n):
        while True:
            cnt = math.comb(N - v - 1, n - i - 1)
            if r < cnt:
                break
            r -= cnt
            v += 1
        out.append(v)
        v += 1
    return tuple(out)


def reduce(v: np.ndarray, tol: float = 1e-10, check: bool = True) -> np.ndarray:
    """Entries at strictly increasing indices.

    ``check=False`` skips the antisymmetry test, for correlation tensors whose
    repeated-index entries carry w^2 = 1/2 but whose distinct-index part is
    antisymmetric.
    """
    n, N = v.ndim, (v.shape[0] if v.ndim else 0)
    if check and n >= 2:
        resid = np.abs(v - antisym_project(v)).max()
        if resid > tol * max(1.0, np.abs(v).max()):
            raise ReduceLossy(f"tensor is not antisymmetric (residual {resid:.3g})")
    if n == 0:
        return np.asarray(v).reshape(1)
    c = combinations(N, n)
    return v[tuple(c.T)]


def expand(r: np.ndarray, N: int, n: int) -> np.ndarray:
    r = np.asarray(r)
    if n == 0:
        return r.reshape(())
    c = combinations(N, n)
    out = np.zeros((N,) * n, dtype=r.dtype)
    for p, s in _perms(n):
        out[tuple(c[:, p].T)] = s * r
    return out


# -- second-quantized action on reduced sectors -----------------------------

_popcount = np.bitwise_count


class Sector:
    """Reduced basis of order n over N Majorana labels.

    Antisymmetric order-n tensors are identified with n-particle states
    c^dag_{j1} ... c^dag_{jn}|0> (j sorted) of N auxiliary fermion modes.  A
    Kronecker-sum operator sum_k I (x) O (x) I then acts as sum_ab O_ab
    c^dag_a c_b, which gives the reduced matrix without touching (N)^n arrays.
    """

    def __init__(self, N: int, n: int):
        self.N, self.n = N, n
        self.combs = combinations(N, n)
        self.dim = len(self.combs)
        self.masks = (np.int64(1) << self.combs).sum(axis=1, dtype=np.int64)
        self._sorter = np.argsort(self.masks)
        self._sorted = self.masks[self._sorter]

    def rank_of(self, masks: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._sorted, masks)
        return self._sorter[pos]

    def one_body(self, O: np.ndarray) -> sp.csr_matrix:
        """Matrix of sum_ab O_ab c^dag_a c_b on this sector."""
        rows, cols, vals = [], [], []
        idx = np.arange(self.dim)
        m = self.masks
        for a, b in zip(*np.nonzero(O)):
            a, b = int(a), int(b)
            has_b = ((m >> b) & 1) == 1
            if a == b:
                sel = idx[has_b]
                rows.append(sel)
                cols.append(sel)
                vals.append(np.full(sel.size, O[a, b], dtype=complex))
                continue
            ok = has_b & (((m >> a) & 1) == 0)
            src = m[ok]
            s1 = _popcount(src & ((1 << b) - 1))
            mid = src ^ (1 << b)
            s2 = _popcount(mid & ((1 << a) - 1))
            sign = 1 - 2 * ((s1.astype(np.int64) + s2) & 1)
            rows.append(self.rank_of(mid | (1 << a)))
            cols.append(idx[ok])
            vals.append(O[a, b] * sign.astype(complex))
        return _assemble(rows, cols, vals, (self.dim, self.dim))

    def pair_creation(self, W: np.ndarray, lower: "Sector") -> sp.csr_matrix:
        """Matrix of sum_ab W_ab c^dag_a c^dag_b from ``lower`` (order n-2) to this sector."""
        rows, cols, vals = [], [], []
        idx = np.arange(lower.dim)
        m = lower.masks
        for a, b in zip(*np.nonzero(W)):
            a, b = int(a), int(b)
            if a == b:
                continue
            ok = (((m >> a) & 1) == 0) & (((m >> b) & 1) == 0)
            src = m[ok]
            s1 = _popcount(src & ((1 << b) - 1))
            mid = src | (1 << b)
            s2 = _popcount(mid & ((1 << a) - 1))
            sign = 1 - 2 * ((s1.astype(np.int64) + s2) & 1)
            rows.append(self.rank_of(mid | (1 << a)))
            cols.append(idx[ok])
            vals.append(W[a, b] * sign.astype(complex))
        return _assemble(rows, cols, vals, (self.dim, lower.dim))


def _assemble(rows, cols, vals, shape) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix(shape, dtype=complex)
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )
    return M.tocsr()


@lru_cache(maxsize=64)
def sector(N: int, n: int) -> Sector:
    return Sector(N, n)
