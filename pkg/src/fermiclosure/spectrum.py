"""Liouvillian spectra from the rapid spectrum and from sector generators.

Quadratic Liouvillians: every eigenvalue is a subset sum -2 sum_s nu_s alpha_s
over nu in {0,1}^{2L}, with parity (-1)^{|nu|}.  Closed quartic models: the
even-parity spectrum is the union of eig(Fbar_{M,n}) over even n.  The odd-n
union is only conjectured to give the odd-parity part, so those entries are
flagged and the comparison against the oracle is reported, never assumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .structure import RapidSpectrum, sort_key

__all__ = [
    "EnumerationBudgetExceeded",
    "SpectrumEntry",
    "SpectrumResult",
    "MatchReport",
    "quadratic_spectrum",
    "quartic_spectrum",
    "match_spectra",
    "hausdorff",
    "oracle_spectrum",
]

DEFAULT_BUDGET = 2 ** 24
_PARITIES = ("even", "odd", "all")


class EnumerationBudgetExceeded(MemoryError):
    pass


@dataclass(frozen=True)
class SpectrumEntry:
    value: complex
    parity: str  # even | odd
    source: str  # analytic | sector | oracle
    label: int  # nu bitmask for analytic entries, n for sector entries
    multiplicity: int = 1
    conjectured: bool = False


@dataclass
class SpectrumResult:
    entries: list
    meta: dict = field(default_factory=dict)

    def values(self, parity: str = "all") -> np.ndarray:
        """Eigenvalues repeated by multiplicity."""
        out = [e.value for e in self.entries for _ in range(e.multiplicity)
               if parity == "all" or e.parity == parity]
        return np.array(out, dtype=complex)

    def rows(self) -> list[tuple]:
        """CSV rows (re, im, parity, sector, multiplicity, conjectured)."""
        return [
            (e.value.real, e.value.imag, e.parity,
             e.label if e.source != "analytic" else -1, e.multiplicity, e.conjectured)
            for e in self.entries
        ]


def _snap(v: complex, rtol: float = 1e-13) -> complex:
    """Zero out round-off-sized real or imaginary parts."""
    eps = rtol * max(1.0, abs(v))
    return complex(0.0 if abs(v.real) < eps else v.real, 0.0 if abs(v.imag) < eps else v.imag)


def _merge(values, parities, labels, source, conjectured, ndigits: int) -> list[SpectrumEntry]:
    groups: dict = {}
    for v, p, lab, c in zip(values, parities, labels, conjectured):
        v = _snap(complex(v))
        key = (sort_key(v, ndigits), str(p), lab if source == "sector" else None)
        if key in groups:
            g = groups[key]
            g[3] += 1
        else:
            groups[key] = [complex(v), str(p), int(lab), 1, bool(c)]
    ents = [SpectrumEntry(v, p, source, lab, mult, c) for v, p, lab, mult, c in groups.values()]
    return _sorted(ents)


def _sorted(ents: list) -> list:
    # Re descending, Im ascending
    return sorted(ents, key=lambda e: (-sort_key(e.value)[0], sort_key(e.value)[1], e.label))


def quadratic_spectrum(
    rs: RapidSpectrum,
    parity: str = "all",
    budget: int = DEFAULT_BUDGET,
    truncate: int | None = None,
    ndigits: int = 9,
) -> SpectrumResult:
    """Subset sums eta_nu = -2 sum_s nu_s alpha_s with parity labels.

    ``truncate`` keeps only the slowest-decaying entries when 2^{2L}
    exceeds ``budget``; without it the budget is a hard limit.
    """
    if parity not in _PARITIES:
        raise ValueError(f"parity must be one of {_PARITIES}")
    alphas = np.asarray(rs.alphas, complex)
    n = alphas.size
    if 2 ** n > budget and truncate is None:
        raise EnumerationBudgetExceeded(f"2^{n} subset sums exceed the budget {budget}")

    vals = np.zeros(1, complex)
    masks = np.zeros(1, np.int64)
    for s, a in enumerate(alphas):
        vals = np.concatenate([vals, vals - 2 * a])
        masks = np.concatenate([masks, masks | (np.int64(1) << s)])
        if truncate is not None and vals.size > truncate:
            # Re(alpha) >= 0, so dropping the fastest-decaying partial sums is safe
            keep = np.argsort(-vals.real, kind="stable")[:truncate]
            vals, masks = vals[keep], masks[keep]
    pops = np.bitwise_count(masks) if masks.size else masks
    pars = np.where(pops % 2 == 0, "even", "odd")
    if parity != "all":
        sel = pars == parity
        vals, masks, pars = vals[sel], masks[sel], pars[sel]
    vals = np.where(masks == 0, 0.0, vals)  # nu = 0 gives exactly zero
    ents = _merge(vals, pars, masks, "analytic", [False] * vals.size, ndigits)
    return SpectrumResult(ents, {"route": "analytic", "n_alpha": n, "truncated": truncate is not None})


def quartic_spectrum(gens: dict, parities=("even",), ndigits: int = 9) -> SpectrumResult:
    """Union of eig(Fbar_{M,n}) over the generated orders with the requested parities."""
    want = set(parities)
    if "all" in want:
        want = {"even", "odd"}
    ents = []
    for n in sorted(gens):
        p = "even" if n % 2 == 0 else "odd"
        if p not in want:
            continue
        F = gens[n].dense_F()
        ev = np.zeros(1, complex) if n == 0 else np.linalg.eigvals(F)
        ents += _merge(ev, [p] * ev.size, [n] * ev.size, "sector", [p == "odd"] * ev.size, ndigits)
    return SpectrumResult(_sorted(ents), {"route": "sector", "orders": sorted(gens)})


def oracle_spectrum(lv, parity: str = "all", ndigits: int = 9) -> SpectrumResult:
    """Dense Liouvillian eigenvalues split by operator parity."""
    from .oracle import parity_blocks

    ev_even, ev_odd = (np.linalg.eigvals(B) for B in parity_blocks(lv))
    ents = []
    for p, ev in (("even", ev_even), ("odd", ev_odd)):
        if parity in ("all", p):
            ents += _merge(ev, [p] * ev.size, [-1] * ev.size, "oracle", [False] * ev.size, ndigits)
    return SpectrumResult(_sorted(ents), {"route": "oracle"})


@dataclass(frozen=True, eq=False)
class MatchReport:
    max_distance: float
    mean_distance: float
    n_left: int
    n_right: int
    unmatched: int
    pairs: np.ndarray

    def ok(self, tol: float) -> bool:
        return self.unmatched == 0 and self.max_distance <= tol


def match_spectra(a, b) -> MatchReport:
    """Optimal one-to-one assignment between two eigenvalue multisets."""
    a = np.asarray(a, complex).ravel()
    b = np.asarray(b, complex).ravel()
    if a.size == 0 or b.size == 0:
        return MatchReport(np.inf, np.inf, a.size, b.size, max(a.size, b.size), np.zeros((0, 2), int))
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    d = cost[r, c]
    return MatchReport(
        float(d.max()), float(d.mean()), a.size, b.size, abs(a.size - b.size), np.stack([r, c], 1)
    )


def hausdorff(a, b) -> float:
    a = np.asarray(a, complex).ravel()
    b = np.asarray(b, complex).ravel()
    D = np.abs(a[:, None] - b[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
