"""Open fermionic chain models: Hamiltonian, dissipators and initial states.

Conventions
-----------
Majorana operators use the half-normalization

    w_s     = (a_s + a_s^dag) / sqrt(2)
    w_{L+s} = i (a_s - a_s^dag) / sqrt(2)

so that {w_i, w_j} = delta_ij and w_j^2 = 1/2.  Internally every index is
0-based; files and logs use 1-based site and Majorana labels.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SQRT_HALF = 1.0 / np.sqrt(2.0)

__all__ = [
    "ModelError",
    "FermionChainModel",
    "ValidationReport",
    "InitialState",
    "build_preset_chain",
    "validate",
    "majorana_of_annihilation",
    "model_from_dict",
    "model_to_dict",
    "load_model",
]


class ModelError(ValueError):
    """Raised for malformed or inconsistent model data."""


@dataclass(frozen=True)
class ValidationReport:
    L: int
    herm_residual: float
    delta_antisym_residual: float
    delta_correction: float
    dims_ok: bool
    fatal: bool
    messages: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "L": self.L,
            "herm_residual": self.herm_residual,
            "delta_antisym_residual": self.delta_antisym_residual,
            "delta_correction": self.delta_correction,
            "dims_ok": self.dims_ok,
            "fatal": self.fatal,
            "messages": list(self.messages),
        }


@dataclass(frozen=True, eq=False)
class FermionChainModel:
    """Quadratic Hamiltonian plus linear and Majorana-quadratic dissipators.

    ``linear`` holds pairs ``(l, g)`` giving L = sum_j l_j a_j + g_j a_j^dag.
    ``quadratic`` holds 2L x 2L matrices U with L = sum U_ab w_a w_b; they are
    kept exactly as supplied (no antisymmetrization).
    """

    L: int
    h: np.ndarray
    delta: np.ndarray
    linear: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    quadratic: tuple[np.ndarray, ...] = ()
    report: ValidationReport | None = field(default=None, repr=False)

    @classmethod
    def create(
        cls,
        L: int,
        h=None,
        delta=None,
        linear: Sequence = (),
        quadratic: Sequence = (),
        *,
        auto_fix: bool = False,
        tol: float = 1e-10,
    ) -> "FermionChainModel":
        if int(L) != L or L < 1:
            raise ModelError(f"L must be a positive integer, got {L!r}")
        L = int(L)
        h = np.zeros((L, L), complex) if h is None else np.array(h, dtype=complex)
        delta = (
            np.zeros((L, L), complex) if delta is None else np.array(delta, dtype=complex)
        )
        lin = tuple(
            (np.array(l, dtype=complex).reshape(-1), np.array(g, dtype=complex).reshape(-1))
            for l, g in linear
        )
        quad = tuple(np.array(U, dtype=complex) for U in quadratic)
        raw = cls(L, h, delta, lin, quad)
        rep = validate(raw, auto_fix=auto_fix, tol=tol)
        if rep.fatal:
            raise ModelError("; ".join(rep.messages))
        h_fixed = 0.5 * (h + h.conj().T)
        d_fixed = 0.5 * (delta - delta.T)
        return cls(L, h_fixed, d_fixed, lin, quad, rep)

    @property
    def n_majorana(self) -> int:
        return 2 * self.L

    @property
    def is_quadratic(self) -> bool:
        """True when the Liouvillian has no Majorana-quadratic dissipators."""
        return len(self.quadratic) == 0

    def U_a(self) -> list[np.ndarray]:
        return [U - U.T for U in self.quadratic]


def validate(model: FermionChainModel, auto_fix: bool = False, tol: float = 1e-10) -> ValidationReport:
    """Check dimensions, Hermiticity of h and antisymmetry of delta."""
    L = model.L
    msgs: list[str] = []
    dims_ok = True
    if model.h.shape != (L, L):
        dims_ok = False
        msgs.append(f"h has shape {model.h.shape}, expected {(L, L)}")
    if model.delta.shape != (L, L):
        dims_ok = False
        msgs.append(f"delta has shape {model.delta.shape}, expected {(L, L)}")
    for mu, (l, g) in enumerate(model.linear):
        if l.shape != (L,) or g.shape != (L,):
            dims_ok = False
            msgs.append(f"linear dissipator {mu + 1}: vectors must have length {L}")
    for mu, U in enumerate(model.quadratic):
        if U.shape != (2 * L, 2 * L):
            dims_ok = False
            msgs.append(f"quadratic dissipator {mu + 1}: U must be {2 * L}x{2 * L}")
    if not dims_ok:
        return ValidationReport(L, np.nan, np.nan, np.nan, False, True, tuple(msgs))

    # distance to the Hermitian / antisymmetric part, same convention as d_corr
    herm = float(np.linalg.norm(0.5 * (model.h - model.h.conj().T)))
    d_anti = float(np.linalg.norm(0.5 * (model.delta + model.delta.T)))
    d_corr = float(np.linalg.norm(model.delta - 0.5 * (model.delta - model.delta.T)))
    fatal = False
    scale = max(1.0, float(np.linalg.norm(model.h)))
    if herm > tol * scale:
        if auto_fix:
            msgs.append(f"h not Hermitian (residual {herm:.3g}); replaced by (h + h^dag)/2")
        else:
            fatal = True
            msgs.append(f"h not Hermitian: residual {herm:.6g}")
    if d_corr > 0:
        msgs.append(f"delta antisymmetrized; correction norm {d_corr:.6g}")
    return ValidationReport(L, herm, d_anti, d_corr, True, fatal, tuple(msgs))


def majorana_of_annihilation(L: int, site: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient vectors c, d with a_site = c.w and a_site^dag = d.w."""
    c = np.zeros(2 * L, complex)
    c[site] = SQRT_HALF
    c[L + site] = -1j * SQRT_HALF
    return c, c.conj()


def _pair_U(L: int, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """U for the product (c1.w)(c2.w), antisymmetrized.

    Only valid when c1 and c2 act on different sites, where the symmetric part
    would multiply anticommuting pairs and vanish anyway.
    """
    U = np.outer(c1, c2)
    return 0.5 * (U - U.T)


def build_preset_chain(L: int, J: float, gamma_l: float, gamma_g: float, gamma_t: float = 0.0) -> FermionChainModel:
    """Open chain with hopping J, loss at site 1, gain at site L, optional pair terms.

    The pair dissipators are sqrt(gamma_t) a_1 a_L and sqrt(gamma_t) a_1^dag a_L^dag.
    """
    if int(L) != L or L < 2:
        raise ModelError(f"preset chain needs integer L >= 2, got {L!r}")
    for name, val in (("gamma_l", gamma_l), ("gamma_g", gamma_g), ("gamma_t", gamma_t)):
        if val < 0:
            raise ModelError(f"{name} must be non-negative, got {val}")
    L = int(L)
    h = np.zeros((L, L), complex)
    for j in range(L - 1):
        h[j, j + 1] = h[j + 1, j] = J
    linear = []
    if gamma_l > 0:
        l = np.zeros(L, complex)
        l[0] = np.sqrt(gamma_l)
        linear.append((l, np.zeros(L, complex)))
    if gamma_g > 0:
        g = np.zeros(L, complex)
        g[L - 1] = np.sqrt(gamma_g)
        linear.append((np.zeros(L, complex), g))
    quadratic = []
    if gamma_t > 0:
        a1, a1d = majorana_of_annihilation(L, 0)
        aL, aLd = majorana_of_annihilation(L, L - 1)
        s = np.sqrt(gamma_t)
        quadratic.append(s * _pair_U(L, a1, aL))
        quadratic.append(s * _pair_U(L, a1d, aLd))
    return FermionChainModel.create(L, h, None, linear, quadratic)


@dataclass(frozen=True, eq=False)
class InitialState:
    """Initial state description.

    kind is one of ``vacuum``, ``full``, ``ghz``, ``gaussian`` (data = T2) or
    ``dense`` (data = state vector or density matrix in the 2^L basis).
    """

    kind: str
    data: Any = None

    KINDS = ("vacuum", "full", "ghz", "gaussian", "dense")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelError(f"unknown initial state {self.kind!r}")

    @property
    def is_gaussian(self) -> bool:
        return self.kind in ("vacuum", "full", "gaussian")


# -- JSON -------------------------------------------------------------------

def _cplx(x, rank: int) -> np.ndarray:
    """Decode nested lists of numbers or [re, im] pairs into a complex array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == rank + 1 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    if a.ndim != rank:
        raise ModelError(f"expected a rank-{rank} array, got shape {a.shape}")
    return a.astype(complex)


def _enc(a: np.ndarray) -> list:
    a = np.asarray(a, complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def model_from_dict(d: dict) -> FermionChainModel:
    if "L" not in d:
        raise ModelError("model needs an 'L' field")
    try:
        if "h" not in d and ("J" in d or "gamma_l" in d):
            return build_preset_chain(
                d["L"], float(d.get("J", 1.0)), float(d.get("gamma_l", 0.0)),
                float(d.get("gamma_g", 0.0)), float(d.get("gamma_t", 0.0)),
            )
        L = int(d["L"])
        h = _cplx(d["h"], 2) if "h" in d else None
        delta = _cplx(d["delta"], 2) if "delta" in d else None
        linear = [
            (_cplx(e.get("l", [0.0] * L), 1), _cplx(e.get("g", [0.0] * L), 1))
            for e in d.get("linear", [])
        ]
        quadratic = [_cplx(e["U"], 2) for e in d.get("quadratic", [])]
        return FermionChainModel.create(
            L, h, delta, linear, quadratic, auto_fix=bool(d.get("auto_fix", False))
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model: {exc}") from exc


def model_to_dict(model: FermionChainModel) -> dict:
    return {
        "L": model.L,
        "h": _enc(model.h),
        "delta": _enc(model.delta),
        "linear": [{"l": _enc(l), "g": _enc(g)} for l, g in model.linear],
        "quadratic": [{"U": _enc(U)} for U in model.quadratic],
    }


def load_model(path: str | Path) -> FermionChainModel:
    with open(path) as fh:
        d = json.load(fh)
    return model_from_dict(d.get("model", d))
