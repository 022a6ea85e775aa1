"""Structure matrices derived from a chain model and the rapid spectrum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FermionChainModel

__all__ = [
    "NonDiagonalizable",
    "StructureMatrices",
    "RapidSpectrum",
    "build_structure",
    "build_Fp",
    "rapid_spectrum",
    "sort_key",
]


class NonDiagonalizable(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    L: int
    M_l: np.ndarray
    M_g: np.ndarray
    M_c: np.ndarray
    A: np.ndarray
    B_a: np.ndarray
    B_at: np.ndarray
    blocks: dict
    F_A: np.ndarray
    F_B: np.ndarray
    F1: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    f0: float

    def Fp(self, p: int = 1) -> np.ndarray:
        return build_Fp(self.blocks, p)

    def as_dict(self) -> dict:
        names = ["M_l", "M_g", "M_c", "A", "B_a", "B_at", "F_A", "F_B", "F1", "X", "Y", "Q"]
        out = {k: getattr(self, k) for k in names}
        out["F_p+1"] = self.Fp(1)
        out["F_p-1"] = self.Fp(-1)
        return out


def build_Fp(blocks: dict, p: int) -> np.ndarray:
    """Assemble the 4L x 4L antisymmetric matrix F_p from its six blocks."""
    F11, F12, F22 = blocks["F11"], blocks["F12"], blocks["F22"]
    F13, F14, F23 = p * blocks["F13"], p * blocks["F14"], p * blocks["F23"]
    return 0.5 * np.block(
        [
            [F11, F12, F13, F14],
            [-F12.T, F22, F23, -F13.conj().T],
            [-F13.T, F23.conj(), F22.conj(), -F12.conj().T],
            [F14.conj(), F13.conj(), F12.conj(), F11.conj()],
        ]
    )


def build_structure(model: FermionChainModel) -> StructureMatrices:
    L = model.L
    h, delta = model.h, model.delta
    M_l = np.zeros((L, L), complex)
    M_g = np.zeros((L, L), complex)
    M_c = np.zeros((L, L), complex)
    for l, g in model.linear:
        M_l += np.outer(l.conj(), l)
        M_g += np.outer(g.conj(), g)
        M_c += np.outer(l.conj(), g)

    A = h - 1j * (M_l - M_g.T)
    B_a = delta + 0.5j * (M_c.conj() - M_c.conj().T)
    B_at = delta.conj().T + 0.5j * (M_c.T - M_c)

    # F13, F14, F23 are stored at p = 1
    blocks = {
        "F11": -0.5j * (A - A.T) - 1j * (B_a + B_at),
        "F12": -0.5 * (A + A.T) - (B_a - B_at),
        "F22": -0.5j * (A - A.T) + 1j * (B_a + B_at),
        "F13": M_g.T - M_l.T + M_c.conj() - M_c.T,
        "F14": 1j * (M_g.T + M_l.T + M_c.conj() + M_c.T),
        "F23": 1j * (M_g.T + M_l.T - M_c.conj() - M_c.T),
    }
    F_A = np.block([[blocks["F11"], blocks["F12"]], [-blocks["F12"].T, blocks["F22"]]])
    F_B = np.block([[blocks["F14"], blocks["F13"]], [-blocks["F13"].conj().T, blocks["F23"]]])
    F1 = F_A + 1j * F_B

    X1 = 0.5 * (M_l + M_g.T - 1j * h)
    X2 = 0.5 * (M_c + M_c.T) + 1j * delta.conj()
    X = np.block([[X1, 1j * X2], [-1j * X2.conj(), X1.conj()]])
    Y = np.block([[-1j * M_c.conj(), M_l.T], [M_g.T, 1j * M_c.T]])
    I = np.eye(L)
    Q = np.block([[I, 1j * I], [1j * I, I]]) / np.sqrt(2.0)
    f0 = float(-np.trace(M_l + M_g).real)
    return StructureMatrices(L, M_l, M_g, M_c, A, B_a, B_at, blocks, F_A, F_B, F1, X, Y, Q, f0)


def sort_key(z: complex, ndigits: int = 10) -> tuple:
    """Ordering key that is stable under round-off noise."""
    return (round(float(np.real(z)), ndigits) + 0.0, round(float(np.imag(z)), ndigits) + 0.0)


@dataclass(frozen=True, eq=False)
class RapidSpectrum:
    alphas: np.ndarray
    eigvecs: np.ndarray
    condition: float


def rapid_spectrum(sm: StructureMatrices, max_condition: float = 1e10) -> RapidSpectrum:
    """Eigenvalues of X, sorted by (Re asc, Im asc)."""
    w, V = np.linalg.eig(sm.X)
    order = sorted(range(len(w)), key=lambda k: sort_key(w[k]))
    w, V = w[order], V[:, order]
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > max_condition:
        raise NonDiagonalizable(f"X eigenvector condition number {cond:.3g} exceeds {max_condition:.1g}")
    return RapidSpectrum(w, V, cond)
