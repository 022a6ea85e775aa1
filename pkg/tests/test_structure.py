import numpy as np
import pytest

from fermiclosure.model import FermionChainModel, build_preset_chain
from fermiclosure.structure import NonDiagonalizable, build_structure, rapid_spectrum

from helpers import random_quadratic_model


def _single_mode(gamma=0.0):
    lin = [(np.array([np.sqrt(gamma)]), np.zeros(1))] if gamma else []
    return FermionChainModel.create(1, np.array([[1.0]]), None, lin, [])


def test_single_closed_mode():
    sm = build_structure(_single_mode())
    assert np.allclose(sm.F_A, [[0, -1], [1, 0]])
    assert np.allclose(sm.F_B, 0)
    assert np.allclose(sm.X, np.diag([-0.5j, 0.5j]))
    assert sm.f0 == 0


def test_single_lossy_mode_X():
    g = 0.4
    sm = build_structure(_single_mode(g))
    assert np.allclose(sm.X, np.diag([(g - 1j) / 2, (g + 1j) / 2]))
    rs = rapid_spectrum(sm)
    assert np.allclose(rs.alphas, [0.2 - 0.5j, 0.2 + 0.5j])


def test_no_dissipators():
    sm = build_structure(build_preset_chain(3, 1.0, 0.0, 0.0))
    assert np.all(sm.F_B == 0)
    assert np.array_equal(sm.F1, sm.F_A)
    assert sm.f0 == 0


def test_closed_mode_alpha_sum():
    rs = rapid_spectrum(build_structure(_single_mode()))
    assert np.allclose(sorted(rs.alphas, key=lambda z: z.imag), [-0.5j, 0.5j])
    assert abs(rs.alphas.sum()) < 1e-15


def test_preset_alpha_sum():
    rs = rapid_spectrum(build_structure(build_preset_chain(4, 1.0, 0.1, 0.2)))
    assert abs(rs.alphas.sum() - 0.3) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_random_structure_invariants(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, 5))
    m = random_quadratic_model(L, rng)
    sm = build_structure(m)
    for p in (1, -1):
        Fp = sm.Fp(p)
        assert np.abs(Fp + Fp.T).max() < 1e-13
    # -i F_B is Hermitian positive semidefinite
    B = -1j * sm.F_B
    assert np.abs(B - B.conj().T).max() < 1e-13
    assert np.linalg.eigvalsh(0.5 * (B + B.conj().T)).min() > -1e-12
    # F1 is real
    assert np.abs(sm.F1.imag).max() < 1e-13
    rs = rapid_spectrum(sm)
    assert abs(rs.alphas.sum() - np.trace(sm.X)) < 1e-12
    assert abs(np.trace(sm.X).real - sum(np.sum(np.abs(l) ** 2 + np.abs(g) ** 2) for l, g in m.linear)) < 1e-12
    assert rs.alphas.real.min() > -1e-12


def test_rapidities_ordered():
    rs = rapid_spectrum(build_structure(build_preset_chain(5, 1.0, 0.3, 0.1)))
    keys = [(round(a.real, 10), round(a.imag, 10)) for a in rs.alphas]
    assert keys == sorted(keys)


def test_defective_X_raises():
    # h = 0 with loss on one site and gain on the same site of a 2-site chain
    # gives a Jordan block only in contrived cases; force one directly.
    from fermiclosure.structure import StructureMatrices

    sm = build_structure(build_preset_chain(2, 1.0, 0.1, 0.1))
    X = np.array([[1.0, 1.0, 0, 0], [0, 1.0, 0, 0], [0, 0, 2.0, 0], [0, 0, 0, 3.0]], complex)
    fake = StructureMatrices(**{**sm.__dict__, "X": X})
    with pytest.raises(NonDiagonalizable):
        rapid_spectrum(fake)
