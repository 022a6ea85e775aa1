import numpy as np
import pytest

from fermiclosure import oracle
from fermiclosure.model import FermionChainModel, InitialState, build_preset_chain


def test_single_lossy_mode_eigenvalues():
    g = 0.25
    m = FermionChainModel.create(1, np.array([[1.0]]), None, [(np.array([np.sqrt(g)]), np.zeros(1))], [])
    ev = oracle.build_liouvillian(m).eigenvalues()
    expect = np.array([0, -2 * g, -g + 1j, -g - 1j])
    d = np.abs(ev[:, None] - expect[None, :])
    assert d.min(axis=0).max() < 1e-12 and d.min(axis=1).max() < 1e-12


def test_closed_system_purely_imaginary():
    ev = oracle.build_liouvillian(build_preset_chain(3, 1.0, 0.0, 0.0)).eigenvalues()
    assert np.abs(ev.real).max() < 1e-12


@pytest.mark.parametrize("gt", [0.0, 0.4])
def test_trace_preservation(gt):
    lv = oracle.build_liouvillian(build_preset_chain(2, 1.0, 0.3, 0.2, gt))
    vecI = np.eye(lv.dim).reshape(-1)
    assert np.abs(vecI @ lv.matrix).max() < 1e-12


def test_vacuum_expectations():
    L = 3
    lv = oracle.build_liouvillian(build_preset_chain(L, 1.0, 0.1, 0.2))
    vac = InitialState("vacuum")
    for j in range(L):
        assert np.isclose(oracle.exact_corr(lv, vac, (j, j), 0.0), 0.5)
        assert np.isclose(oracle.exact_corr(lv, vac, (j, L + j), 0.0), -0.5j)


def test_n1nL_monotone_from_vacuum():
    L = 4
    m = build_preset_chain(L, 1.0, 0.1, 0.2)
    lv = oracle.build_liouvillian(m)
    a = oracle.annihilators(L)
    op = a[0].conj().T @ a[0] @ a[-1].conj().T @ a[-1]
    rho0 = oracle.initial_density(InitialState("vacuum"), L)
    import scipy.linalg as sla

    step = sla.expm(lv.matrix * 0.5)
    v = rho0.reshape(-1)
    vals = []
    for _ in range(101):
        vals.append(np.trace(op @ v.reshape(lv.dim, lv.dim)).real)
        v = step @ v
    assert np.all(np.diff(vals) > -1e-12)


def test_evolved_state_is_density_matrix():
    lv = oracle.build_liouvillian(build_preset_chain(3, 1.0, 0.3, 0.2, 0.5))
    rho = lv.evolve(oracle.initial_density(InitialState("ghz"), 3), 1.3)
    assert np.isclose(np.trace(rho), 1)
    assert np.abs(rho - rho.conj().T).max() < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_parity_blocks_partition_spectrum():
    lv = oracle.build_liouvillian(build_preset_chain(2, 1.0, 0.3, 0.2, 0.4))
    ev, od = oracle.parity_blocks(lv)
    assert ev.shape[0] + od.shape[0] == lv.matrix.shape[0]
    both = np.concatenate([np.linalg.eigvals(ev), np.linalg.eigvals(od)])
    full = lv.eigenvalues()
    from fermiclosure.spectrum import match_spectra

    assert match_spectra(both, full).ok(1e-10)


def test_size_guard():
    with pytest.raises(oracle.SizeGuardError):
        oracle.build_liouvillian(build_preset_chain(7, 1.0, 0.1, 0.1))


def test_corr_tensor_order0_is_trace():
    rho = oracle.initial_density(InitialState("ghz"), 2)
    assert np.isclose(oracle.corr_tensor(rho, 0), 1)
