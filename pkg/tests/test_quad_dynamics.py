import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from fermiclosure import oracle
from fermiclosure import quad_dynamics as qd
from fermiclosure.model import FermionChainModel, InitialState, build_preset_chain
from fermiclosure.structure import build_structure

from helpers import random_gaussian_T2, random_quadratic_model


def _lossy(gamma):
    return FermionChainModel.create(1, np.array([[1.0]]), None, [(np.array([np.sqrt(gamma)]), np.zeros(1))], [])


def test_vacuum_T2_L2():
    expect = np.array(
        [[0.5, 0, -0.5j, 0], [0, 0.5, 0, -0.5j], [0.5j, 0, 0.5, 0], [0, 0.5j, 0, 0.5]]
    )
    T = qd.initial_corr(InitialState("vacuum"), 2, 4)
    assert np.allclose(T[2], expect)
    assert np.isclose(T[4][0, 1, 2, 3], 0.25)
    rho = oracle.initial_density(InitialState("vacuum"), 2)
    assert np.allclose(oracle.corr_tensor(rho, 4), T[4])


def test_ghz_order2_is_diagonal():
    T = qd.initial_corr(InitialState("ghz"), 4, 2)
    assert np.allclose(T[2], 0.5 * np.eye(8))


def test_ghz_orders_match_oracle():
    L = 3
    T = qd.initial_corr(InitialState("ghz"), L, 4)
    rho = oracle.initial_density(InitialState("ghz"), L)
    for n in (2, 4):
        assert np.allclose(T[n], oracle.corr_tensor(rho, n))


def test_wick_order4_entry():
    T2 = random_gaussian_T2(2, np.random.default_rng(0))
    W = qd.wick(T2, 4)
    j = (0, 1, 2, 3)
    expect = T2[0, 1] * T2[2, 3] - T2[0, 2] * T2[1, 3] + T2[0, 3] * T2[1, 2]
    assert np.isclose(W[j], expect)
    assert np.allclose(qd.wick(T2, 2), T2)
    assert np.isclose(qd.pairing_sum(T2, j), expect)
    assert qd.pairing_sum(T2, (0, 1, 2)) == 0


@pytest.mark.parametrize("n", [2, 4, 6])
def test_wick_matrix_form(n):
    T2 = random_gaussian_T2(2, np.random.default_rng(n))
    assert np.allclose(qd.wick_matrix_form(T2, n), qd.wick(T2, n))


def test_wick_matches_gaussian_oracle():
    L = 2
    T2 = random_gaussian_T2(L, np.random.default_rng(3))
    rho = qd.gaussian_density(T2).dense()
    for n in (2, 4):
        assert np.allclose(oracle.corr_tensor(rho, n), qd.wick(T2, n))


def test_evolve_t0_exact():
    sm = build_structure(build_preset_chain(3, 1.0, 0.1, 0.2))
    T0 = qd.vacuum_T2(3)
    assert np.array_equal(qd.evolve_T2(sm, T0, 0.0), T0)


def test_single_lossy_mode_decay():
    g = 0.3
    sm = build_structure(_lossy(g))
    for t in (0.5, 1.0, 4.0):
        T = qd.evolve_T2(sm, qd.full_T2(1), t)
        assert np.isclose(qd.occupation(T, 0), np.exp(-2 * g * t), atol=1e-13)


def test_preset_T2_vs_oracle():
    m = build_preset_chain(4, 1.0, 0.1, 0.2)
    sm = build_structure(m)
    lv = oracle.build_liouvillian(m)
    rho = lv.evolve(oracle.initial_density(InitialState("vacuum"), 4), 3.0)
    T = qd.evolve_T2(sm, qd.vacuum_T2(4), 3.0)
    assert np.abs(T - oracle.corr_tensor(rho, 2)).max() < 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_T2_equation_of_motion(seed):
    """dT2/dt = F1 T + T F1^T - i F_B^T against a finite difference of the oracle."""
    rng = np.random.default_rng(seed)
    m = random_quadratic_model(3, rng)
    sm = build_structure(m)
    lv = oracle.build_liouvillian(m)
    rho = oracle.initial_density(InitialState("ghz"), 3)
    T = oracle.corr_tensor(rho, 2)
    drho = (lv.matrix @ rho.reshape(-1)).reshape(rho.shape)
    dT = oracle.corr_tensor(drho, 2)
    F1 = sm.F1.real
    assert np.allclose(dT, F1 @ T + T @ F1.T - 1j * sm.F_B.T, atol=1e-10)


def test_steady_single_lossy_mode():
    ss = qd.steady_state_T2(build_structure(_lossy(0.4)))
    assert not ss.non_unique
    assert np.allclose(ss.T2, [[0.5, -0.5j], [0.5j, 0.5]])


def test_steady_preset_closed_form():
    J, gl, gg = 1.0, 0.1, 0.2
    x1 = (J**2 * (gg - gl) - gl * gg * (gl + gg)) / ((J**2 + gl * gg) * (gl + gg))
    ss = qd.steady_state_T2(build_structure(build_preset_chain(4, J, gl, gg)))
    n1 = qd.occupation(ss.T2, 0)
    assert abs(n1 - (x1 + 1) / 2) < 1e-12
    assert abs(n1 - 0.65359) < 1e-5
    lv = oracle.build_liouvillian(build_preset_chain(4, J, gl, gg))
    T_or = oracle.corr_tensor(lv.steady_state(), 2)
    assert np.abs(ss.T2 - T_or).max() < 1e-8


def test_steady_no_dissipation_non_unique():
    ss = qd.steady_state_T2(build_structure(build_preset_chain(3, 1.0, 0.0, 0.0)))
    assert ss.non_unique


def test_high_order_m1_is_T2():
    sm = build_structure(build_preset_chain(3, 1.0, 0.1, 0.2))
    T_init = qd.initial_corr(InitialState("vacuum"), 3, 2)
    for t in (0.0, 0.7, 3.0):
        assert np.allclose(qd.high_order(sm, T_init, 1, t), qd.evolve_T2(sm, T_init[2], t))


@given(st.integers(0, 2**31), st.floats(0.0, 20.0))
@settings(max_examples=10, deadline=None)
def test_gaussian_stays_gaussian(seed, t):
    rng = np.random.default_rng(seed)
    L = 2
    m = random_quadratic_model(L, rng, n_linear=1)
    sm = build_structure(m)
    T2 = random_gaussian_T2(L, rng)
    T_init = qd.initial_corr(InitialState("gaussian", T2), L, 6)
    T2t = qd.evolve_T2(sm, T2, t)
    for mm in (2, 3):
        assert np.allclose(qd.high_order(sm, T_init, mm, t), qd.wick(T2t, 2 * mm), atol=1e-9)


@pytest.mark.parametrize("t", [0.5, 2.0, 10.0])
def test_ghz_n1nL_vs_oracle(t):
    L = 4
    m = build_preset_chain(L, 1.0, 0.1, 0.2)
    sm = build_structure(m)
    T_init = qd.initial_corr(InitialState("ghz"), L, 4)
    T4 = qd.high_order(sm, T_init, 2, t)
    T2 = qd.evolve_T2(sm, T_init[2], t)
    val = qd.n1_nL(T2, T4[0, L - 1, L, 2 * L - 1])
    a = oracle.annihilators(L)
    n1 = a[0].conj().T @ a[0]
    nL = a[-1].conj().T @ a[-1]
    lv = oracle.build_liouvillian(m)
    rho = lv.evolve(oracle.initial_density(InitialState("ghz"), L), t)
    assert abs(val - np.trace(n1 @ nL @ rho)) < 1e-8


def test_memory_guard():
    sm = build_structure(build_preset_chain(40, 1.0, 0.1, 0.2))
    T = {0: np.array(1.0), 2: qd.vacuum_T2(40)}
    with pytest.raises(qd.MemoryGuardError):
        qd.high_order(sm, T, 3, 1.0)


def test_gaussian_density_mixed():
    g = qd.gaussian_density(0.5 * np.eye(6))
    assert np.allclose(g.varrho, 0)
    assert np.isclose(np.exp(g.log_norm), 2.0**-3)


def test_gaussian_density_thermal_roundtrip():
    L, beta = 2, 0.8
    T2 = 0.5 * np.eye(2 * L, dtype=complex)
    x = np.tanh(beta / 2) / 2
    for j in range(L):
        T2[j, L + j] = -1j * x
        T2[L + j, j] = 1j * x
    g = qd.gaussian_density(T2)
    rho = g.dense()
    assert np.isclose(np.trace(rho), 1)
    assert np.abs(oracle.corr_tensor(rho, 2) - T2).max() < 1e-10


def test_gaussian_density_pure_raises():
    with pytest.raises(qd.SingularCovariance):
        qd.gaussian_density(qd.vacuum_T2(2))


def test_fcs_zero_weight():
    T2 = random_gaussian_T2(3, np.random.default_rng(1))
    assert qd.fcs(T2, [np.zeros((6, 6))]) == 1


def _oracle_exp_number(rho, coeffs):
    L = len(coeffs)
    a = oracle.annihilators(L)
    Nw = sum(c * x.conj().T @ x for c, x in zip(coeffs, a))
    return np.trace(sla.expm(Nw) @ rho)


def test_fcs_half_chain_vs_oracle():
    L = 4
    m = build_preset_chain(L, 1.0, 0.1, 0.2)
    sm = build_structure(m)
    coeffs = [2 / L if j < L // 2 else 0 for j in range(L)]
    W, c = qd.number_weight(L, coeffs)
    T2 = qd.evolve_T2(sm, qd.vacuum_T2(L), 5.0)
    val = c + np.log(qd.fcs(T2, [W]))
    lv = oracle.build_liouvillian(m)
    rho = lv.evolve(oracle.initial_density(InitialState("vacuum"), L), 5.0)
    assert abs(val - np.log(_oracle_exp_number(rho, coeffs))) < 1e-8


def test_fcs_two_level_identity():
    L, s = 3, 0.9
    sm = build_structure(build_preset_chain(L, 1.0, 0.3, 0.2))
    T2 = qd.steady_state_T2(sm).T2
    for j in range(L):
        coeffs = [s if k == j else 0 for k in range(L)]
        W, c = qd.number_weight(L, coeffs)
        val = np.exp(c) * qd.fcs(T2, [W])
        assert abs(val - (1 + (np.exp(s) - 1) * qd.occupation(T2, j))) < 1e-12


def test_fcs_branch_tracking():
    """A large imaginary counting field winds the determinant around zero."""
    L = 2
    T2 = random_gaussian_T2(L, np.random.default_rng(5))
    rho = qd.gaussian_density(T2).dense()
    coeffs = [7.0j, 5.5j]
    W, c = qd.number_weight(L, coeffs)
    val = np.exp(c) * qd.fcs(T2, [W])
    assert abs(val - _oracle_exp_number(rho, coeffs)) < 1e-10
