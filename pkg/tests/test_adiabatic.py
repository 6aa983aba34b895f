import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metamolecule.adiabatic import (
    bath_transition_diagnostic,
    eigenvalues,
    frame,
    hamiltonian_matrix,
    hf_force,
    mixing_angle,
    pauli_in_frame,
    spatial_coupling,
    temporal_coupling,
)
from metamolecule.model import ModelParams, lambda_field

P5 = ModelParams()
STRONG = ModelParams(g=1.5)


def eig_oracle(p, R, t):
    """Dense diagonalisation with the gauge fixed independently of theta.

    Columns ordered upper, lower; |1> has a positive first component and |2>
    a positive second component.
    """
    w, v = np.linalg.eigh(hamiltonian_matrix(p, R, t))
    v = v[:, ::-1]
    if v[0, 0] < 0:
        v[:, 0] *= -1
    if v[1, 1] < 0:
        v[:, 1] *= -1
    return w[::-1], v


def test_eigenvalue_examples():
    e1, e2 = eigenvalues(ModelParams(Omega=0.8, c=0.01, g=1.5), 0.0, 0.0)
    assert e1 == pytest.approx(math.sqrt(2.41), abs=1e-12)
    assert e2 == pytest.approx(-math.sqrt(2.41), abs=1e-12)
    assert e1 == pytest.approx(1.55242, abs=5e-6)
    e1, e2 = eigenvalues(ModelParams(Omega=0.8, c=0.01, g=0.1, omega=0.5), 1.0, 0.0)
    assert (e1, e2) == (pytest.approx(0.125 + 0.41, abs=1e-12), pytest.approx(0.125 - 0.41, abs=1e-12))


def test_decoupled_limit():
    p = ModelParams(g=0.0, c=0.0, omega=0.5)
    e1, e2 = eigenvalues(p, 1.3, 4.0)
    vb = 0.5 * 0.25 * 1.3**2
    assert (e1, e2) == (pytest.approx(vb + 0.4), pytest.approx(vb - 0.4))
    f = frame(p, 1.3, 4.0)
    np.testing.assert_array_equal(f.U, np.eye(2))
    np.testing.assert_array_equal(pauli_in_frame(p, 1.3, 4.0, "z"), np.diag([-1.0, 1.0]))


def test_mixing_angle_convention():
    # Omega = 0.8 and Lambda = 0.4 (R = 0, g = 0.4, t = 0)
    p = ModelParams(Omega=0.8, g=0.4)
    assert mixing_angle(p, 0.0, 0.0) == pytest.approx(math.pi / 4, abs=1e-15)


rt = st.tuples(st.floats(-6, 6), st.floats(0, 126))


@settings(max_examples=200)
@given(rt, st.sampled_from([P5, STRONG]))
def test_closed_form_matches_dense_diagonalisation(x, p):
    R, t = x
    w, v = eig_oracle(p, R, t)
    e1, e2 = eigenvalues(p, R, t)
    assert e1 == pytest.approx(w[0], abs=1e-12)
    assert e2 == pytest.approx(w[1], abs=1e-12)
    f = frame(p, R, t)
    np.testing.assert_allclose(f.U, v, atol=1e-12)
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(2), atol=1e-12)
    h = hamiltonian_matrix(p, R, t)
    for a, e in ((0, f.E1), (1, f.E2)):
        np.testing.assert_allclose(h @ f.U[:, a], e * f.U[:, a], atol=1e-12)
    assert f.E1 + f.E2 == pytest.approx(0.5 * p.omega**2 * R * R * 2, abs=1e-12)
    assert f.E1 - f.E2 >= p.Omega
    assert f.omega12 >= 0


def fd_temporal(p, R, t, h=1e-5):
    _, vp = eig_oracle(p, R, t + h)
    _, vm = eig_oracle(p, R, t - h)
    _, v0 = eig_oracle(p, R, t)
    return (vp[:, 0] - vm[:, 0]) @ v0[:, 1] / (2 * h)


def fd_spatial(p, R, t, h=1e-5):
    # <1 | d_R 2>
    _, vp = eig_oracle(p, R + h, t)
    _, vm = eig_oracle(p, R - h, t)
    _, v0 = eig_oracle(p, R, t)
    return v0[:, 0] @ (vp[:, 1] - vm[:, 1]) / (2 * h)


def test_temporal_coupling_examples():
    assert temporal_coupling(STRONG, 0.3, 0.0) == 0.0
    assert temporal_coupling(ModelParams(g=0.0), 0.3, 17.0) == 0.0
    p = ModelParams(Omega=0.8, c=0.01, g=1.5, omega_d=0.05)
    t = math.pi / (2 * p.omega_d)
    val = temporal_coupling(p, 0.0, t)
    assert val == pytest.approx(fd_temporal(p, 0.0, t), abs=1e-6)
    # Lambda = 0 there, so the closed form reduces to -g omega_d / Omega
    assert val == pytest.approx(-1.5 * 0.05 / 0.8, abs=1e-12)
    assert temporal_coupling(p, 0.0, t, 2, 1) == -val
    assert temporal_coupling(p, 0.0, t, 1, 1) == 0.0


def test_spatial_coupling_examples():
    assert spatial_coupling(ModelParams(c=0.0), 0.5, 7.0) == 0.0
    p = ModelParams(Omega=0.8, c=0.01, g=0.1)
    assert spatial_coupling(p, 0.5, 7.0) == pytest.approx(fd_spatial(p, 0.5, 7.0), abs=1e-6)
    assert spatial_coupling(p, 0.5, 7.0, 2, 1) == -spatial_coupling(p, 0.5, 7.0, 1, 2)


@pytest.mark.property
def test_couplings_match_fd_oracle_on_random_sample():
    rng = np.random.default_rng(7)
    for p in (P5, STRONG, ModelParams(c=0.3, g=1.5)):
        for R, t in zip(rng.uniform(-6, 6, 100), rng.uniform(0, 126, 100)):
            assert temporal_coupling(p, R, t) == pytest.approx(fd_temporal(p, R, t), abs=1e-6)
            assert spatial_coupling(p, R, t) == pytest.approx(fd_spatial(p, R, t), abs=1e-6)


def test_hf_force_examples():
    p = ModelParams(c=0.0, g=0.7)
    for a in (1, 2):
        assert hf_force(p, 1.7, 3.0, a) == pytest.approx(-0.25 * 1.7)
    p = ModelParams(Omega=0.8, c=0.01, g=0.1, omega=0.5)
    assert hf_force(p, 1.0, 0.0, 1) == pytest.approx(-0.25 + 0.01 * 0.09 / 0.41, abs=1e-14)
    # Lambda = 0 (R = 0, t = pi / (2 omega_d)) gives equal forces
    t = math.pi / (2 * p.omega_d)
    assert hf_force(p, 0.0, t, 1) == pytest.approx(hf_force(p, 0.0, t, 2), abs=1e-15)
    with pytest.raises(ValueError):
        hf_force(p, 0.0, 0.0, 3)


@pytest.mark.property
@given(rt)
def test_hf_forces_sum_and_fd(x):
    R, t = x
    p = STRONG
    f1, f2 = hf_force(p, R, t, 1), hf_force(p, R, t, 2)
    assert f1 + f2 == pytest.approx(-2 * p.omega**2 * R, abs=1e-12)
    h = 1e-4
    for a, f in ((0, f1), (1, f2)):
        fd = -(eigenvalues(p, R + h, t)[a] - eigenvalues(p, R - h, t)[a]) / (2 * h)
        assert fd == pytest.approx(f, abs=1e-8)


def test_hf_force_fd_convergence_order():
    p = ModelParams(c=0.5, g=1.5)
    R, t = 0.7, 11.0
    errs = []
    for h in (0.2, 0.1, 0.05, 0.025):
        fd = -(eigenvalues(p, R + h, t)[0] - eigenvalues(p, R - h, t)[0]) / (2 * h)
        errs.append(abs(fd - hf_force(p, R, t, 1)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_pauli_in_frame():
    p = ModelParams(Omega=0.8, g=0.4)  # theta = pi/4 at R = 0, t = 0
    th = math.pi / 4
    c, s = math.cos(th / 2), math.sin(th / 2)
    U = np.array([[c, -s], [s, c]])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(pauli_in_frame(p, 0.0, 0.0, "x"), U.T @ sx @ U, atol=1e-15)
    np.testing.assert_allclose(pauli_in_frame(p, 0.0, 0.0, "x"),
                               [[math.sin(th), math.cos(th)], [math.cos(th), -math.sin(th)]], atol=1e-15)
    with pytest.raises(ValueError):
        pauli_in_frame(p, 0.0, 0.0, "y")


@given(rt, st.sampled_from(["x", "z"]))
def test_pauli_in_frame_properties(x, which):
    m = pauli_in_frame(STRONG, x[0], x[1], which)
    assert np.trace(m) == pytest.approx(0.0, abs=1e-15)
    assert np.linalg.det(m) == pytest.approx(-1.0, abs=1e-14)
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(m), [-1.0, 1.0], atol=1e-14)


def test_bath_transition_diagnostic():
    assert bath_transition_diagnostic(ModelParams(c=0.0), 0.0, 1.0, 0.0) == (0.0, 0.0)
    a, b = bath_transition_diagnostic(P5, 0.0, 1.0, 0.0)
    assert abs(a) <= 0.02 and abs(b) <= 0.02
    a21, b21 = bath_transition_diagnostic(P5, 0.0, 1.0, 0.0, 2, 1)
    assert a21 == -a
    assert b21 == pytest.approx(b)  # (E_a - E_b) d_ab is even under the swap
