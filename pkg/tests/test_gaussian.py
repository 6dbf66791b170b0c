import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm
from scipy.integrate import quad

from spinorbit import classical as cl
from spinorbit.experiments import scenario_coincidence
from spinorbit.gaussian import (BranchError, GaussianPacket, GridTooSmallError, MaslovTracker,
                                SiegelError, check_siegel, evaluate_packet, gb_matrix,
                                maslov_update, packet_wavefunction, propagate_packet,
                                propagate_packet_scenarioA, propagate_packet_scenarioB,
                                riccati_residual, siegel_action, wigner_function,
                                wigner_second_moment)
from spinorbit.model import builtin
from spinorbit.quantum import Grid, observables
from spinorbit.spin import make_spin_matrices, unit_vector

E1, E3 = np.eye(3)[0], np.eye(3)[2]

siegel_1 = st.tuples(st.floats(-3, 3), st.floats(0.05, 5)).map(lambda t: np.array([[t[0] + 1j * t[1]]]))


def random_symplectic(rng, d=1, scale=1.0):
    A = rng.normal(size=(2 * d, 2 * d)) * scale
    return expm(cl.symplectic_J(d) @ (A + A.T))


def rotation(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [-s, c]])


def test_check_siegel():
    check_siegel([[1j]])
    with pytest.raises(SiegelError):
        check_siegel([[1 - 1j]])
    with pytest.raises(SiegelError):
        check_siegel([[1j, 0.1], [0.2, 1j]])


def test_gb_matrix_examples():
    assert np.allclose(gb_matrix([[1j]]), np.eye(2))
    assert np.allclose(gb_matrix(np.diag([1j, 1j])), np.eye(4))
    G = gb_matrix([[1 + 1j]])
    assert np.allclose(G, [[2, -1], [-1, 1]])
    assert np.linalg.det(G) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(siegel_1)
def test_gb_matrix_symplectic_det(B):
    G = gb_matrix(B)
    assert abs(np.linalg.det(G) - 1) <= 1e-10
    assert np.allclose(G.T @ cl.symplectic_J(1) @ G, cl.symplectic_J(1), atol=1e-9 * np.max(np.abs(G)) ** 2)


def test_gb_matrix_two_dimensional():
    B = np.array([[0.3 + 1.2j, 0.1 + 0.2j], [0.1 + 0.2j, -0.5 + 0.8j]])
    assert np.linalg.det(gb_matrix(B)) == pytest.approx(1.0, abs=1e-10)


def test_siegel_action_examples():
    B = np.array([[1j]])
    assert np.allclose(siegel_action(np.eye(2), B), B)
    for t in (0.5, 2.0, 7.0):
        # free flow (x, xi) -> (x + t xi, xi): width i/(1 + i t)
        assert np.allclose(siegel_action(np.array([[1, t], [0, 1]]), B), 1j / (1 + 1j * t))
        assert np.allclose(siegel_action(rotation(t), B), B)


def test_siegel_action_free_width_matches_fft_evolution():
    hbar, t = 0.1, 1.5
    g = Grid.line(-10, 10, 1024)
    pk = GaussianPacket([0.0], [0.0], [[1j]], hbar)
    x = g.points()
    psi = packet_wavefunction(pk, x)
    k = g.wavenumbers()[0]
    psi_t = np.fft.ifft(np.fft.fft(psi) * np.exp(-0.5j * hbar * t * k ** 2))
    Bt = siegel_action(np.array([[1, t], [0, 1]]), pk.B)
    # ratio of neighbouring samples fixes B(t): log psi is i B x^2 / (2 hbar) + const
    i0 = 512
    lp = np.log(psi_t[i0 - 5:i0 + 6])
    xx = x[i0 - 5:i0 + 6, 0]
    c2 = np.polyfit(xx, lp, 2)[0]
    assert 2 * hbar * c2 / 1j == pytest.approx(Bt[0, 0], abs=1e-8)


def test_siegel_action_rejects():
    with pytest.raises(SiegelError):
        siegel_action(np.array([[1.0, 1.0], [0.0, 2.0]]), [[1j]])
    t = 1e3
    with pytest.raises(SiegelError):
        siegel_action(np.array([[1, t], [0, 1]]), [[-1 / t + 1e-16j]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), siegel_1)
def test_siegel_group_action(seed, B):
    rng = np.random.default_rng(seed)
    S1, S2 = random_symplectic(rng, scale=0.5), random_symplectic(rng, scale=0.5)
    lhs = siegel_action(S2 @ S1, B)
    rhs = siegel_action(S2, siegel_action(S1, B))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(lhs)))
    assert np.min(np.linalg.eigvalsh(lhs.imag)) > 0


def test_siegel_group_action_two_dimensional():
    rng = np.random.default_rng(3)
    B = np.array([[0.2 + 1.0j, 0.1j], [0.1j, -0.4 + 0.7j]])
    S1, S2 = random_symplectic(rng, 2, 0.3), random_symplectic(rng, 2, 0.3)
    assert np.allclose(siegel_action(S2 @ S1, B), siegel_action(S2, siegel_action(S1, B)), atol=1e-9)


def test_maslov_examples():
    B0 = np.array([[1j]])
    tr = MaslovTracker()
    assert tr.prefactor == 1
    for t in np.linspace(0, 2 * np.pi, 41)[1:]:
        tr = maslov_update(tr, rotation(t), B0)
        assert tr.prefactor == pytest.approx(np.exp(-0.5j * t), abs=1e-12)
    assert tr.prefactor == pytest.approx(-1.0, abs=1e-12)
    tr = MaslovTracker()
    for t in np.linspace(0, 3, 31)[1:]:
        tr = maslov_update(tr, np.array([[1, t], [0, 1]]), B0)
    assert tr.w == pytest.approx(1 + 3j)
    assert tr.prefactor == pytest.approx((1 + 3j) ** -0.5, abs=1e-12)


def test_maslov_branch_error():
    with pytest.raises(BranchError):
        maslov_update(MaslovTracker(), rotation(2.0), np.array([[1j]]))


def test_wigner_closed_form_matches_definition():
    hbar = 0.3
    pk = GaussianPacket([0.4], [-0.2], [[0.7 + 1.3j]], hbar)

    def psi(x):
        return packet_wavefunction(pk, np.array([[x]]))[0]

    for x, xi in [(0.4, -0.2), (0.9, 0.1), (0.0, -0.6)]:
        def f(y, part):
            v = psi(x + y / 2) * np.conj(psi(x - y / 2)) * np.exp(-1j * xi * y / hbar)
            return v.real if part == 0 else v.imag
        re = quad(f, -8, 8, args=(0,), epsabs=1e-13, limit=200)[0]
        im = quad(f, -8, 8, args=(1,), epsabs=1e-13, limit=200)[0]
        assert re == pytest.approx(wigner_function(pk, np.array([x, xi])), abs=1e-9)
        assert abs(im) <= 1e-9


def wigner_moment_quadrature(pk, n=401, width=12.0):
    G = gb_matrix(pk.B)
    sd = np.sqrt(np.diag(np.linalg.inv(G)) * pk.hbar / 2)
    u = np.linspace(-width * sd[0], width * sd[0], n)
    v = np.linspace(-width * sd[1], width * sd[1], n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = wigner_function(pk, np.stack([U + pk.q[0], V + pk.p[0]], axis=-1))
    return np.trapezoid(np.trapezoid((U ** 2 + V ** 2) * W, v, axis=1), u) / (2 * np.pi * pk.hbar)


def test_wigner_second_moment_examples():
    for hbar in (1.0, 0.05):
        assert wigner_second_moment(GaussianPacket([0], [0], [[1j]], hbar)) == pytest.approx(hbar)
        assert wigner_second_moment(GaussianPacket([0], [0], [[2j]], hbar)) == pytest.approx(1.25 * hbar)
        assert wigner_moment_quadrature(GaussianPacket([0], [0], [[2j]], hbar)) == pytest.approx(1.25 * hbar, rel=1e-10)


def test_wigner_moment_is_not_reciprocal_trace():
    pk = GaussianPacket([0], [0], [[1j]], 1.0)
    recip = 0.5 * pk.hbar / np.trace(gb_matrix(pk.B))
    assert wigner_moment_quadrature(pk) == pytest.approx(1.0, rel=1e-10)
    assert abs(recip - 1.0) > 0.5


@settings(max_examples=25, deadline=None)
@given(siegel_1, st.floats(0, 2 * np.pi))
def test_second_moment_rotation_invariant(B, t):
    a = GaussianPacket([0], [0], B, 0.2)
    b = GaussianPacket([0], [0], siegel_action(rotation(t), B), 0.2)
    assert wigner_second_moment(b) == pytest.approx(wigner_second_moment(a), rel=1e-9)


def test_evaluate_packet_examples():
    hbar = 0.1
    g = Grid.line(-4, 4, 512)
    pk = GaussianPacket([0.0], [0.0], [[1j]], hbar)
    st0 = evaluate_packet(pk, g)
    x = g.axes()[0]
    assert np.allclose(st0.psi[:, 0], (np.pi * hbar) ** -0.25 * np.exp(-x ** 2 / (2 * hbar)))
    pk = GaussianPacket([0.5], [-0.7], [[0.4 + 0.8j]], hbar, 0j, unit_vector(1.0, 2.0), 3)
    s = evaluate_packet(pk, g)
    assert s.norm() == pytest.approx(1.0, abs=1e-9)
    o = observables(s)
    assert o["x"][0] == pytest.approx(0.5, abs=1e-9)
    assert o["p"][0] == pytest.approx(-0.7, abs=1e-9)
    assert np.allclose(o["spin"], 1.5 * pk.n, atol=1e-9)


def test_evaluate_packet_grid_too_small():
    pk = GaussianPacket([0.0], [0.0], [[1j]], 0.5)
    with pytest.raises(GridTooSmallError):
        evaluate_packet(pk, Grid.line(-1, 1, 256))
    fast = GaussianPacket([0.0], [30.0], [[1j]], 0.1)
    with pytest.raises(GridTooSmallError):
        evaluate_packet(fast, Grid.line(-4, 4, 256))


def test_json_roundtrip():
    pk = GaussianPacket([0.5], [-0.7], [[0.4 + 0.8j]], 0.1, 0.3 - 1.2j, unit_vector(1.0, 2.0), 3)
    back = GaussianPacket.from_json(pk.to_json())
    assert np.allclose(back.B, pk.B) and np.allclose(back.n, pk.n)
    assert back.log_prefactor == pk.log_prefactor and back.two_s == 3
    assert pk.to_json() == back.to_json()


def test_t_zero_returns_input():
    pk = GaussianPacket([0.5], [0.2], [[0.1 + 0.9j]], 0.1, 0j, E1, 1)
    out = propagate_packet_scenarioA(builtin("quartic_perturbed"), pk, 0.0)
    assert np.allclose(out.q, pk.q) and np.allclose(out.B, pk.B)
    assert out.log_prefactor == pytest.approx(0.0)
    out = propagate_packet_scenarioB(builtin("stern_gerlach"), pk, 0.05, 0.0)
    assert np.allclose(out.n, pk.n) and out.log_prefactor == pytest.approx(0.0)


def test_harmonic_keeps_unit_width():
    pk = GaussianPacket([1.0], [0.0], [[1j]], 0.1, 0j, E1, 1)
    out = propagate_packet(builtin("harmonic_const_field"), pk, np.linspace(0, 10, 11))
    for p in out:
        assert np.allclose(p.B, 1j, atol=1e-9)


def test_free_packet_matches_exact_free_evolution():
    hbar, t = 0.05, 2.0
    g = Grid.line(-6, 6, 1024)
    pk = GaussianPacket([-0.5], [0.8], [[0.3 + 1.1j]], hbar, 0j, E1, 1)
    m = builtin("free_const_field", c3=0.0)
    out = propagate_packet_scenarioA(m, pk, t)
    st0 = evaluate_packet(pk, g)
    k = g.wavenumbers()[0]
    exact = np.fft.ifft(np.fft.fft(st0.psi, axis=0) * np.exp(-0.5j * hbar * t * k ** 2)[:, None], axis=0)
    approx = evaluate_packet(out, g)
    assert np.sqrt(np.sum(np.abs(exact - approx.psi) ** 2) * g.dV) <= 1e-10
    assert np.allclose(out.n, E1)


def test_propagated_norm_stays_one():
    hbar = 0.02
    g = Grid.line(-4, 4, 2048)
    pk = GaussianPacket([1.0], [0.0], [[1j]], hbar, 0j, E1, 1)
    for p in propagate_packet(builtin("quartic_perturbed"), pk, np.linspace(0, 20, 11)):
        assert evaluate_packet(p, g).norm() == pytest.approx(1.0, abs=1e-8)


def test_riccati_residual_small():
    m = builtin("quartic_perturbed", eps=0.1)
    pk = GaussianPacket([1.0], [0.3], [[0.2 + 1j]], 0.1)
    _, tr = propagate_packet(m, pk, np.linspace(0, 3, 31), return_trajectory=True)
    for t in (0.5, 1.7, 2.9):
        z = tr.state_at(t)[0]
        assert riccati_residual(tr, pk.B, t, m.hess_h0(z)) <= 1e-6


def test_scenario_B_requires_half_integer():
    pk = GaussianPacket([0.0], [0.0], [[1j]], 0.1, 0j, E3, 2)
    with pytest.raises(ValueError):
        propagate_packet_scenarioB(builtin("stern_gerlach"), pk, 0.13, 1.0)


def test_scenarios_coincide_for_constant_field():
    pk = GaussianPacket([0.7], [0.1], [[0.3 + 0.9j]], 0.05, 0j, unit_vector(1.0, 0.3), 3)
    for name in ("harmonic_const_field", "pendulum", "inverted_osc"):
        m = builtin(name, c1=0.4, c3=0.8)
        assert scenario_coincidence(m, pk, np.linspace(0, 3, 7)) <= 1e-8


def test_scenario_B_stern_gerlach_deflection():
    b1, S = 0.5, 1.0
    for sign in (1.0, -1.0):
        pk = GaussianPacket([0.0], [0.0], [[1j]], 0.125, 0j, sign * E3, 16)
        out = propagate_packet_scenarioB(builtin("stern_gerlach", b1=b1), pk, S, 1.0)
        assert out.q[0] == pytest.approx(-sign * b1 / 2, abs=1e-10)


def test_constant_spin_factor_without_field():
    m = builtin("pendulum", c3=0.0)
    pk = GaussianPacket([1.0], [0.0], [[1j]], 0.1, 0j, unit_vector(0.4, 1.0), 1)
    out, tr = propagate_packet(m, pk, np.linspace(0, 4, 5), return_trajectory=True)
    for p in out:
        assert np.allclose(p.n, pk.n, atol=1e-12)
    assert np.allclose(tr.rho, 0.0, atol=1e-12)


def test_spin_vector_is_transported_coherent_state():
    rep = make_spin_matrices(1.5)
    pk = GaussianPacket([0.2], [0.0], [[1j]], 0.1, 0j, unit_vector(1.0, 0.5), 3)
    out = propagate_packet_scenarioA(builtin("quartic_perturbed"), pk, 2.0)
    v = out.spin_vector(rep)
    assert np.max(np.abs(rep.dot(out.n) @ v - 1.5 * v)) <= 1e-11
