import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinorbit.spin import (PAULI, berezin_reconstruct, coherent_vector, husimi_overlap,
                            make_spin_matrices, overlap_phase, rep_exponential,
                            rep_of_group_element, rotation_of, section_g, sphere_quadrature,
                            transported_vector, unit_vector)

SPINS = [k / 2 for k in range(0, 26)]
E1, E2, E3 = np.eye(3)

angles = st.tuples(st.floats(0.0, np.pi), st.floats(0.0, 2 * np.pi))
half_integers = st.integers(1, 20).map(lambda k: k / 2)


def directions(theta_phi):
    return unit_vector(*theta_phi)


def test_spin_half_is_pauli_halves():
    rep = make_spin_matrices(0.5)
    assert np.allclose(rep.S, PAULI / 2, atol=0)


def test_spin_one_matrices():
    rep = make_spin_matrices(1)
    r = 1 / np.sqrt(2)
    assert np.allclose(rep.S3, np.diag([1, 0, -1]))
    assert np.allclose(rep.S1, r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), atol=1e-15)
    assert np.allclose(rep.S2, r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]), atol=1e-15)


@pytest.mark.parametrize("s", SPINS)
def test_commutation_and_casimir(s):
    rep = make_spin_matrices(s)
    S = rep.S
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1
    for j in range(3):
        for k in range(3):
            comm = S[j] @ S[k] - S[k] @ S[j]
            assert np.max(np.abs(comm - 1j * np.einsum('l,lab->ab', eps[j, k], S))) <= 1e-13
    cas = sum(Sk @ Sk for Sk in S)
    assert np.max(np.abs(cas - s * (s + 1) * np.eye(rep.dim))) <= 1e-12
    assert np.allclose(np.diag(rep.S3).real, s - np.arange(rep.dim))


def test_spin_three_halves_commutator():
    rep = make_spin_matrices(1.5)
    assert np.max(np.abs(rep.S1 @ rep.S2 - rep.S2 @ rep.S1 - 1j * rep.S3)) <= 1e-14


@pytest.mark.parametrize("bad", [0.3, -0.5, 1.25, 2 / 3])
def test_non_half_integer_rejected(bad):
    with pytest.raises(ValueError):
        make_spin_matrices(bad)


def test_section_examples():
    assert np.allclose(section_g(E3), np.eye(2))
    assert np.allclose(section_g(E1), np.array([[1, -1], [1, 1]]) / np.sqrt(2))


def test_section_south_pole_limit():
    g = section_g(-E3)
    assert np.allclose(g, [[0, -1], [1, 0]])
    assert np.allclose(rotation_of(g) @ E3, -E3)


@settings(max_examples=60, deadline=None)
@given(angles)
def test_section_maps_e3_to_n(tp):
    n = directions(tp)
    g = section_g(n)
    assert abs(np.linalg.det(g) - 1) <= 1e-12
    assert np.allclose(g @ g.conj().T, np.eye(2), atol=1e-12)
    assert np.max(np.abs(rotation_of(g) @ E3 - n)) <= 1e-12


def test_rep_exponential_examples():
    for s in (0.5, 1, 2.5, 7):
        rep = make_spin_matrices(s)
        assert np.allclose(rep_exponential(rep, E2, 0.0), np.eye(rep.dim))
        assert np.allclose(rep_exponential(rep, E2, 4 * np.pi), np.eye(rep.dim), atol=1e-12)
    rep = make_spin_matrices(0.5)
    assert np.allclose(rep_exponential(rep, E3, np.pi), np.diag([np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)]))


@settings(max_examples=40, deadline=None)
@given(angles, st.floats(-10, 10))
def test_rep_exponential_spin_half_closed_form(tp, angle):
    x = directions(tp)
    rep = make_spin_matrices(0.5)
    xs = np.einsum('k,kab->ab', x, PAULI)
    expected = np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * xs
    assert np.allclose(rep_exponential(rep, x, angle), expected, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(angles, st.floats(-5, 5), half_integers)
def test_rep_exponential_composes(tp, theta, s):
    rep = make_spin_matrices(s)
    x = directions(tp)
    U = rep_exponential(rep, x, theta)
    assert np.max(np.abs(U @ U - rep_exponential(rep, x, 2 * theta))) <= 1e-12


def test_rep_of_minus_identity():
    for s in (0.5, 1, 1.5, 2):
        rep = make_spin_matrices(s)
        assert np.allclose(rep_of_group_element(rep, -np.eye(2)), (-1) ** rep.two_s * np.eye(rep.dim))


def test_coherent_vector_examples():
    for s in (0.5, 3, 5.5):
        rep = make_spin_matrices(s)
        assert np.allclose(coherent_vector(rep, E3), rep.highest_weight())
    rep = make_spin_matrices(0.5)
    assert np.allclose(coherent_vector(rep, E1), np.array([1, 1]) / np.sqrt(2))


@settings(max_examples=40, deadline=None)
@given(angles)
def test_spin_half_coherent_vector_closed_form(tp):
    theta, phi = tp
    rep = make_spin_matrices(0.5)
    v = coherent_vector(rep, unit_vector(theta, phi))
    if np.pi - theta < 1e-12:
        phi = 0.0
    expected = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    assert np.allclose(v, expected, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(angles, half_integers, st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_coherent_eigen_and_expectation(tp, s, x):
    rep = make_spin_matrices(s)
    n = directions(tp)
    v = coherent_vector(rep, n)
    assert abs(np.linalg.norm(v) - 1) <= 1e-12
    assert np.max(np.abs(rep.dot(n) @ v - s * v)) <= 1e-11
    x = np.asarray(x)
    assert abs(np.vdot(v, rep.dot(x) @ v) - s * x @ n) <= 1e-11
    for k in range(3):
        assert abs(np.vdot(v, rep.S[k] @ v).real - s * n[k]) <= 1e-12


@pytest.mark.parametrize("s", [k / 2 for k in range(1, 21)])
def test_perpendicular_remainder_is_exact(s):
    rep = make_spin_matrices(s)
    n = unit_vector(1.1, 0.4)
    x = 2.5 * np.cross(n, unit_vector(0.3, 2.0))
    v = coherent_vector(rep, n)
    rel = np.linalg.norm(rep.dot(x) @ v - s * (x @ n) * v) / (s * np.linalg.norm(x))
    assert abs(rel - np.sqrt(1 / (2 * s))) <= 1e-12


def test_husimi_examples():
    rep = make_spin_matrices(2)
    n = unit_vector(0.7, 1.3)
    assert husimi_overlap(rep, n, n) == pytest.approx(1.0, abs=1e-12)
    assert husimi_overlap(rep, -n, n) == pytest.approx(0.0, abs=1e-12)
    m = np.cross(n, E3)
    m /= np.linalg.norm(m)
    assert husimi_overlap(rep, m, n) == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(angles, angles, st.integers(0, 20))
def test_husimi_formula(a, b, two_s):
    rep = make_spin_matrices(two_s / 2)
    m, n = directions(a), directions(b)
    val = husimi_overlap(rep, m, n, check=False)
    assert abs(val - (0.5 * (1 + m @ n)) ** (two_s / 2)) <= 1e-10


def test_overlap_phase():
    rep = make_spin_matrices(5)
    n, m = unit_vector(0.4, 0.2), unit_vector(2.0, 4.0)
    assert overlap_phase(rep, n, n) == pytest.approx(1.0)
    assert abs(overlap_phase(rep, n, m)) == pytest.approx((0.5 * (1 + n @ m)) ** 5, abs=1e-10)
    with pytest.raises(ValueError):
        overlap_phase(rep, n, -n)
    half = make_spin_matrices(0.5)
    a, b = coherent_vector(half, n), coherent_vector(half, m)
    assert overlap_phase(half, n, m) == pytest.approx(np.conj(a) @ b)


def test_transported_vector_matches_rotated_direction():
    rep = make_spin_matrices(1.5)
    g = rep_exponential(make_spin_matrices(0.5), unit_vector(0.3, 0.9), 1.7)
    n0 = unit_vector(1.2, 0.5)
    v = transported_vector(rep, g, n0)
    n = rotation_of(g) @ n0
    assert abs(abs(np.vdot(coherent_vector(rep, n), v)) - 1) <= 1e-12


def test_sphere_quadrature_moments():
    q = sphere_quadrature(6)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-15)
    nx, ny, nz = q.nodes.T
    assert q.weights @ nz ** 2 == pytest.approx(1 / 3, abs=1e-14)
    assert q.weights @ (nx ** 2 * ny ** 2) == pytest.approx(1 / 15, abs=1e-14)
    assert q.weights @ (nx ** 2 * ny ** 2 * nz ** 2) == pytest.approx(1 / 105, abs=1e-14)


def test_berezin_examples():
    half = make_spin_matrices(0.5)
    assert np.max(np.abs(berezin_reconstruct(half, lambda n: 1.0) - np.eye(2))) <= 1e-12
    one = make_spin_matrices(1)
    assert np.max(np.abs(berezin_reconstruct(one, lambda n: 2 * n[2]) - one.S3)) <= 1e-12
    tq = make_spin_matrices(1.5)
    assert np.max(np.abs(berezin_reconstruct(tq, lambda n: 2.5 * n[0]) - tq.S1)) <= 1e-12


@pytest.mark.parametrize("s", [0.5, 2, 4.5, 10])
def test_berezin_reconstructs_generators(s):
    rep = make_spin_matrices(s)
    for k in range(3):
        L = berezin_reconstruct(rep, lambda n, k=k: (s + 1) * n[k])
        assert np.max(np.abs(L - rep.S[k])) <= 1e-12


def test_berezin_rejects_low_order():
    rep = make_spin_matrices(3)
    with pytest.raises(ValueError):
        berezin_reconstruct(rep, lambda n: 1.0, sphere_quadrature(4))
