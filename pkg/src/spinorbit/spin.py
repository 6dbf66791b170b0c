"""
spinorbit.spin
--------------

SU(2) representation machinery: spin matrices for arbitrary s, the local
section of the Hopf bundle, spin-coherent vectors, Husimi overlaps and
Berezin (upper symbol) reconstruction.

All spin matrices here are the dimensionless generators ``dpi_s(sigma_k/2)``;
physical spin operators are ``hbar`` times these.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

# polar angles closer than this to pi are treated as the south pole
POLE_EPS = 1e-12


def _as_half_integer(s):
    two_s = Fraction(s).limit_denominator(1000) * 2
    if two_s.denominator != 1 or two_s < 0 or abs(float(two_s) - 2 * float(s)) > 1e-12:
        raise ValueError(f"spin quantum number must be a non-negative half-integer, got {s!r}")
    return int(two_s)


@dataclass(frozen=True, eq=False)
class SpinRep:
    """
    The (2s+1)-dimensional irreducible representation of su(2).

    Basis ordering is by weight, ``|s,s>, |s,s-1>, ..., |s,-s>``.

    Attributes
    ----------
    two_s : int
        Twice the spin quantum number.
    S : ndarray, shape (3, 2s+1, 2s+1)
        Hermitian generators ``dpi_s(sigma_k/2)``.
    """
    two_s: int
    S: np.ndarray

    @property
    def s(self):
        return self.two_s / 2

    @property
    def dim(self):
        return self.two_s + 1

    @property
    def S1(self):
        return self.S[0]

    @property
    def S2(self):
        return self.S[1]

    @property
    def S3(self):
        return self.S[2]

    def highest_weight(self):
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def dot(self, x):
        """``x . S`` for a real 3-vector (or a stack of them, shape (..., 3))."""
        return np.tensordot(np.asarray(x, dtype=float), self.S, axes=([-1], [0]))


def make_spin_matrices(s):
    """
    Build the spin matrices of the irreducible representation with spin `s`.

    Parameters
    ----------
    s : float or Fraction
        Spin quantum number; ``2*s`` must be a non-negative integer.

    Returns
    -------
    SpinRep
    """
    two_s = _as_half_integer(s)
    sv = two_s / 2
    m = sv - np.arange(two_s + 1)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1)); raising moves one slot towards index 0
    sp = np.diag(np.sqrt(sv * (sv + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sm = sp.conj().T
    S = np.array([(sp + sm) / 2, (sp - sm) / 2j, np.diag(m).astype(complex)])
    S.setflags(write=False)
    return SpinRep(two_s, S)


def spherical_angles(n):
    """Return ``(theta, phi)`` of a unit vector with ``theta`` in [0, pi], ``phi`` in [0, 2pi)."""
    n = np.asarray(n, dtype=float)
    # atan2 keeps full relative precision near the poles, where arccos does not
    theta = np.arctan2(np.hypot(n[..., 0], n[..., 1]), n[..., 2])
    phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2 * np.pi)
    return theta, phi


def unit_vector(theta, phi):
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def section_g(n):
    """
    Local section ``g_n = exp(-i theta/2 e_phi . sigma)`` of SU(2) -> S^2.

    At the south pole the azimuth is undefined; the limit along ``phi = 0`` is
    used there, ``g = [[0, -1], [1, 0]]``.
    """
    theta, phi = spherical_angles(n)
    if np.pi - theta < POLE_EPS:
        phi = 0.0
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s * np.exp(-1j * phi)],
                     [s * np.exp(1j * phi), c]])


def rotation_of(g):
    """SO(3) image ``R(g)`` of ``g`` in SU(2): ``(R x).sigma = g (x.sigma) g^-1``."""
    g = np.asarray(g, dtype=complex)
    ginv = np.linalg.inv(g)
    R = np.empty((3, 3))
    for j in range(3):
        A = g @ PAULI[j] @ ginv
        R[:, j] = 0.5 * np.real(np.einsum('kab,ba->k', PAULI, A))
    return R


def rep_exponential(rep, x, angle):
    """
    ``pi_s(exp(-i angle x.sigma/2)) = exp(-i angle x.S)`` for a unit axis `x`.

    Computed from the eigendecomposition of the Hermitian matrix ``x.S``.
    """
    w, V = np.linalg.eigh(rep.dot(x))
    return (V * np.exp(-1j * angle * w)) @ V.conj().T


def rep_of_group_element(rep, g):
    """Representation matrix ``pi_s(g)`` of a 2x2 SU(2) matrix."""
    g = np.asarray(g, dtype=complex)
    c = 0.5 * np.real(np.trace(g))
    v = np.real(0.5j * np.einsum('ab,kba->k', g, PAULI))
    sin_half = np.linalg.norm(v)
    if sin_half < 1e-15:
        if c > 0:
            return np.eye(rep.dim, dtype=complex)
        # g = -1: pi_s(-1) = (-1)^(2s)
        return (-1.0) ** rep.two_s * np.eye(rep.dim, dtype=complex)
    angle = 2 * np.arctan2(sin_half, c)
    return rep_exponential(rep, v / sin_half, angle)


def coherent_vector(rep, n):
    """Spin-coherent vector ``pi_s(g_n)|s,s>``."""
    return rep_of_group_element(rep, section_g(n))[:, 0]


def transported_vector(rep, g, n0):
    """``pi_s(g g_{n0})|s,s>``, the quantum evolution of the coherent vector at `n0`."""
    return rep_of_group_element(rep, np.asarray(g) @ section_g(n0))[:, 0]


def husimi_overlap(rep, m, n, check=True):
    """
    Husimi transform ``|<phi_m, phi_n>|`` of the coherent state at `n`, evaluated at `m`.

    The result is compared with ``((1 + m.n)/2)^s`` and an ``AssertionError`` is
    raised when the two differ by more than 1e-10.
    """
    val = abs(np.vdot(coherent_vector(rep, m), coherent_vector(rep, n)))
    if check:
        expected = (0.5 * (1 + np.dot(m, n))) ** rep.s
        assert abs(val - expected) <= 1e-10, (val, expected)
    return val


def overlap_phase(rep, n, m):
    """
    Complex overlap ``<phi_n, phi_m>`` including its phase.

    Raises
    ------
    ValueError
        For (numerically) antipodal `n`, `m`, where the overlap vanishes and the
        phase is undefined.
    """
    if 1 + np.dot(n, m) < 1e-12:
        raise ValueError("antipodal coherent states: overlap vanishes, phase undefined")
    return np.vdot(coherent_vector(rep, n), coherent_vector(rep, m))


@dataclass(frozen=True)
class SphereQuadrature:
    """Product Gauss-Legendre (in cos theta) x trapezoid (in phi) rule, normalised to total weight 1."""
    nodes: np.ndarray
    weights: np.ndarray
    degree: int


def sphere_quadrature(degree):
    """Quadrature on S^2 exact for polynomials in n of total degree <= `degree`."""
    n_theta = degree // 2 + 1
    n_phi = degree + 1
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - u ** 2)
    nodes = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                      np.outer(u, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    weights = np.outer(wu / 2, np.full(n_phi, 1.0 / n_phi)).ravel()
    return SphereQuadrature(nodes, weights, degree)


def berezin_reconstruct(rep, P, quad=None):
    """
    Operator with upper symbol `P`: ``(2s+1) * int P(n) |phi_n><phi_n| dn``.

    Parameters
    ----------
    rep : SpinRep
    P : callable
        Function of a unit 3-vector returning a scalar.
    quad : SphereQuadrature, optional
        Defaults to a rule of degree ``2s + 2``.

    Raises
    ------
    ValueError
        If `quad` is not exact up to degree ``2s + 2``.
    """
    need = rep.two_s + 2
    if quad is None:
        quad = sphere_quadrature(need)
    if quad.degree < need:
        raise ValueError(f"quadrature degree {quad.degree} < {need} required for s={rep.s}")
    L = np.zeros((rep.dim, rep.dim), dtype=complex)
    for n, w in zip(quad.nodes, quad.weights):
        v = coherent_vector(rep, n)
        L += w * P(n) * np.outer(v, v.conj())
    return rep.dim * L
