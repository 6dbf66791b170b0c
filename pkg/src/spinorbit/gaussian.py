"""
spinorbit.gaussian
------------------

Heisenberg coherent states with Siegel width matrices, tensored with
spin-coherent vectors, and their propagation along classical trajectories.

A packet is

    (pi hbar)^(-d/4) (det Im B)^(1/4) exp(log_prefactor)
        exp(i/hbar [p.(x-q) + (x-q).B(x-q)/2])  (x)  phi_n

with the phase convention of the section ``(q, p) -> (q, p, -qp/2)``.

Under a linear symplectic map ``S = [[A, B'], [C', D]]`` acting on ``(x, xi)`` the
width transforms as ``B -> (C' + D B)(A + B' B)^-1`` and the prefactor
picks up ``det(A + B' B)^(-1/2)``, whose branch is followed continuously along
the trajectory.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from . import classical
from .spin import coherent_vector, make_spin_matrices
from .quantum import GridState


class SiegelError(ValueError):
    pass


class BranchError(RuntimeError):
    """Sampling too coarse to follow the square-root branch unambiguously."""


class GridTooSmallError(ValueError):
    pass


def check_siegel(B, tol=1e-12):
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if np.max(np.abs(B - B.T)) > tol * max(1.0, np.max(np.abs(B))):
        raise SiegelError("width matrix is not symmetric")
    if np.min(np.linalg.eigvalsh(0.5 * (B.imag + B.imag.T))) <= 0:
        raise SiegelError("imaginary part of width matrix is not positive definite")
    return B


@dataclass(frozen=True)
class GaussianPacket:
    """
    Coherent state ``phi^B_(q,p) (x) phi_n``, times ``exp(log_prefactor)``.

    Attributes
    ----------
    q, p : ndarray (d,)
    B : ndarray (d, d), complex
        Element of the Siegel upper half-space.
    hbar : float
    log_prefactor : complex
        Accumulated phase (actions, spin phase, Maslov branch).
    n : ndarray (3,) or None
        Spin direction; None for a spinless packet.
    two_s : int
        Twice the spin quantum number (0 when spinless).
    """
    q: np.ndarray
    p: np.ndarray
    B: np.ndarray
    hbar: float
    log_prefactor: complex = 0j
    n: np.ndarray = None
    two_s: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        object.__setattr__(self, "B", check_siegel(self.B))
        if self.n is not None:
            n = np.asarray(self.n, dtype=float)
            object.__setattr__(self, "n", n / np.linalg.norm(n))
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def d(self):
        return len(self.q)

    @property
    def s(self):
        return self.two_s / 2

    @property
    def rep(self):
        return make_spin_matrices(self.s)

    def spin_vector(self, rep=None):
        if self.n is None:
            return np.ones(1, dtype=complex)
        return coherent_vector(rep or self.rep, self.n)

    def covariance(self):
        """Phase-space covariance ``(hbar/2) G_B^-1`` of ``|psi|^2`` / the Wigner function."""
        return 0.5 * self.hbar * np.linalg.inv(gb_matrix(self.B))

    def to_json(self):
        v = self.spin_vector()
        return json.dumps({
            "q": self.q.tolist(), "p": self.p.tolist(),
            "B_re": self.B.real.tolist(), "B_im": self.B.imag.tolist(),
            "hbar": self.hbar, "s": self.s,
            "n": None if self.n is None else self.n.tolist(),
            "spin_re": v.real.tolist(), "spin_im": v.imag.tolist(),
            "log_prefactor": [self.log_prefactor.real, self.log_prefactor.imag],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        B = np.asarray(d["B_re"]) + 1j * np.asarray(d["B_im"])
        lp = complex(*d["log_prefactor"])
        return cls(d["q"], d["p"], B, d["hbar"], lp, d["n"], int(round(2 * d["s"])))


def gb_matrix(B):
    """
    Real symmetric ``2d x 2d`` matrix ``G_B`` of the Wigner function
    ``W = 2^d exp(-(w - z).G_B(w - z)/hbar)``.
    """
    B = check_siegel(B)
    X, Y = B.real, B.imag
    Yi = np.linalg.inv(Y)
    G = np.block([[Y + X @ Yi @ X, -X @ Yi], [-Yi @ X, Yi]])
    assert np.allclose(G, G.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(G)) > 0
    assert abs(np.linalg.det(G) - 1) <= 1e-10 * max(1.0, np.max(np.abs(G)) ** (2 * len(B)))
    return G


def wigner_function(packet, w):
    """Closed-form Wigner transform at phase-space points `w` (..., 2d)."""
    z = np.concatenate([packet.q, packet.p])
    dw = np.asarray(w) - z
    G = gb_matrix(packet.B)
    return 2.0 ** packet.d * np.exp(-np.einsum('...i,ij,...j->...', dw, G, dw) / packet.hbar)


def wigner_second_moment(packet):
    """``(2 pi hbar)^-d int |w - z|^2 W dw``, in closed form ``(hbar/2) tr G_B^-1``."""
    return 0.5 * packet.hbar * float(np.trace(np.linalg.inv(gb_matrix(packet.B))))


def packet_wavefunction(packet, x):
    """Translational part of the packet at positions `x` (..., d), without spin."""
    dx = np.asarray(x, dtype=float) - packet.q
    hb = packet.hbar
    d = packet.d
    norm = (np.pi * hb) ** (-d / 4) * np.linalg.det(packet.B.imag) ** 0.25
    phase = dx @ packet.p + 0.5 * np.einsum('...i,ij,...j->...', dx, packet.B, dx)
    return norm * np.exp(packet.log_prefactor + 1j * phase / hb)


def tail_mass(packet, grid):
    """
    Upper bound for the probability of the packet falling outside the grid box
    or beyond the Nyquist momentum, from the Gaussian marginals.
    """
    cov = packet.covariance()
    d = packet.d
    total = 0.0
    nyq = grid.nyquist_momentum(packet.hbar)
    for i in range(d):
        sx = np.sqrt(cov[i, i])
        total += 0.5 * erfc((packet.q[i] - grid.x_min[i]) / (sx * np.sqrt(2)))
        total += 0.5 * erfc((grid.x_max[i] - packet.q[i]) / (sx * np.sqrt(2)))
        sp = np.sqrt(cov[d + i, d + i])
        total += 0.5 * erfc((nyq[i] + packet.p[i]) / (sp * np.sqrt(2)))
        total += 0.5 * erfc((nyq[i] - packet.p[i]) / (sp * np.sqrt(2)))
    return float(total)


def evaluate_packet(packet, grid, rep=None, threshold=1e-10):
    """
    Sample the packet (translation tensor spin) on a grid.

    Raises
    ------
    GridTooSmallError
        If more than `threshold` of the probability lies outside the box or
        beyond the representable momenta.
    """
    if grid.d != packet.d:
        raise ValueError("grid and packet dimensions differ")
    mass = tail_mass(packet, grid)
    if mass > threshold:
        raise GridTooSmallError(f"packet tail mass {mass:.3g} outside the grid exceeds {threshold:.3g}")
    rep = rep or packet.rep
    psi = packet_wavefunction(packet, grid.points())[..., None] * packet.spin_vector(rep)
    return GridState(psi, grid, packet.hbar, rep)


def siegel_action(S, B, cond_max=1e12):
    """
    Action of a symplectic matrix on the Siegel upper half-space,
    ``S[B] = (S21 + S22 B)(S11 + S12 B)^-1``.
    """
    S = np.asarray(S, dtype=float)
    B = check_siegel(B)
    d = len(B)
    J = classical.symplectic_J(d)
    if np.max(np.abs(S.T @ J @ S - J)) > 1e-8 * max(1.0, np.max(np.abs(S)) ** 2):
        raise SiegelError("matrix is not symplectic")
    A, Bq, Cp, D = S[:d, :d], S[:d, d:], S[d:, :d], S[d:, d:]
    den = A + Bq @ B
    # singular values relative to the size of the terms forming the denominator
    scale = np.linalg.norm(A, 2) + np.linalg.norm(Bq, 2) * np.linalg.norm(B, 2)
    cond = scale / np.linalg.svd(den, compute_uv=False)[-1]
    if cond > cond_max:
        raise SiegelError(f"denominator of the Siegel action is near-singular (condition {cond:.3g})")
    out = np.linalg.solve(den.T, (Cp + D @ B).T).T
    # Im S[B] = M^-H Im(B) M^-1 with M = A + B'B; stable where the quotient cancels
    Minv = np.linalg.inv(den)
    im = Minv.conj().T @ B.imag @ Minv
    out = 0.5 * (out.real + out.real.T) + 0.5j * (im.real + im.real.T)
    if np.min(np.linalg.eigvalsh(out.imag)) <= 0:
        raise SiegelError("Siegel action left the upper half-space")
    return out


def maslov_denominator(S, B0):
    d = len(B0)
    return complex(np.linalg.det(S[:d, :d] + S[:d, d:] @ B0))


@dataclass(frozen=True)
class MaslovTracker:
    """
    Continuous branch of ``log det(S11 + S12 B0)`` starting from 0 at ``S = 1``.

    ``prefactor`` is the Maslov multiplier ``det(..)^(-1/2)`` on that branch and
    ``index`` the Maslov phase ``sigma`` with ``exp(i pi sigma/2)`` equal to the
    phase of the multiplier.
    """
    w: complex = 1 + 0j
    log_w: complex = 0j

    @property
    def prefactor(self):
        return np.exp(-0.5 * self.log_w)

    @property
    def index(self):
        return -self.log_w.imag / np.pi


def maslov_update(tracker, S_new, B0):
    """Advance the tracker to a new monodromy sample."""
    w = maslov_denominator(np.asarray(S_new), np.atleast_2d(B0))
    step = np.angle(w / tracker.w)
    if abs(step) >= np.pi / 2:
        raise BranchError(f"phase of det jumped by {step:.3f} rad; sample more densely")
    return MaslovTracker(w, tracker.log_w + np.log(abs(w / tracker.w)) + 1j * step)


def track_maslov(traj, B0, times, max_step=0.05):
    """
    Maslov trackers at `times`, following the branch on a refined sub-grid of
    the trajectory's dense output (bisecting wherever the phase moves by
    ``pi/4`` or more between sub-samples).
    """
    B0 = np.atleast_2d(B0)
    tracker = MaslovTracker()
    t_prev = 0.0
    out = []

    def S_at(t):
        return traj.state_at(t)[2]

    for t_target in times:
        n_sub = max(1, int(np.ceil((t_target - t_prev) / max_step)))
        for ta, tb in zip(np.linspace(t_prev, t_target, n_sub + 1)[:-1],
                          np.linspace(t_prev, t_target, n_sub + 1)[1:]):
            stack = [(ta, tb)]
            while stack:
                a, b = stack.pop()
                w = maslov_denominator(S_at(b), B0)
                if abs(np.angle(w / tracker.w)) >= np.pi / 4:
                    if b - a < 1e-9:
                        raise BranchError(f"cannot resolve the Maslov branch near t={b:.6g}")
                    mid = 0.5 * (a + b)
                    stack.extend([(mid, b), (a, mid)])
                    continue
                tracker = maslov_update(tracker, S_at(b), B0)
        out.append(tracker)
        t_prev = t_target
    return out


def riccati_residual(traj, B0, t, hess, h=1e-4):
    """
    Residual of ``-dB/dt = Hxx + Hxxi B + B Hxix + B Hxixi B`` for
    ``B(t) = S(t)[B0]``, with ``dB/dt`` from central differences of the dense
    monodromy. `hess` is the ``2d x 2d`` Hessian of the generating Hamiltonian at ``t``.
    """
    d = len(np.atleast_2d(B0))
    Bp = siegel_action(traj.state_at(t + h)[2], B0)
    Bm = siegel_action(traj.state_at(max(t - h, 0.0))[2], B0)
    dB = (Bp - Bm) / (h + min(h, t))
    B = siegel_action(traj.state_at(t)[2], B0)
    Hxx, Hxk, Hkx, Hkk = hess[:d, :d], hess[:d, d:], hess[d:, :d], hess[d:, d:]
    return float(np.max(np.abs(dB + Hxx + Hxk @ B + B @ Hkx + B @ Hkk @ B)))


def _packet_from_trajectory(packet, traj, trackers, i, R):
    """Packet at sample `i` of `traj` given the total principal function `R`."""
    B = siegel_action(traj.S[i] * np.exp(traj.log_scale[i]), packet.B)
    d = packet.d
    lp = (packet.log_prefactor + 1j * R / packet.hbar
          - 0.5j * trackers[i].log_w.imag)
    # the modulus of the multiplier is carried by (det Im B(t))^(1/4)
    amp = np.exp(-0.5 * trackers[i].log_w.real) * np.linalg.det(packet.B.imag) ** 0.25
    assert abs(amp - np.linalg.det(B.imag) ** 0.25) <= 1e-7 * amp, "Maslov modulus inconsistent with Im B(t)"
    return GaussianPacket(traj.z[i, :d], traj.z[i, d:], B, packet.hbar, lp,
                          traj.n[i] if packet.n is not None else None, packet.two_s,
                          meta={"t": float(traj.t[i]), "maslov_index": trackers[i].index})


def propagate_packet(model, packet, times, scenario="A", S_spin=None, tol=1e-12,
                     return_trajectory=False, riccati_check=True):
    """
    Classically propagated coherent states at each of `times`.

    Scenario ``"A"`` (spin quantum number fixed) uses the skew-product flow of
    ``H0`` with phase ``R0/hbar + s rho``; scenario ``"B"`` (``hbar s = S_spin``
    fixed) uses the spin-orbit Hamiltonian flow with phase
    ``(R0 + S_spin rho)/hbar``. Both add the continuously tracked Maslov phase.

    Returns
    -------
    list of GaussianPacket, and the TrajectoryBundle if `return_trajectory`.
    """
    times = np.asarray(times, dtype=float)
    n0 = packet.n if packet.n is not None else np.array([0.0, 0.0, 1.0])
    z0 = np.concatenate([packet.q, packet.p])
    if scenario == "A":
        kind = classical.FlowKind.skew()
    elif scenario == "B":
        if S_spin is None:
            S_spin = packet.hbar * packet.s
        if abs(S_spin / packet.hbar - packet.s) > 1e-9:
            raise ValueError(f"S/hbar = {S_spin / packet.hbar} does not match the packet spin s = {packet.s}")
        kind = classical.FlowKind.spin_orbit(S_spin)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    t_final = float(times[-1]) if len(times) else 0.0
    traj = classical.integrate_flow(model, kind, z0, n0, t_final, tol=tol, times=times)
    trackers = track_maslov(traj, packet.B, times)
    out = []
    for i, t in enumerate(times):
        if riccati_check and t > 0 and (i == len(times) - 1 or i % 10 == 0):
            z, n, *_ = traj.state_at(t)
            hess = model.hess_h_so(z, n, kind.S) if scenario == "B" else model.hess_h0(z)
            res = riccati_residual(traj, packet.B, t, hess)
            scale = 1 + np.max(np.abs(hess)) * (1 + np.max(np.abs(siegel_action(traj.state_at(t)[2], packet.B)))) ** 2
            if res > 1e-5 * scale:
                raise RuntimeError(f"Riccati cross-check failed at t={t:.4g}: residual {res:.3g}")
        # s rho (scenario A) and S rho / hbar (scenario B) coincide for s = S/hbar
        R = traj.action[i] + packet.hbar * packet.s * traj.rho[i]
        out.append(_packet_from_trajectory(packet, traj, trackers, i, R))
    if return_trajectory:
        return out, traj
    return out


def propagate_packet_scenarioA(model, packet, t):
    """Coherent state at time `t` for fixed spin quantum number."""
    return propagate_packet(model, packet, [0.0, t] if t > 0 else [0.0], "A")[-1]


def propagate_packet_scenarioB(model, packet, S_spin, t):
    """Coherent state at time `t` for fixed ``hbar s = S_spin``."""
    return propagate_packet(model, packet, [0.0, t] if t > 0 else [0.0], "B", S_spin)[-1]


def with_prefactor(packet, log_prefactor):
    return replace(packet, log_prefactor=log_prefactor)
