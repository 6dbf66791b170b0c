"""
spinorbit.classical
-------------------

Classical flows underlying coherent-state propagation.

Two flows are supported:

* ``skew``: the translational motion is generated by ``H0`` alone and drives
  the spin through ``n' = C(z) x n`` (no back-reaction);
* ``spin_orbit``: the Hamiltonian flow of ``H0 + S n.C`` on ``T*R^d x S^2``.

Along with the phase-space point and the spin direction the integrator
carries the monodromy matrix (variational equation), the principal function
``int p dq - H0 dt`` and the SU(2) transport matrix ``g(t)``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import spin as _spin


class IntegrationError(RuntimeError):
    pass


class ChartError(ValueError):
    """Raised when a spherical-coordinate formula is used too close to a pole."""


@dataclass(frozen=True)
class FlowKind:
    kind: str = "skew"
    S: float = 0.0

    def __post_init__(self):
        if self.kind not in ("skew", "spin_orbit"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if self.kind == "spin_orbit" and not self.S > 0:
            raise ValueError("spin_orbit flow requires a positive spin length S")

    @classmethod
    def skew(cls):
        return cls("skew", 0.0)

    @classmethod
    def spin_orbit(cls, S):
        return cls("spin_orbit", float(S))


def symplectic_J(d):
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = np.eye(d)
    J[d:, :d] = -np.eye(d)
    return J


def hs_norm(A):
    return np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))


class _Layout:
    """Slices of the flat ODE state vector."""

    def __init__(self, d, blocks):
        sizes = {"z": 2 * d, "n": 3, "S": 4 * d * d, "R": 1, "g": 8}
        self.slices = {}
        i = 0
        for b in blocks:
            self.slices[b] = slice(i, i + sizes[b])
            i += sizes[b]
        self.size = i
        self.d = d

    def __getitem__(self, b):
        return self.slices[b]

    def get_g(self, y):
        gr = y[self.slices["g"]]
        return (gr[:4] + 1j * gr[4:]).reshape(2, 2)

    def pack_g(self, g):
        g = np.asarray(g).ravel()
        return np.concatenate([g.real, g.imag])


class _Piecewise:
    """Dense output assembled from consecutive solve_ivp chunks."""

    def __init__(self):
        self.bounds = []
        self.sols = []
        self.scales = []

    def append(self, t0, t1, sol, log_scale):
        self.bounds.append((t0, t1))
        self.sols.append(sol)
        self.scales.append(log_scale)

    def _index(self, t):
        for i, (a, b) in enumerate(self.bounds):
            if t <= b or i == len(self.bounds) - 1:
                return i

    def __call__(self, t):
        i = self._index(t)
        return self.sols[i](t), self.scales[i]


def _solve(fun, t0, t1, y0, tol, t_eval=None):
    if t1 == t0:
        return None
    sol = solve_ivp(fun, (t0, t1), y0, method="DOP853", rtol=tol, atol=tol,
                    dense_output=True, t_eval=t_eval)
    if sol.status != 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol


@dataclass
class TrajectoryBundle:
    """
    Sampled solution of a classical flow with all accumulated quantities.

    Attributes
    ----------
    t : ndarray (T,)
    z : ndarray (T, 2d)
        Phase-space points ``(q, p)``.
    n : ndarray (T, 3)
        Spin directions, renormalised to unit length.
    S : ndarray (T, 2d, 2d)
        Monodromy matrices divided by ``exp(log_scale)``.
    log_scale : ndarray (T,)
        Accumulated logarithmic renormalisation of the monodromy (zero unless
        `renormalize` was requested).
    action : ndarray (T,)
        Principal function ``int (p dq/dt - H0) dt``.
    g : ndarray (T, 2, 2)
        SU(2) transport, ``g' = -(i/2) C.sigma g``.
    rho : ndarray (T,)
        Spin angle extracted from the transport, continuous modulo nothing.
    energy : ndarray (T,)
        ``H0`` (skew) or ``H_so`` (spin_orbit) along the samples.
    """
    model: object
    kind: FlowKind
    t: np.ndarray
    z: np.ndarray
    n: np.ndarray
    S: np.ndarray
    log_scale: np.ndarray
    action: np.ndarray
    g: np.ndarray
    rho: np.ndarray
    energy: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    dense: object = None
    spin_dense: object = None

    @property
    def d(self):
        return self.z.shape[1] // 2

    @property
    def monodromy(self):
        """True monodromy matrices (may overflow for long unstable runs)."""
        return self.S * np.exp(self.log_scale)[:, None, None]

    @property
    def log_hs(self):
        """``log ||S(t)||_HS`` including renormalisation."""
        return self.log_scale + np.log(hs_norm(self.S))

    def state_at(self, t):
        """Interpolated ``(z, n, S, action, g)`` at time `t`, with the true monodromy."""
        y, ls = self.dense(t)
        lay = self.diagnostics["layout"]
        z = y[lay["z"]]
        S = y[lay["S"]].reshape(2 * self.d, 2 * self.d) * np.exp(ls)
        R = y[lay["R"]][0]
        if self.spin_dense is not None:
            ys = self.spin_dense(t)
            slay = self.diagnostics["spin_layout"]
            n, g = ys[slay["n"]], slay.get_g(ys)
        else:
            n, g = y[lay["n"]], lay.get_g(y)
        return z, n / np.linalg.norm(n), S, R, g


def _flow_rhs(model, kind, lay, with_spin):
    d = model.d
    J = symplectic_J(d)
    so = kind.kind == "spin_orbit"
    Sspin = kind.S

    def rhs(t, y):
        w = y[lay["z"]]
        out = np.empty_like(y)
        if so:
            n = y[lay["n"]]
            grad = model.grad_h_so(w, n, Sspin)
            hess = model.hess_h_so(w, n, Sspin)
        else:
            grad = model.grad_h0(w)
            hess = model.hess_h0(w)
        qdot = grad[d:]
        out[lay["z"]] = np.concatenate([qdot, -grad[:d]])
        M = y[lay["S"]].reshape(2 * d, 2 * d)
        out[lay["S"]] = (J @ hess @ M).ravel()
        out[lay["R"]] = w[d:] @ qdot - model.h0(w)
        if with_spin:
            C = model.C(w)
            out[lay["n"]] = np.cross(C, y[lay["n"]])
            g = lay.get_g(y)
            out[lay["g"]] = lay.pack_g(-0.5j * np.einsum('k,kab->ab', C, _spin.PAULI) @ g)
        return out

    return rhs


def _spin_rhs(model, orbit, lay, slay):
    def rhs(t, y):
        yo, _ = orbit(t)
        C = model.C(yo[lay["z"]])
        out = np.empty_like(y)
        out[slay["n"]] = np.cross(C, y[slay["n"]])
        out[slay["g"]] = slay.pack_g(-0.5j * np.einsum('k,kab->ab', C, _spin.PAULI) @ slay.get_g(y))
        return out
    return rhs


def rho_from_transport(g, n0, n):
    """
    Spin angle ``rho`` defined by ``g_{n(t)}^-1 g(t) g_{n0} = exp(i rho sigma_3 / 2)``.

    Values are unwrapped with period ``4 pi`` (``rho`` is determined modulo 4 pi
    by the SU(2) element).
    """
    gn0 = _spin.section_g(n0)
    rho = np.empty(len(g))
    for i, (gi, ni) in enumerate(zip(g, n)):
        M = np.linalg.solve(_spin.section_g(ni), gi @ gn0)
        rho[i] = 2 * np.angle(M[0, 0])
    return np.unwrap(rho, period=4 * np.pi)


def integrate_flow(model, kind, z0, n0, t_final, tol=1e-12, times=None,
                   renormalize=None, with_spin=True):
    """
    Integrate a classical flow together with its monodromy, action and spin transport.

    Parameters
    ----------
    model : SpinOrbitModel
    kind : FlowKind
    z0 : array_like (2d,)
    n0 : array_like (3,)
        Initial unit spin direction.
    t_final : float
    tol : float
        Relative and absolute tolerance of the DOP853 integrator.
    times : array_like, optional
        Output times in ``[0, t_final]``; defaults to 201 uniform samples.
    renormalize : float, optional
        If given, the monodromy is rescaled to unit HS norm every `renormalize`
        time units and the logarithm of the scale is accumulated.
    with_spin : bool
        For the skew flow, whether to integrate the spin block at all. The
        translational solution does not depend on it.

    Returns
    -------
    TrajectoryBundle
    """
    z0 = np.asarray(z0, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    if abs(np.linalg.norm(n0) - 1) > 1e-12:
        raise ValueError("initial spin direction must be a unit vector")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    d = model.d
    if times is None:
        times = np.linspace(0.0, t_final, 201)
    times = np.asarray(times, dtype=float)
    so = kind.kind == "spin_orbit"
    joint_spin = so
    if so and not with_spin:
        raise ValueError("the spin_orbit flow cannot be integrated without its spin block")

    blocks = ["z", "n", "S", "R", "g"] if joint_spin else ["z", "S", "R"]
    lay = _Layout(d, blocks)
    y = np.zeros(lay.size)
    y[lay["z"]] = z0
    y[lay["S"]] = np.eye(2 * d).ravel()
    if joint_spin:
        y[lay["n"]] = n0
        y[lay["g"]] = lay.pack_g(np.eye(2))
    rhs = _flow_rhs(model, kind, lay, joint_spin)

    if t_final > 0:
        chunk = renormalize if renormalize else t_final
        edges = list(np.arange(0.0, t_final, chunk)) + [t_final]
    else:
        edges = [0.0]
    if len(edges) > 1 and edges[-1] - edges[-2] < 1e-12 * max(1.0, t_final):
        edges.pop(-2)
    orbit = _Piecewise()
    samples = np.empty((len(times), lay.size))
    scales = np.zeros(len(times))
    log_scale = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        sol = _solve(rhs, a, b, y, tol)
        orbit.append(a, b, sol.sol, log_scale)
        mask = (times >= a) & (times <= b)
        if np.any(mask):
            samples[mask] = sol.sol(times[mask]).T
            scales[mask] = log_scale
        y = sol.y[:, -1].copy()
        if renormalize:
            c = np.linalg.norm(y[lay["S"]])
            y[lay["S"]] /= c
            log_scale += np.log(c)
    if len(edges) == 1:
        # zero-length integration: only the initial state
        orbit.append(0.0, 0.0, lambda t, y0=y.copy(): y0, 0.0)
        samples[:] = y

    z = samples[:, lay["z"]]
    S = samples[:, lay["S"]].reshape(-1, 2 * d, 2 * d)
    R = samples[:, lay["R"]][:, 0]
    diagnostics = {"layout": lay}
    spin_dense = None
    if joint_spin:
        n = samples[:, lay["n"]]
        g = np.array([lay.get_g(row) for row in samples])
    elif with_spin:
        slay = _Layout(d, ["n", "g"])
        ys0 = np.concatenate([n0, slay.pack_g(np.eye(2))])
        if t_final > 0:
            ssol = _solve(_spin_rhs(model, orbit, lay, slay), 0.0, t_final, ys0, tol)
            ys = ssol.sol(times).T
            spin_dense = ssol.sol
        else:
            ys = np.tile(ys0, (len(times), 1))
            spin_dense = lambda t, y0=ys0: y0
        n = ys[:, slay["n"]]
        g = np.array([slay.get_g(row) for row in ys])
        diagnostics["spin_layout"] = slay
    else:
        n = np.tile(n0, (len(times), 1))
        g = np.tile(np.eye(2, dtype=complex), (len(times), 1, 1))

    drift = np.max(np.abs(np.linalg.norm(n, axis=1) - 1))
    if drift > 1e-8:
        raise IntegrationError(f"spin length drifted by {drift:.3g} (tolerance too loose?)")
    n = n / np.linalg.norm(n, axis=1)[:, None]
    diagnostics["spin_norm_drift"] = float(drift)
    diagnostics["det_g_defect"] = float(np.max(np.abs(np.linalg.det(g) - 1)))

    if so:
        energy = model.h_so(z, n, kind.S)
    else:
        energy = model.h0(z)
    diagnostics["energy_drift"] = float(np.max(np.abs(energy - energy[0])) / max(1.0, abs(energy[0])))
    if not renormalize:
        J = symplectic_J(d)
        defect = np.einsum('tji,jk,tkl->til', S, J, S) - J
        diagnostics["symplectic_defect"] = float(np.max(np.abs(defect)))

    rho = rho_from_transport(g, n0, n) if with_spin else np.zeros(len(times))
    return TrajectoryBundle(model, kind, times, z, n, S, scales, R, g, rho, energy,
                            diagnostics, orbit, spin_dense)


def rho_via_quadrature(traj, tol=1e-12, margin=1e-3):
    """
    Spin angle from the spherical-coordinate quadrature
    ``rho(t) = -int (C.n + (1 - cos theta) dphi/dt) dt``.

    Raises
    ------
    ChartError
        If the trajectory comes within `margin` radians of either pole, where
        the azimuth is singular; use ``traj.rho`` (transport based) instead.
    """
    model = traj.model
    T = traj.t[-1]
    probe = np.linspace(0.0, T, max(20 * len(traj.t), 2001))
    n_probe = np.array([traj.state_at(t)[1] for t in probe])
    theta = np.arccos(np.clip(n_probe[:, 2], -1, 1))
    if np.min(theta) < margin or np.max(theta) > np.pi - margin:
        raise ChartError("trajectory passes within the pole margin of the spherical chart")

    def integrand(t, _):
        z, n, *_ = traj.state_at(t)
        C = model.C(z)
        ndot = np.cross(C, n)
        phidot = (n[0] * ndot[1] - n[1] * ndot[0]) / (n[0] ** 2 + n[1] ** 2)
        return [-(C @ n + (1 - n[2]) * phidot)]

    if T == 0:
        return np.zeros_like(traj.t)
    sol = solve_ivp(integrand, (0.0, T), [0.0], method="DOP853", rtol=tol, atol=tol,
                    t_eval=traj.t)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y[0]


def spin_orbit_action(traj, S):
    """Total principal function ``R_so = int (p dq - H0 dt) + S rho``."""
    return traj.action + S * traj.rho


def lyapunov_max(traj, window=1 / 3):
    """
    Largest Lyapunov (or stability) exponent ``lim (1/2t) log tr(S^T S)``.

    Estimated as the least-squares slope of ``log ||S(t)||_HS`` over the final
    `window` fraction of the samples. For meaningful results integrate with
    ``renormalize`` set so the monodromy never overflows.
    """
    t = traj.t
    mask = t >= t[-1] * (1 - window)
    if mask.sum() < 2:
        raise ValueError("not enough samples in the final window")
    return float(np.polyfit(t[mask], traj.log_hs[mask], 1)[0])


def growth_power(traj, periods=50):
    """
    Fitted power ``k`` in ``||S(t)||_HS^2 - 2d ~ f t^k``.

    Oscillations along quasi-periodic orbits are removed by taking the maximum
    of ``||S||^2`` over `periods` consecutive windows before the log-log fit.
    The first window is discarded.
    """
    t = traj.t
    s2 = np.exp(2 * traj.log_hs) - 2 * traj.d
    edges = np.linspace(0, t[-1], periods + 1)
    tt, ss = [], []
    for a, b in zip(edges[1:-1], edges[2:]):
        m = (t > a) & (t <= b)
        if m.any():
            i = np.argmax(s2[m])
            tt.append(t[m][i])
            ss.append(s2[m][i])
    return float(np.polyfit(np.log(tt), np.log(ss), 1)[0])


def theta_delta(traj):
    """
    Running stability weights along a trajectory.

    Returns
    -------
    theta : ndarray
        ``max(1, sup_{t'<=t} ||S(t')||_HS)``.
    delta : ndarray
        ``sup_{t'<=t} (1 + |z(t')|)``.
    """
    theta = np.maximum(1.0, np.maximum.accumulate(np.exp(traj.log_hs)))
    delta = np.maximum.accumulate(1 + np.linalg.norm(traj.z, axis=1))
    return theta, delta


def ehrenfest_time(lambda_max, hbar, regime="hyperbolic", const=1.0):
    """
    Time scale up to which the coherent-state approximation is controlled.

    ``hyperbolic``: ``|log hbar| / (6 lambda)``; ``kam``: ``C hbar^(-1/8)``;
    ``kam_degenerate``: ``C hbar^(-1/2)``.
    """
    if not 0 < hbar <= 1:
        raise ValueError("hbar must lie in (0, 1]")
    if regime == "hyperbolic":
        if not lambda_max > 0:
            raise ValueError("hyperbolic regime requires a positive Lyapunov exponent")
        return abs(np.log(hbar)) / (6 * lambda_max)
    if regime == "kam":
        return const * hbar ** (-1 / 8)
    if regime == "kam_degenerate":
        return const * hbar ** (-1 / 2)
    raise ValueError(f"unknown regime {regime!r}")


def export_csv(traj, path):
    """Write ``t, q.., p.., n1, n2, n3, action, rho, theta, energy_drift`` rows."""
    d = traj.d
    theta, _ = theta_delta(traj)
    drift = traj.energy - traj.energy[0]
    header = (["t"] + [f"q{i + 1}" for i in range(d)] + [f"p{i + 1}" for i in range(d)]
              + ["n1", "n2", "n3", "action", "rho", "theta", "energy_drift"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(traj.t)):
            row = [traj.t[i], *traj.z[i], *traj.n[i], traj.action[i], traj.rho[i],
                   theta[i], drift[i]]
            w.writerow([f"{v:.12e}" for v in row])
