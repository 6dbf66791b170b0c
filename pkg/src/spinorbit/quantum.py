"""
spinorbit.quantum
-----------------

Reference propagation of spinor wavefunctions on a periodic FFT grid.

Restricted to symbols ``H = |xi|^2/2m + V(x) + C(x).S_hat``, for which the Weyl
quantisation is ordering-free: the Strang splitting

    exp(-i dt K / 2hbar) exp(-i dt (V + C.S_hat) / hbar) exp(-i dt K / 2hbar)

uses a Fourier multiplier for ``K`` and, at every grid point, the exact
(2s+1)-dimensional matrix exponential for the spin term.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .spin import make_spin_matrices


class WrapAroundError(RuntimeError):
    """The wavefunction reached the edge of the periodic grid in position or momentum."""


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid on a box in ``R^d`` (d = 1 or 2).

    Parameters
    ----------
    x_min, x_max : tuple of float
        Box edges per axis; ``x_max`` is excluded (periodic identification).
    n_points : tuple of int
        Points per axis, each a power of two.
    """
    x_min: tuple
    x_max: tuple
    n_points: tuple

    def __post_init__(self):
        object.__setattr__(self, "x_min", tuple(float(v) for v in np.atleast_1d(self.x_min)))
        object.__setattr__(self, "x_max", tuple(float(v) for v in np.atleast_1d(self.x_max)))
        object.__setattr__(self, "n_points", tuple(int(v) for v in np.atleast_1d(self.n_points)))
        if not (len(self.x_min) == len(self.x_max) == len(self.n_points)) or self.d not in (1, 2):
            raise ValueError("grid must have 1 or 2 consistent axes")
        for a, b, n in zip(self.x_min, self.x_max, self.n_points):
            if not b > a:
                raise ValueError("x_max must exceed x_min")
            if n < 2 or n & (n - 1):
                raise ValueError(f"number of grid points must be a power of two, got {n}")

    @classmethod
    def line(cls, x_min, x_max, n_points):
        return cls((x_min,), (x_max,), (n_points,))

    @property
    def d(self):
        return len(self.n_points)

    @property
    def shape(self):
        return self.n_points

    @property
    def lengths(self):
        return tuple(b - a for a, b in zip(self.x_min, self.x_max))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.n_points))

    @property
    def dV(self):
        return float(np.prod(self.spacing))

    def axes(self):
        return [a + h * np.arange(n) for a, h, n in zip(self.x_min, self.spacing, self.n_points)]

    def points(self):
        """Coordinates with shape ``(*shape, d)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def wavenumbers(self):
        """Angular wavenumbers per axis in FFT order; momenta are ``hbar * k``."""
        return [2 * np.pi * np.fft.fftfreq(n, h) for n, h in zip(self.n_points, self.spacing)]

    def k_squared(self):
        ks = np.meshgrid(*self.wavenumbers(), indexing="ij")
        return sum(k ** 2 for k in ks)

    def nyquist_momentum(self, hbar):
        return tuple(np.pi * hbar / h for h in self.spacing)

    def refined(self):
        """Same box with twice the points per axis."""
        return Grid(self.x_min, self.x_max, tuple(2 * n for n in self.n_points))

    def to_dict(self):
        return {"x_min": list(self.x_min), "x_max": list(self.x_max), "n_points": list(self.n_points)}


@dataclass
class GridState:
    """
    Spinor wavefunction sampled on a grid.

    ``psi`` has shape ``(*grid.shape, 2s+1)``.
    """
    psi: np.ndarray
    grid: Grid
    hbar: float
    rep: object
    t: float = 0.0

    def __post_init__(self):
        if self.psi.shape != self.grid.shape + (self.rep.dim,):
            raise ValueError(f"psi has shape {self.psi.shape}, expected {self.grid.shape + (self.rep.dim,)}")

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.grid.dV))

    def inner(self, other):
        """``<self, other>`` in ``L^2 x C^(2s+1)``."""
        _check_compatible(self, other)
        return complex(np.vdot(self.psi, other.psi) * self.grid.dV)

    def copy(self):
        return GridState(self.psi.copy(), self.grid, self.hbar, self.rep, self.t)


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    tail_threshold: float = 1e-10
    edge_fraction: float = 1 / 16

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")


def _check_compatible(a, b):
    if a.grid != b.grid or a.psi.shape != b.psi.shape:
        raise ValueError("states live on different grids or spin spaces")


def error_norm(a, b):
    """Discrete ``L^2 x C^(2s+1)`` norm of ``a - b`` (global phase included)."""
    _check_compatible(a, b)
    return float(np.sqrt(np.sum(np.abs(a.psi - b.psi) ** 2) * a.grid.dV))


def edge_mass(state, fraction=1 / 16):
    """
    Probability in the outer `fraction` of the box (position) and of the
    momentum window (near the Nyquist edge), per axis, summed.
    """
    grid = state.grid
    rho = np.sum(np.abs(state.psi) ** 2, axis=-1) * grid.dV
    phat = np.fft.fftn(state.psi, axes=tuple(range(grid.d)))
    rho_k = np.sum(np.abs(phat) ** 2, axis=-1)
    rho_k *= np.sum(rho) / max(np.sum(rho_k), 1e-300)
    pos = mom = 0.0
    for ax, n in enumerate(grid.n_points):
        m = max(1, int(round(fraction * n)))
        idx = np.r_[0:m, n - m:n]
        pos += np.take(rho, idx, axis=ax).sum()
        # FFT order: the largest |k| sit around index n/2
        kidx = np.arange(n // 2 - m, n // 2 + m)
        mom += np.take(rho_k, kidx, axis=ax).sum()
    return float(pos), float(mom)


class SplitStepPropagator:
    """
    Strang-split propagator for a separable spin-orbit model on a fixed grid.

    Parameters
    ----------
    model : SpinOrbitModel
        Must have ``H0 = |xi|^2/2m + V(x)`` and ``C = C(x)``; all built-ins do.
    grid : Grid
    hbar : float
    rep : SpinRep
    config : PropagatorConfig
    """

    def __init__(self, model, grid, hbar, rep, config):
        if model.d != grid.d:
            raise ValueError("model and grid dimensions differ")
        self.model, self.grid, self.hbar, self.rep, self.config = model, grid, hbar, rep, config
        dt = config.dt
        self.axes = tuple(range(grid.d))
        ksq = grid.k_squared()
        kin = hbar * ksq / (2 * model.mass)  # K / hbar
        self._khalf = np.exp(-0.5j * dt * kin)[..., None]
        self._kfull = self._khalf ** 2
        x = grid.points()
        self._vphase = np.exp(-1j * dt * model.potential(x) / hbar)[..., None]
        self._spin_mode, self._spin_op = self._spin_factor(x, dt)
        self._x, self._kin = x, kin
        self._checked = False

    def stability_number(self, state, cutoff=1e-10):
        """
        ``dt`` times the largest local energy scale (divided by hbar) seen by `state`.

        Only grid points and wavenumbers carrying more than `cutoff` of the
        peak density count. The potential enters through its deviation from
        the best affine fit over the occupied region (an affine potential only
        shifts momenta), the field through ``|C| s``, and the kinetic energy at
        the largest occupied wavenumber.
        """
        dens = np.sum(np.abs(state.psi) ** 2, axis=-1)
        occ = dens > cutoff * dens.max()
        x = self._x[occ]
        V = self.model.potential(x)
        A = np.column_stack([np.ones(len(x)), x])
        resid = V - A @ np.linalg.lstsq(A, V, rcond=None)[0]
        C = np.linalg.norm(self.model.field(x), axis=-1)
        dk = np.sum(np.abs(np.fft.fftn(state.psi, axes=self.axes)) ** 2, axis=-1)
        kin = self._kin[dk > cutoff * dk.max()]
        scale = np.max(np.abs(resid)) / self.hbar + C.max() * self.rep.s + kin.max()
        return float(self.config.dt * scale)

    def _spin_factor(self, x, dt):
        # C.S_hat / hbar = C . dpi_s(sigma/2): hbar drops out of the spin factor
        rep = self.rep
        if self.model.constant_field:
            C = self.model.field(x.reshape(-1, self.grid.d)[:1])[0]
            w, V = np.linalg.eigh(rep.dot(C))
            return "constant", (V * np.exp(-1j * dt * w)) @ V.conj().T
        C = self.model.field(x)
        if np.all(C[..., :2] == 0):
            m = np.real(np.diag(rep.S3))
            return "diagonal", np.exp(-1j * dt * C[..., 2:3] * m)
        w, V = np.linalg.eigh(rep.dot(C))
        U = np.einsum('...ij,...j,...kj->...ik', V, np.exp(-1j * dt * w), V.conj())
        return "general", U

    def _apply_potential(self, psi):
        psi = psi * self._vphase
        if self._spin_mode == "constant":
            return psi @ self._spin_op.T
        if self._spin_mode == "diagonal":
            return psi * self._spin_op
        return np.einsum('...ij,...j->...i', self._spin_op, psi)

    def steps(self, psi, n_steps):
        """Apply `n_steps` Strang steps to a raw array; returns a new array."""
        if n_steps == 0:
            return psi.copy()
        fft, ifft = np.fft.fftn, np.fft.ifftn
        phat = fft(psi, axes=self.axes) * self._khalf
        for i in range(n_steps):
            psi = self._apply_potential(ifft(phat, axes=self.axes))
            phat = fft(psi, axes=self.axes)
            phat *= self._khalf if i == n_steps - 1 else self._kfull
        return ifft(phat, axes=self.axes)

    def check_tails(self, state):
        pos, mom = edge_mass(state, self.config.edge_fraction)
        if pos > self.config.tail_threshold or mom > self.config.tail_threshold:
            raise WrapAroundError(
                f"t={state.t:.4g}: edge mass position {pos:.3g}, momentum {mom:.3g} "
                f"exceeds {self.config.tail_threshold:.3g}; enlarge or refine the grid")

    def propagate(self, state, times):
        """
        Propagate `state` to each of the increasing `times`, returning snapshots.

        Every interval is covered by an integer number of steps of length at
        most ``config.dt``.
        """
        out = []
        cur = state
        sn = self.stability_number(state) if not self._checked else 0.0
        self._checked = True
        if sn > 0.5:
            warnings.warn(f"dt times the local energy scale is {sn:.3g} > 0.5; "
                          "reduce the time step", RuntimeWarning)
        for t in times:
            span = t - cur.t
            if span < -1e-12:
                raise ValueError("times must be non-decreasing and not before the state time")
            n = int(np.ceil(span / self.config.dt - 1e-9)) if span > 0 else 0
            if n and abs(span / n - self.config.dt) > 1e-12 * self.config.dt:
                prop = SplitStepPropagator(self.model, self.grid, self.hbar, self.rep,
                                           PropagatorConfig(span / n, self.config.tail_threshold,
                                                            self.config.edge_fraction))
            else:
                prop = self
            cur = GridState(prop.steps(cur.psi, n), self.grid, self.hbar, self.rep, float(t))
            self.check_tails(cur)
            out.append(cur)
        return out


def split_step(model, state, config, t_final):
    """Propagate `state` to `t_final` with the Strang-split reference solver."""
    prop = SplitStepPropagator(model, state.grid, state.hbar, state.rep, config)
    prop.check_tails(state)
    return prop.propagate(state, [t_final])[-1]


def apply_hamiltonian(model, state):
    """``H psi`` with ``H = |xi|^2/2m + V + C.S_hat``."""
    grid, hbar, rep = state.grid, state.hbar, state.rep
    axes = tuple(range(grid.d))
    x = grid.points()
    kin = np.fft.ifftn(np.fft.fftn(state.psi, axes=axes)
                       * (hbar ** 2 * grid.k_squared() / (2 * model.mass))[..., None], axes=axes)
    pot = model.potential(x)[..., None] * state.psi
    CS = rep.dot(model.field(x))
    spin = hbar * np.einsum('...ij,...j->...i', CS, state.psi)
    return kin + pot + spin


def observables(state, model=None):
    """
    Expectation values of a normalised state.

    Returns
    -------
    dict
        ``x`` (d,), ``p`` (d,), ``spin`` = <S_hat>/hbar (3,), and ``energy``
        when a model is given.
    """
    grid = state.grid
    axes = tuple(range(grid.d))
    dens = np.sum(np.abs(state.psi) ** 2, axis=-1) * grid.dV
    x = grid.points()
    xm = np.sum(dens[..., None] * x, axis=axes)
    phat = np.fft.fftn(state.psi, axes=axes)
    dk = np.sum(np.abs(phat) ** 2, axis=-1)
    dk /= dk.sum()
    ks = np.stack(np.meshgrid(*grid.wavenumbers(), indexing="ij"), axis=-1)
    pm = state.hbar * np.sum(dk[..., None] * ks, axis=axes)
    flat = state.psi.reshape(-1, state.rep.dim)
    spin = np.real(np.einsum('xa,kab,xb->k', flat.conj(), state.rep.S, flat)) * grid.dV
    out = {"x": xm, "p": pm, "spin": spin}
    if model is not None:
        out["energy"] = float(np.real(np.vdot(state.psi, apply_hamiltonian(model, state))) * grid.dV)
    return out


def export_snapshot(state, prefix):
    """Write ``<prefix>.npy`` (the complex array) and ``<prefix>.json`` (header)."""
    np.save(f"{prefix}.npy", state.psi)
    header = {"grid": state.grid.to_dict(), "hbar": state.hbar, "s": state.rep.s,
              "t": state.t, "shape": list(state.psi.shape), "dtype": str(state.psi.dtype)}
    with open(f"{prefix}.json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)


def load_snapshot(prefix):
    with open(f"{prefix}.json") as fh:
        header = json.load(fh)
    g = header["grid"]
    grid = Grid(tuple(g["x_min"]), tuple(g["x_max"]), tuple(g["n_points"]))
    return GridState(np.load(f"{prefix}.npy"), grid, header["hbar"],
                     make_spin_matrices(header["s"]), header["t"])
