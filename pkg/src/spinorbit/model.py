"""
spinorbit.model
---------------

Spin-orbit symbols ``H(x, xi) = H0(x, xi) + C(x) . S`` with analytic
derivatives, and a catalog of built-in one-dimensional models.

Every model here is separable, ``H0 = |xi|^2/2m + V(x)``, with a field ``C``
that depends on position only. Phase-space points are ``w = (x, xi)`` of
length ``2d``.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MODEL_NAMES = ("harmonic_const_field", "free_const_field", "inverted_osc",
               "pendulum", "quartic_perturbed", "stern_gerlach")


@dataclass(frozen=True, eq=False)
class SpinOrbitModel:
    """
    Separable spin-orbit symbol.

    The position-space callables act on arrays whose last axis has length `d`
    and broadcast over leading axes.

    Attributes
    ----------
    name : str
    d : int
        Number of translational degrees of freedom.
    potential, grad_potential, hess_potential : callable
        ``V(x)``, shape (...); its gradient, (..., d); Hessian, (..., d, d).
    field, jac_field, hess_field : callable
        ``C(x)``, shape (..., 3); Jacobian (..., 3, d); Hessians (..., 3, d, d).
    mass : float
    params : dict
        Parameter values the model was built with.
    growth : tuple of float
        Growth exponents ``(M_x, M_xi)`` of the symbol class; informational.
    quadratic : bool
        True when ``H0`` is a polynomial of degree <= 2.
    constant_field : bool
        True when ``C`` does not depend on position.
    """
    name: str
    d: int
    potential: Callable
    grad_potential: Callable
    hess_potential: Callable
    field: Callable
    jac_field: Callable
    hess_field: Callable
    mass: float = 1.0
    params: dict = field(default_factory=dict)
    growth: tuple = (2.0, 2.0)
    quadratic: bool = False
    constant_field: bool = False

    def _split(self, w):
        w = np.asarray(w, dtype=float)
        return w[..., :self.d], w[..., self.d:]

    def h0(self, w):
        x, xi = self._split(w)
        return np.sum(xi ** 2, axis=-1) / (2 * self.mass) + self.potential(x)

    def grad_h0(self, w):
        x, xi = self._split(w)
        return np.concatenate([self.grad_potential(x), xi / self.mass], axis=-1)

    def hess_h0(self, w):
        x, _ = self._split(w)
        d = self.d
        H = np.zeros(x.shape[:-1] + (2 * d, 2 * d))
        H[..., :d, :d] = self.hess_potential(x)
        H[..., d:, d:] = np.eye(d) / self.mass
        return H

    def C(self, w):
        x, _ = self._split(w)
        return self.field(x)

    def jac_C(self, w):
        x, _ = self._split(w)
        J = np.zeros(x.shape[:-1] + (3, 2 * self.d))
        J[..., :, :self.d] = self.jac_field(x)
        return J

    def hess_C(self, w):
        x, _ = self._split(w)
        d = self.d
        H = np.zeros(x.shape[:-1] + (3, 2 * d, 2 * d))
        H[..., :, :d, :d] = self.hess_field(x)
        return H

    def h_so(self, w, n, S):
        return self.h0(w) + S * np.einsum('...k,...k->...', n, self.C(w))

    def grad_h_so(self, w, n, S):
        return self.grad_h0(w) + S * np.einsum('...k,...kj->...j', n, self.jac_C(w))

    def hess_h_so(self, w, n, S):
        return self.hess_h0(w) + S * np.einsum('...k,...kij->...ij', n, self.hess_C(w))


def eval_h_so(model, w, n, S):
    """Classical spin-orbit Hamiltonian ``H0(w) + S n.C(w)``."""
    if S < 0:
        raise ValueError("spin length S must be non-negative")
    return model.h_so(w, n, S)


def _const_field(c):
    c = np.asarray(c, dtype=float)
    return (lambda x: np.broadcast_to(c, x.shape[:-1] + (3,)).copy(),
            lambda x: np.zeros(x.shape[:-1] + (3, x.shape[-1])),
            lambda x: np.zeros(x.shape[:-1] + (3, x.shape[-1], x.shape[-1])))


def _linear_z_field(c0, c1):
    def C(x):
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 2] = c0 + c1 * x[..., 0]
        return out

    def jac(x):
        out = np.zeros(x.shape[:-1] + (3, 1))
        out[..., 2, 0] = c1
        return out

    return C, jac, lambda x: np.zeros(x.shape[:-1] + (3, 1, 1))


def _quadratic_potential(k):
    return (lambda x: 0.5 * k * x[..., 0] ** 2,
            lambda x: k * x,
            lambda x: np.full(x.shape[:-1] + (1, 1), float(k)))


DEFAULTS = {
    "harmonic_const_field": {"omega": 1.0, "c1": 0.0, "c2": 0.0, "c3": 1.0},
    "free_const_field": {"c1": 0.0, "c2": 0.0, "c3": 1.0},
    "inverted_osc": {"lam": 1.0, "c1": 0.0, "c2": 0.0, "c3": 1.0},
    "pendulum": {"c1": 0.0, "c2": 0.0, "c3": 1.0},
    "quartic_perturbed": {"eps": 0.02, "c0": 1.0, "c1": 0.5},
    "stern_gerlach": {"b0": 1.0, "b1": 0.5},
}


def builtin(name, **params):
    """
    Look up a built-in model by name, overriding default parameters.

    ==================== ============================= =====================
    name                 H0                            C(x)
    ==================== ============================= =====================
    harmonic_const_field (xi^2 + omega^2 x^2)/2        (c1, c2, c3)
    free_const_field     xi^2/2                        (c1, c2, c3)
    inverted_osc         (xi^2 - lam^2 x^2)/2          (c1, c2, c3)
    pendulum             xi^2/2 - cos x                (c1, c2, c3)
    quartic_perturbed    (xi^2 + x^2)/2 + eps x^4      (0, 0, c0 + c1 x)
    stern_gerlach        xi^2/2                        (0, 0, b0 + b1 x)
    ==================== ============================= =====================
    """
    if name not in DEFAULTS:
        raise KeyError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")
    unknown = set(params) - set(DEFAULTS[name])
    if unknown:
        raise KeyError(f"unknown parameters for {name}: {sorted(unknown)}")
    p = {**DEFAULTS[name], **{k: float(v) for k, v in params.items()}}

    if name in ("harmonic_const_field", "free_const_field", "inverted_osc", "pendulum"):
        C = _const_field([p["c1"], p["c2"], p["c3"]])
        const = True
    elif name == "quartic_perturbed":
        C = _linear_z_field(p["c0"], p["c1"])
        const = p["c1"] == 0.0
    else:
        C = _linear_z_field(p["b0"], p["b1"])
        const = p["b1"] == 0.0

    if name == "harmonic_const_field":
        V, growth, quad = _quadratic_potential(p["omega"] ** 2), (2.0, 2.0), True
    elif name in ("free_const_field", "stern_gerlach"):
        V, growth, quad = _quadratic_potential(0.0), (0.0, 2.0), True
    elif name == "inverted_osc":
        V, growth, quad = _quadratic_potential(-p["lam"] ** 2), (2.0, 2.0), True
    elif name == "pendulum":
        V = (lambda x: -np.cos(x[..., 0]),
             lambda x: np.sin(x),
             lambda x: np.cos(x)[..., None])
        growth, quad = (0.0, 2.0), False
    else:
        eps = p["eps"]
        V = (lambda x: 0.5 * x[..., 0] ** 2 + eps * x[..., 0] ** 4,
             lambda x: x + 4 * eps * x ** 3,
             lambda x: (1 + 12 * eps * x ** 2)[..., None])
        growth, quad = (4.0, 2.0), eps == 0.0

    return SpinOrbitModel(name, 1, *V, *C, mass=1.0, params=p, growth=growth,
                          quadratic=quad, constant_field=const)


def check_growth(model, points, factor=1e3):
    """
    Warn when ``|H0|`` exceeds ``factor * (1+|x|^2)^(Mx/2) (1+|xi|^2)^(Mxi/2)`` at any point.

    Only a heuristic: the symbol-class hypothesis cannot be verified numerically.
    """
    points = np.atleast_2d(points)
    x, xi = points[:, :model.d], points[:, model.d:]
    bound = ((1 + np.sum(x ** 2, -1)) ** (model.growth[0] / 2)
             * (1 + np.sum(xi ** 2, -1)) ** (model.growth[1] / 2))
    ok = np.all(np.abs(model.h0(points)) <= factor * bound)
    if not ok:
        warnings.warn(f"{model.name}: H0 exceeds its declared growth bound", RuntimeWarning)
    return bool(ok)


def hessian_bound_scan(model, trajectory, S=0.0):
    """
    Supremum of the Hilbert-Schmidt norm of ``D^2 H_so`` along a trajectory.

    A finite value over an energy shell is the sufficient condition for finite
    Lyapunov exponents. `trajectory` needs attributes ``z`` (T, 2d) and ``n`` (T, 3).
    """
    z = np.asarray(trajectory.z)
    if len(z) < 2:
        raise ValueError("trajectory must contain at least two samples")
    H = model.hess_h_so(z, np.asarray(trajectory.n), S)
    return float(np.max(np.sqrt(np.sum(H ** 2, axis=(-2, -1)))))
