"""Pointwise viscous-plastic constitutive kernels.

Symmetric 2x2 tensors are stored as trailing-axis triples ``(t11, t12, t22)``
so every kernel broadcasts over arbitrary leading (cell, quad point) axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# below this relative ice-ocean speed the rank-one drag derivative is dropped
EPS_DRAG = 1e-12


@dataclass(frozen=True)
class PhysicsParams:
    rho_ice: float = 900.0
    rho_a: float = 1.3
    rho_o: float = 1026.0
    C_a: float = 1.2e-3
    C_o: float = 5.5e-3
    P_star: float = 27.5
    C_conc: float = 20.0
    e_ellipse: float = 2.0
    f_c: float = 0.0
    delta_min: float = 2e-9

    def __post_init__(self):
        for name in ("rho_ice", "rho_a", "rho_o", "C_a", "C_o", "e_ellipse", "delta_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.P_star < 0:
            raise ValueError("P_star must be non-negative")


def sym(t11, t12, t22):
    return np.stack(np.broadcast_arrays(t11, t12, t22), axis=-1)


def frob(a, b):
    """Frobenius product of symmetric tensors in triple storage."""
    return a[..., 0] * b[..., 0] + 2.0 * a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def to_matrix(t):
    t = np.asarray(t)
    return np.stack([np.stack([t[..., 0], t[..., 1]], -1), np.stack([t[..., 1], t[..., 2]], -1)], -2)


def strain_rate(grad_v):
    """Symmetric part of a velocity gradient ``grad_v[..., k, d] = dv_k/dx_d``."""
    g = np.asarray(grad_v, dtype=float)
    return sym(g[..., 0, 0], 0.5 * (g[..., 0, 1] + g[..., 1, 0]), g[..., 1, 1])


def tau(eps, e_ellipse):
    """Deviator scaled by 1/e plus half-trace isotropic part."""
    half_tr = 0.5 * (eps[..., 0] + eps[..., 2])
    inv_e = 1.0 / e_ellipse
    return sym(
        (eps[..., 0] - half_tr) * inv_e + half_tr,
        eps[..., 1] * inv_e,
        (eps[..., 2] - half_tr) * inv_e + half_tr,
    )


def delta(tau_val, delta_min):
    return np.sqrt(delta_min**2 + 2.0 * frob(tau_val, tau_val))


def delta_from_strain(eps, e_ellipse, delta_min):
    """Same invariant written with the deviatoric strain rate directly."""
    tr = eps[..., 0] + eps[..., 2]
    dev = eps - 0.5 * sym(tr, 0.0 * tr, tr)
    return np.sqrt(2.0 / e_ellipse**2 * frob(dev, dev) + tr**2 + delta_min**2)


def viscosities(P, delta_val, e_ellipse):
    """Bulk and shear viscosities ``(zeta, eta)``."""
    zeta = P / (2.0 * delta_val)
    return zeta, zeta / e_ellipse**2


def ice_strength(H, A, params):
    return params.P_star * np.asarray(H) * np.exp(-params.C_conc * (1.0 - np.asarray(A)))


def pi_from_velocity(tau_val, delta_val):
    return tau_val / np.asarray(delta_val)[..., None]


def pi_scale(pi):
    """``max(1, sqrt(2 pi:pi))`` pointwise."""
    return np.maximum(1.0, np.sqrt(2.0 * frob(pi, pi)))


def project_pi(pi):
    """Pull ``sqrt(2) pi`` back into the closed unit ball."""
    return pi / pi_scale(pi)[..., None]


def ncp_residual(pi, tau_val, delta_val):
    """``pi * Delta - tau``, zero exactly when pi = tau / Delta."""
    return pi * np.asarray(delta_val)[..., None] - tau_val


def modified_outer(tau_v, pi):
    """Symmetrized, scaled outer product as a function ``X -> tensor``.

    The action is ``[(pi:X) tau + (tau:X) pi] / (2 max(1, sqrt(2 pi:pi)))``.
    """
    s = 2.0 * pi_scale(pi)

    def apply(X):
        a = frob(pi, X) / s
        b = frob(tau_v, X) / s
        return a[..., None] * tau_v + b[..., None] * pi

    return apply


def atm_drag(v_a, params):
    v_a = np.asarray(v_a, dtype=float)
    speed = np.linalg.norm(v_a, axis=-1, keepdims=True)
    return params.C_a * params.rho_a * speed * v_a


def ocean_drag(v, v_o, params):
    d = np.asarray(v_o, dtype=float) - np.asarray(v, dtype=float)
    return params.C_o * params.rho_o * np.linalg.norm(d, axis=-1, keepdims=True) * d


def ocean_drag_derivative(v, v_o, params):
    """Derivative of the ocean drag with respect to ``v`` as a 2x2 tensor."""
    d = np.asarray(v_o, dtype=float) - np.asarray(v, dtype=float)
    nrm = np.linalg.norm(d, axis=-1)
    safe = np.where(nrm < EPS_DRAG, 1.0, nrm)
    rank1 = np.where((nrm < EPS_DRAG)[..., None, None], 0.0,
                     d[..., :, None] * d[..., None, :] / safe[..., None, None])
    return -params.C_o * params.rho_o * (nrm[..., None, None] * np.eye(2) + rank1)


def shear_deformation(eps):
    """``sqrt((e11 - e22)^2 + 4 e12^2)``; a plotting convention."""
    return np.sqrt((eps[..., 0] - eps[..., 2]) ** 2 + 4.0 * eps[..., 1] ** 2)
