"""Instantaneous eigenbasis of h_W(R, t) = V_B(R) - (Omega/2) sigma_z + Lambda sigma_x.

Matrices are written in the sigma_z eigenbasis ordered as (sigma_z = -1,
sigma_z = +1), so the subsystem Hamiltonian reads

    [[V_B + Omega/2, Lambda], [Lambda, V_B - Omega/2]]

Level 1 is the upper adiabatic surface, level 2 the lower one. The gauge is
real with mixing angle theta = atan2(2 Lambda, Omega) in (-pi/2, pi/2):

    |1> = ( cos(theta/2), sin(theta/2))
    |2> = (-sin(theta/2), cos(theta/2))

Level indices in the public functions are 1-based like the physics; the
vectorised helpers used by the engines take 0-based index arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, bath_force, bath_potential, lambda_field, lambda_rate

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]])  # in the (-1, +1) ordering


def _half_gap(p: ModelParams, lam):
    return np.sqrt(0.25 * p.Omega**2 + lam * lam)


def eigenvalues(p: ModelParams, R, t):
    """Return ``(E1, E2)`` with E1 >= E2."""
    lam = lambda_field(p, R, t)
    v = bath_potential(p, R)
    h = _half_gap(p, lam)
    return v + h, v - h


def bohr_frequency(p: ModelParams, R, t):
    """E1 - E2 = 2 sqrt(Omega^2/4 + Lambda^2)."""
    return 2.0 * _half_gap(p, lambda_field(p, R, t))


def mixing_angle(p: ModelParams, R, t):
    return np.arctan2(2.0 * lambda_field(p, R, t), p.Omega)


def rotation(theta):
    """Eigenbasis matrix U; columns are |1> and |2>."""
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    return np.array([[c, -s], [s, c]])


def _dtheta_dlambda(p: ModelParams, lam):
    return 2.0 * p.Omega / (p.Omega**2 + 4.0 * lam * lam)


def temporal_coupling(p: ModelParams, R, t, alpha: int = 1, beta: int = 2):
    """<d_t alpha | beta> at fixed R; equals +theta_dot/2 for (1, 2)."""
    _check_pair(alpha, beta)
    if alpha == beta:
        return np.zeros(np.broadcast(np.asarray(R), np.asarray(t)).shape)[()]
    lam = lambda_field(p, R, t)
    val = 0.5 * _dtheta_dlambda(p, lam) * lambda_rate(p, t)
    return val if alpha == 1 else -val


def spatial_coupling(p: ModelParams, R, t, alpha: int = 1, beta: int = 2):
    """Nonadiabatic coupling d_ab = <alpha | d_R beta>.

    In this gauge d_12 = -theta_R/2 and d_21 = +theta_R/2, with
    theta_R = dtheta/dLambda * (-c).
    """
    _check_pair(alpha, beta)
    if alpha == beta:
        return np.zeros(np.broadcast(np.asarray(R), np.asarray(t)).shape)[()]
    lam = lambda_field(p, R, t)
    theta_r = -p.c * _dtheta_dlambda(p, lam)
    return -0.5 * theta_r if alpha == 1 else 0.5 * theta_r


def hf_force(p: ModelParams, R, t, alpha):
    """Hellmann-Feynman force -dE_alpha/dR for level 1 (upper) or 2 (lower)."""
    alpha = np.asarray(alpha)
    if not np.all((alpha == 1) | (alpha == 2)):
        raise ValueError(f"level index must be 1 or 2, got {alpha}")
    lam = lambda_field(p, R, t)
    # d/dR sqrt(Omega^2/4 + Lambda^2) = -c Lambda / sqrt(...)
    slope = -p.c * lam / _half_gap(p, lam)
    sign = np.where(alpha == 1, 1.0, -1.0)
    out = bath_force(p, R) - sign * slope
    return out[()] if isinstance(out, np.ndarray) else out


def pauli_in_frame(p: ModelParams, R, t, which: str):
    """U^T sigma U for a single (R, t); ``which`` is 'x' or 'z'."""
    th = float(mixing_angle(p, R, t))
    if which == "x":
        return frame_matrices_x(np.asarray(th))
    if which == "z":
        return frame_matrices_z(np.asarray(th))
    raise ValueError(f"unknown Pauli operator {which!r}; expected 'x' or 'z'")


def frame_matrices_x(theta):
    """sigma_x in the adiabatic frame, shape theta.shape + (2, 2)."""
    s, c = np.sin(theta), np.cos(theta)
    return np.stack([np.stack([s, c], -1), np.stack([c, -s], -1)], -2)


def frame_matrices_z(theta):
    s, c = np.sin(theta), np.cos(theta)
    return np.stack([np.stack([-c, s], -1), np.stack([s, c], -1)], -2)


def bath_transition_diagnostic(p: ModelParams, R, P, t, alpha: int = 1, beta: int = 2):
    """Size of the neglected bath-induced transition terms.

    Returns ``((P/M) d_ab, 0.5 (E_a - E_b) d_ab)``. The first entry flips
    sign under a <-> b, the second does not. Both vanish with c.
    """
    d = spatial_coupling(p, R, t, alpha, beta)
    e1, e2 = eigenvalues(p, R, t)
    de = (e1 - e2) if alpha == 1 else (e2 - e1)
    return (np.asarray(P) / p.M) * d, 0.5 * de * d


def _check_pair(alpha, beta):
    if alpha not in (1, 2) or beta not in (1, 2):
        raise ValueError(f"level indices must be 1 or 2, got ({alpha}, {beta})")


@dataclass(frozen=True)
class AdiabaticFrame:
    E1: float
    E2: float
    theta: float
    U: np.ndarray
    d12: float
    tdot12: float   # <d_t 1 | 2>
    omega12: float  # E1 - E2
    F1: float
    F2: float


def frame(p: ModelParams, R: float, t: float) -> AdiabaticFrame:
    e1, e2 = eigenvalues(p, R, t)
    th = float(mixing_angle(p, R, t))
    return AdiabaticFrame(
        E1=float(e1),
        E2=float(e2),
        theta=th,
        U=rotation(th),
        d12=float(spatial_coupling(p, R, t)),
        tdot12=float(temporal_coupling(p, R, t)),
        omega12=float(e1 - e2),
        F1=float(hf_force(p, R, t, 1)),
        F2=float(hf_force(p, R, t, 2)),
    )


def hamiltonian_matrix(p: ModelParams, R: float, t: float) -> np.ndarray:
    """Dense h_W(R, t) in the (sigma_z = -1, +1) basis."""
    lam = float(lambda_field(p, R, t))
    v = float(bath_potential(p, R))
    return np.array([[v + 0.5 * p.Omega, lam], [lam, v - 0.5 * p.Omega]])
