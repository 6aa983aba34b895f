"""Initial condition: subsystem projector times the thermal bath Wigner function."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adiabatic import mixing_angle, rotation
from .model import ModelParams


@dataclass(frozen=True)
class BathThermalSpec:
    omega: float
    beta: float

    @property
    def tanh_factor(self) -> float:
        return math.tanh(0.5 * self.beta * self.omega)

    @property
    def var_R(self) -> float:
        return 1.0 / (2.0 * self.omega * self.tanh_factor)

    @property
    def var_P(self) -> float:
        return self.omega / (2.0 * self.tanh_factor)

    @property
    def prefactor(self) -> float:
        return self.tanh_factor / math.pi

    @classmethod
    def from_params(cls, p: ModelParams) -> "BathThermalSpec":
        return cls(omega=p.omega, beta=p.beta)


def bath_wigner_density(spec: BathThermalSpec, R, P):
    R = np.asarray(R, dtype=float)
    P = np.asarray(P, dtype=float)
    energy = 0.5 * P * P + 0.5 * spec.omega**2 * R * R
    return spec.prefactor * np.exp(-2.0 * spec.tanh_factor / spec.omega * energy)


def sample_phase_points(spec: BathThermalSpec, rng: np.random.Generator, n: int):
    """Draw ``n`` independent (R, P) pairs from the thermal Wigner density."""
    R = rng.normal(0.0, math.sqrt(spec.var_R), n)
    P = rng.normal(0.0, math.sqrt(spec.var_P), n)
    return R, P


def sample_phase_point(spec: BathThermalSpec, rng: np.random.Generator):
    from .model import PhasePoint

    R, P = sample_phase_points(spec, rng, 1)
    return PhasePoint(float(R[0]), float(P[0]))


def initial_subsystem_matrix(sigma_z: int = 1) -> np.ndarray:
    """Projector in the (sigma_z = -1, +1) basis.

    The default occupies the second slot, the sigma_z = +1 QD ground state.
    ``sigma_z=-1`` flips the slot convention (sensitivity runs only).
    """
    if sigma_z == 1:
        return np.diag([0.0, 1.0])
    if sigma_z == -1:
        return np.diag([1.0, 0.0])
    raise ValueError(f"initial sigma_z must be +1 or -1, got {sigma_z!r}")


def initial_adiabatic_matrix(p: ModelParams, R, sigma_z: int = 1) -> np.ndarray:
    """U^T rho_S U at t = 0. Vectorised over R: shape R.shape + (2, 2)."""
    return project_in_frame(initial_subsystem_matrix(sigma_z), mixing_angle(p, R, 0.0))


def project_in_frame(rho: np.ndarray, theta) -> np.ndarray:
    theta = np.asarray(theta)
    U = np.moveaxis(rotation(theta), (0, 1), (-2, -1))
    Ut = np.swapaxes(U, -1, -2)
    return Ut @ rho @ U


class GridTooSmall(ValueError):
    pass


def initial_grid_fields(p: ModelParams, geom, sigma_z: int = 1, edge_tol: float = 1e-7):
    """Lattice fields (eta11, eta22, Re eta21, Im eta21) at t = 0.

    Raises :class:`GridTooSmall` when the density on the outermost rows or
    columns exceeds ``edge_tol``; pass ``edge_tol=None`` to skip the check.
    """
    from .grid import GridState

    spec = BathThermalSpec.from_params(p)
    RR, PP = geom.mesh()
    rho_b = bath_wigner_density(spec, RR, PP)
    if edge_tol is not None:
        edge = max(rho_b[0].max(), rho_b[-1].max(), rho_b[:, 0].max(), rho_b[:, -1].max())
        if edge > edge_tol:
            raise GridTooSmall(
                f"thermal density {edge:.3e} on the lattice edge exceeds {edge_tol:.1e}; "
                "widen the domain"
            )
    fields = np.zeros((4,) + rho_b.shape)
    diag = initial_subsystem_matrix(sigma_z)
    fields[0] = diag[0, 0] * rho_b
    fields[1] = diag[1, 1] * rho_b
    return GridState(fields=fields, t=0.0, geom=geom)
