"""Metamolecule model: parameters, Hamiltonian pieces and unit conversion.

Everything in the numerical core is adimensional with hbar = M = 1. The
off-diagonal (sigma_x) coefficient of the subsystem Hamiltonian is

    Lambda(R, t) = -c R + g cos(omega_d t)

and is shared by both engines through :func:`lambda_field`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import constants


class ParameterError(ValueError):
    """A model parameter violates its invariant. ``key`` names the field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ModelParams:
    Omega: float = 0.8      # QD level splitting
    omega: float = 0.5      # resonant-mode angular frequency
    c: float = 0.01         # QD-mode coupling
    g: float = 0.1          # driving strength
    omega_d: float = 0.05   # driving angular frequency
    beta: float = 12.5      # inverse temperature
    M: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def validate_params(p: ModelParams) -> ModelParams:
    for f in fields(p):
        v = getattr(p, f.name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParameterError(f.name, f"must be a finite number, got {v!r}")
    for key in ("Omega", "omega", "beta"):
        if getattr(p, key) <= 0:
            raise ParameterError(key, f"must be > 0, got {getattr(p, key)}")
    if p.omega_d < 0:
        raise ParameterError("omega_d", f"must be >= 0, got {p.omega_d}")
    if p.M != 1.0:
        raise ParameterError("M", "the inertial parameter is fixed to 1")
    return p


@dataclass(frozen=True)
class PhasePoint:
    R: float
    P: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and math.isfinite(self.P)):
            raise ValueError(f"non-finite phase point ({self.R}, {self.P})")


def lambda_field(p: ModelParams, R, t):
    """Total sigma_x coefficient -cR + g cos(omega_d t). Broadcasts."""
    return -p.c * np.asarray(R) + p.g * np.cos(p.omega_d * np.asarray(t))


def lambda_rate(p: ModelParams, t):
    """Explicit time derivative of :func:`lambda_field` at fixed R."""
    return -p.g * p.omega_d * np.sin(p.omega_d * np.asarray(t))


def bath_potential(p: ModelParams, R):
    R = np.asarray(R)
    return 0.5 * p.omega**2 * R * R


def bath_force(p: ModelParams, R):
    return -p.omega**2 * np.asarray(R)


def bath_energy(p: ModelParams, R, P):
    P = np.asarray(P)
    return 0.5 * P * P / p.M + bath_potential(p, R)


# Chosen so that omega = 0.5 maps to 8.9e12 s^-1 and t = 100 spans 5.62e-12 s.
DEFAULT_OMEGA_A = 1.78e13
MEV = 1e-3 * constants.electron_volt


@dataclass(frozen=True)
class UnitScale:
    """Reference angular frequency ``omega_a`` (1/s) of the adimensional units."""

    omega_a: float = DEFAULT_OMEGA_A

    def __post_init__(self):
        if not (math.isfinite(self.omega_a) and self.omega_a > 0):
            raise ValueError(f"omega_a must be > 0, got {self.omega_a}")

    @property
    def time_unit(self) -> float:
        return 1.0 / self.omega_a

    @property
    def energy_unit(self) -> float:
        return constants.hbar * self.omega_a

    @property
    def energy_unit_meV(self) -> float:
        return self.energy_unit / MEV


_KINDS = ("time", "energy", "frequency")


def _factor(u: UnitScale, kind: str) -> float:
    if kind == "time":
        return u.time_unit
    if kind == "energy":
        return u.energy_unit
    if kind == "frequency":
        return u.omega_a
    raise ValueError(f"unknown quantity kind {kind!r}; expected one of {_KINDS}")


def to_physical(u: UnitScale, q, kind: str):
    """Adimensional -> SI (seconds, joules, 1/s)."""
    return q * _factor(u, kind)


def from_physical(u: UnitScale, q, kind: str):
    return q / _factor(u, kind)
