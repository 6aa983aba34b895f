"""Phase-space grid reference engine.

The four real lattice fields eta11, eta22, Re eta21, Im eta21 obey the
interaction-picture equations with rho21 = eta21 exp(-i w21 t), w21 = -Omega.
Phase-space derivatives use the 5-point fourth-order central stencil with two
ghost rings held at zero; time stepping is fixed-step Cash-Karp RK5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryMassExceeded, GridInstability
from .model import ModelParams

FIELD_NAMES = ("eta11", "eta22", "re_eta21", "im_eta21")


@dataclass(frozen=True)
class GridGeometry:
    L_R: float = 6.0
    L_P: float = 6.0
    dR: float = 0.1
    dP: float = 0.1

    def __post_init__(self):
        for name in ("L_R", "L_P", "dR", "dP"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v}")
        if min(self.n_R, self.n_P) < 5:
            raise ValueError("the lattice needs at least 5 nodes per axis")

    @property
    def n_R(self) -> int:
        return int(math.floor(2 * self.L_R / self.dR + 1e-9)) + 1

    @property
    def n_P(self) -> int:
        return int(math.floor(2 * self.L_P / self.dP + 1e-9)) + 1

    @property
    def R(self) -> np.ndarray:
        return -self.L_R + self.dR * np.arange(self.n_R)

    @property
    def P(self) -> np.ndarray:
        return -self.L_P + self.dP * np.arange(self.n_P)

    @property
    def cell(self) -> float:
        return self.dR * self.dP

    def mesh(self):
        return np.meshgrid(self.R, self.P, indexing="ij")


@dataclass
class GridState:
    fields: np.ndarray  # (4, n_R, n_P)
    t: float
    geom: GridGeometry

    def __getitem__(self, name: str) -> np.ndarray:
        return self.fields[FIELD_NAMES.index(name)]


def fd4(f: np.ndarray, axis: int, delta: float) -> np.ndarray:
    """Fourth-order central first derivative along ``axis``; zero outside."""
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    if n < 5:
        raise ValueError(f"fd4 needs at least 5 nodes along axis {axis}, got {n}")
    pad = [(0, 0)] * f.ndim
    pad[axis] = (2, 2)
    g = np.pad(f, pad)

    def sl(lo):
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(lo, lo + n)
        return g[tuple(idx)]

    # grouped as differences so constants give exactly zero
    return (8.0 * (sl(3) - sl(1)) - (sl(4) - sl(0))) / (12.0 * delta)


def rhs(p: ModelParams, fields: np.ndarray, t: float, geom: GridGeometry) -> np.ndarray:
    """Time derivative of the stacked fields (eta11, eta22, Re eta21, Im eta21)."""
    e11, e22, re, im = fields
    R = geom.R[:, None]
    P = geom.P[None, :]
    w21 = -p.Omega
    cphi, sphi = math.cos(w21 * t), math.sin(w21 * t)
    drive = p.g * math.cos(p.omega_d * t)
    cR = p.c * R

    d_R = fd4(fields, 1, geom.dR)
    d_P = fd4(fields, 2, geom.dP)
    # L f = P df/dR - dH_B/dR df/dP
    Lf = P * d_R - (p.omega**2 * R / p.M) * d_P

    X = -re * sphi + im * cphi
    D = e11 - e22
    pop_flux = -p.c * (d_P[2] * cphi + d_P[3] * sphi)
    coh_flux = -0.5 * p.c * (d_P[0] + d_P[1])

    out = np.empty_like(fields)
    out[0] = -2.0 * cR * X + 2.0 * drive * X - Lf[0] + pop_flux
    out[1] = 2.0 * cR * X - 2.0 * drive * X - Lf[1] + pop_flux
    out[2] = -cR * D * sphi + drive * D * sphi - Lf[2] + coh_flux * cphi
    out[3] = cR * D * cphi - drive * D * cphi - Lf[3] + coh_flux * sphi
    return out


# Cash-Karp tableau
CK_C = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


def rk5ck(f, t: float, y: np.ndarray, tau: float):
    """One fixed Cash-Karp step of dy/dt = f(t, y).

    Returns ``(y_new, err)`` where ``err`` is the difference between the
    5th- and embedded 4th-order solutions (diagnostic only).
    """
    k = []
    for i in range(6):
        yi = y
        for a, kj in zip(CK_A[i], k):
            if a != 0.0:
                yi = yi + (tau * a) * kj
        k.append(f(t + CK_C[i] * tau, yi))
    y5 = y
    err = 0.0
    for b5, b4, kj in zip(CK_B5, CK_B4, k):
        if b5 != 0.0:
            y5 = y5 + (tau * b5) * kj
        if b5 != b4:
            err = err + (tau * (b5 - b4)) * kj
    return y5, err


def rk5ck_step(p: ModelParams, s: GridState, tau: float, t_new: float | None = None):
    """Advance the grid state by ``tau``. Returns ``(state, max |err|)``."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    y, err = rk5ck(lambda t, y: rhs(p, y, t, s.geom), s.t, s.fields, tau)
    if not np.all(np.isfinite(y)):
        raise GridInstability(f"non-finite field values after step at t={s.t:.6g}", t=s.t)
    t_next = s.t + tau if t_new is None else t_new
    return GridState(y, t_next, s.geom), float(np.max(np.abs(err)))


def grid_observables(p: ModelParams, s: GridState) -> dict:
    """Lattice quadrature of the subsystem and energy observables."""
    e11, e22, re, im = s.fields
    g = s.geom
    dA = g.cell
    R = g.R[:, None]
    P = g.P[None, :]
    # rho21 = eta21 exp(i Omega t)
    c, sn = math.cos(p.Omega * s.t), math.sin(p.Omega * s.t)
    re_rho21 = re * c - im * sn
    pop = e11 + e22
    trace = dA * pop.sum()
    sx = dA * 2.0 * re_rho21.sum()
    sz = dA * (e22 - e11).sum()  # sigma_z = +1 is the second slot
    hb = 0.5 * P * P / p.M + 0.5 * p.omega**2 * R * R
    e_b = dA * (hb * pop).sum()
    e_c = dA * (-p.c * R * 2.0 * re_rho21).sum()
    e_s = -0.5 * p.Omega * sz
    return {
        "trace": trace,
        "sx": sx,
        "sz": sz,
        "e_s": e_s,
        "e_b": e_b,
        "e_c": e_c,
        "e_total": e_s + e_b + e_c,
    }


def boundary_mass(s: GridState, rings: int = 2) -> float:
    """Cell-weighted sum of |fields| over the outermost ``rings`` node rings."""
    a = np.abs(s.fields).sum(axis=0)
    inner = a[rings:-rings, rings:-rings].sum() if min(a.shape) > 2 * rings else 0.0
    return float((a.sum() - inner) * s.geom.cell)


@dataclass
class GridRunResult:
    times: np.ndarray
    observables: dict
    max_rk_error: float
    max_boundary_ratio: float
    final: GridState
    meta: dict = field(default_factory=dict)


def run_grid(
    p: ModelParams,
    geom: GridGeometry,
    tau: float = 0.001,
    t_max: float = 100.0,
    stride: int = 100,
    sigma_z: int = 1,
    boundary_fraction: float = 1e-5,
    progress=None,
    fused: bool = True,
) -> GridRunResult:
    """Integrate from the thermal initial state, recording every ``stride`` steps.

    ``fused=True`` uses the compiled kernel; ``False`` runs the plain numpy
    :func:`rhs` (same arithmetic, roughly 6x slower).
    """
    from .initial import initial_grid_fields

    n_steps = int(round(t_max / tau))
    n_out = n_steps // stride
    s = initial_grid_fields(p, geom, sigma_z=sigma_z, edge_tol=None)
    mass0 = float(np.abs(s.fields[:2].sum(axis=0)).sum() * geom.cell)

    def check_boundary(state):
        ratio = boundary_mass(state) / mass0
        if ratio > boundary_fraction:
            raise BoundaryMassExceeded(
                f"boundary mass fraction {ratio:.3e} exceeds {boundary_fraction:.1e} "
                f"at t={state.t:.6g}; widen the domain",
                t=state.t,
                ratio=ratio,
            )
        return ratio

    obs = {k: np.empty(n_out + 1) for k in grid_observables(p, s)}
    max_ratio = check_boundary(s)
    for k, v in grid_observables(p, s).items():
        obs[k][0] = v
    max_err = 0.0
    stepper = None
    if fused:
        from ._gridkernel import FusedStepper

        stepper = FusedStepper(p, geom)
    for j in range(1, n_out + 1):
        for i in range(stride):
            n = (j - 1) * stride + i + 1
            if stepper is None:
                s, err = rk5ck_step(p, s, tau, t_new=n * tau)
            else:
                y, err = stepper.step(s.fields, s.t, tau)
                s = GridState(y, n * tau, geom)
            max_err = max(max_err, err)
        if not np.all(np.isfinite(s.fields)):
            raise GridInstability(f"non-finite field values by t={s.t:.6g}", t=s.t)
        max_ratio = max(max_ratio, check_boundary(s))
        for k, v in grid_observables(p, s).items():
            obs[k][j] = v
        if progress is not None:
            progress(j, n_out)
    times = np.arange(n_out + 1) * (stride * tau)
    return GridRunResult(times, obs, max_err, max_ratio, s)
