"""Piece-wise deterministic trajectory engine in the time-dependent adiabatic basis.

Each sampled bath phase point carries four walkers, one per initial pair
(a, b) of adiabatic indices, weighted by the initial subsystem matrix in the
t = 0 frame. A step is a deterministic segment on the mean surface of the
pair (leapfrog bath motion, Bohr phase exp(-i w_ab tau)) followed by one
attempt at a field-induced transition of either index, chosen with
probability 1/2.

Internally indices are 0 (upper surface, level 1) and 1 (lower, level 2).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .adiabatic import frame_matrices_x, frame_matrices_z
from .analysis import TimeSeries, energy_rate
from .errors import WeightOverflow
from .initial import BathThermalSpec, initial_subsystem_matrix, project_in_frame, sample_phase_points
from .model import ModelParams, PhasePoint, bath_energy, lambda_field, lambda_rate

_SIGN = np.array([1.0, -1.0])  # upper / lower surface


@dataclass(frozen=True)
class RunSchedule:
    tau: float = 0.1
    t_max: float = 100.0
    stride: int = 1
    n_traj: int = 100_000
    seed: int = 0
    n_blocks: int = 20
    weight_bound: float = 1e12

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not self.t_max >= self.tau:
            raise ValueError("t_max must be >= tau")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.tau))

    @property
    def n_out(self) -> int:
        return self.n_steps // self.stride + 1


@dataclass(frozen=True)
class TrajectoryState:
    x: PhasePoint
    pair: tuple  # (alpha, alpha'), 1-based
    weight: complex
    t: float

    def __post_init__(self):
        if any(i not in (1, 2) for i in self.pair) or len(self.pair) != 2:
            raise ValueError(f"invalid adiabatic pair {self.pair}")


# -- vectorised kernels -------------------------------------------------------

def _half_gap(p, lam):
    return np.sqrt(0.25 * p.Omega**2 + lam * lam)


def _mean_force(p, R, t, a, b):
    lam = lambda_field(p, R, t)
    # F_alpha = -omega^2 R + sign_alpha * c Lambda / half_gap
    return -p.omega**2 * R + 0.5 * (_SIGN[a] + _SIGN[b]) * p.c * lam / _half_gap(p, lam)


def _segment(p, R, P, a, b, w, t, tau):
    """Leapfrog on the mean surface plus midpoint Bohr phase. Returns (R, P, w, R_mid)."""
    P = P + 0.5 * tau * _mean_force(p, R, t, a, b)
    R_new = R + tau * P / p.M
    P = P + 0.5 * tau * _mean_force(p, R_new, t + tau, a, b)
    R_mid = 0.5 * (R + R_new)
    gap = 2.0 * _half_gap(p, lambda_field(p, R_mid, t + 0.5 * tau))
    w_ab = 0.5 * (_SIGN[a] - _SIGN[b]) * gap
    w = w * np.exp(-1j * w_ab * tau)
    return R_new, P, w, R_mid


def coupling_rate(p: ModelParams, R, t):
    """<d_t 1 | 2> (= theta_dot / 2) evaluated in closed form."""
    lam = lambda_field(p, R, t)
    return p.Omega * lambda_rate(p, t) / (p.Omega**2 + 4.0 * lam * lam)


def hop_probabilities(tau: float, coupling):
    """Acceptance and rejection probabilities for one transition attempt."""
    x = tau * np.abs(coupling)
    P = x / (1.0 + x)
    # 1 - P equals 1/(1+x) and makes P + Q == 1 hold exactly in floating point
    return P, 1.0 - P


def _hop(p, R_eval, t_eval, a, b, w, u_branch, u_accept, tau):
    k = coupling_rate(p, R_eval, t_eval)
    P_acc, Q = hop_probabilities(tau, k)
    first = u_branch < 0.5
    accept = u_accept < P_acc
    a_new = np.where(first & accept, 1 - a, a)
    b_new = np.where(~first & accept, 1 - b, b)
    target = np.where(first, a_new, b_new)
    # <d_t x | y> = +k for x = upper, -k for x = lower
    signed = np.where(target == 0, k, -k)
    with np.errstate(divide="ignore", invalid="ignore"):
        hop_factor = np.where(accept, 2.0 * tau * signed / np.where(accept, P_acc, 1.0), 1.0)
    w = np.where(accept, w * hop_factor, w / Q)
    return a_new, b_new, w, accept


def _observables(p, R, P, a, b, w, t):
    """Weighted contributions of the walkers: identity, sx, sz, e_b, e_c."""
    theta = np.arctan2(2.0 * lambda_field(p, R, t), p.Omega)
    sx = frame_matrices_x(theta)[np.arange(len(R)), b, a]
    sz = frame_matrices_z(theta)[np.arange(len(R)), b, a]
    diag = (a == b).astype(float)
    return (
        w * diag,
        w * sx,
        w * sz,
        w * diag * bath_energy(p, R, P),
        w * (-p.c * R) * sx,
    )


N_ACC = 5  # norm, sx, sz, e_b, e_c


def _initial_walkers(p, R0, P0, sigma_z):
    n = len(R0)
    rho = project_in_frame(initial_subsystem_matrix(sigma_z), np.arctan2(2.0 * lambda_field(p, R0, 0.0), p.Omega))
    rho[:, 1, 1] = 1.0 - rho[:, 0, 0]  # unit trace exactly, not to rounding
    a = np.repeat(np.array([0, 0, 1, 1]), n)
    b = np.repeat(np.array([0, 1, 0, 1]), n)
    R = np.tile(R0, 4)
    P = np.tile(P0, 4)
    w = rho[np.tile(np.arange(n), 4), a, b].astype(complex)
    return R, P, a, b, w


def _propagate(p, sched: RunSchedule, R0, P0, rng, sigma_z=1, per_trajectory=False):
    """Run a batch of trajectories. Returns (accumulators, hop count).

    Accumulators have shape (N_ACC, n_out) summed over the batch, or
    (N_ACC, n_traj, n_out) when ``per_trajectory`` is set.
    """
    n = len(R0)
    R, P, a, b, w = _initial_walkers(p, R0, P0, sigma_z)
    tau = sched.tau
    shape = (N_ACC, n, sched.n_out) if per_trajectory else (N_ACC, sched.n_out)
    acc = np.zeros(shape, dtype=complex)
    traj = np.tile(np.arange(n), 4)

    def record(j, t):
        contrib = _observables(p, R, P, a, b, w, t)
        for c, v in enumerate(contrib):
            if per_trajectory:
                acc[c, :, j] = np.bincount(traj, v.real, n) + 1j * np.bincount(traj, v.imag, n)
            else:
                acc[c, j] = v.sum()

    record(0, 0.0)
    hops = 0
    for step in range(1, sched.n_steps + 1):
        t = (step - 1) * tau
        R, P, w, R_mid = _segment(p, R, P, a, b, w, t, tau)
        u_branch = rng.random(len(R))
        u_accept = rng.random(len(R))
        a, b, w, accepted = _hop(p, R_mid, t + 0.5 * tau, a, b, w, u_branch, u_accept, tau)
        hops += int(accepted.sum())
        wmax = float(np.max(np.abs(w)))
        if not wmax <= sched.weight_bound:
            raise WeightOverflow(
                f"trajectory weight {wmax:.3e} exceeds bound {sched.weight_bound:.1e} at t={step * tau:.6g}",
                t=step * tau,
                weight=wmax,
            )
        if step % sched.stride == 0:
            record(step // sched.stride, step * tau)
    return acc, hops


# -- single-trajectory operations ---------------------------------------------

def _arrays(s: TrajectoryState):
    return (
        np.array([s.x.R]),
        np.array([s.x.P]),
        np.array([s.pair[0] - 1]),
        np.array([s.pair[1] - 1]),
        np.array([complex(s.weight)]),
    )


def deterministic_segment(p: ModelParams, s: TrajectoryState, tau: float) -> TrajectoryState:
    R, P, a, b, w = _arrays(s)
    R, P, w, _ = _segment(p, R, P, a, b, w, s.t, tau)
    return TrajectoryState(PhasePoint(float(R[0]), float(P[0])), s.pair, complex(w[0]), s.t + tau)


def attempt_field_hop(p: ModelParams, s: TrajectoryState, rng, tau: float, t_eval=None, R_eval=None):
    """One transition attempt with the coupling at (R_eval, t_eval).

    Defaults to the state's own position and time. Returns ``(state, hopped)``.
    """
    R, P, a, b, w = _arrays(s)
    Re = R if R_eval is None else np.array([R_eval])
    te = s.t if t_eval is None else t_eval
    u_branch = rng.random(1)
    u_accept = rng.random(1)
    a, b, w, acc = _hop(p, Re, te, a, b, w, u_branch, u_accept, tau)
    return replace(s, pair=(int(a[0]) + 1, int(b[0]) + 1), weight=complex(w[0])), bool(acc[0])


def run_trajectory(p: ModelParams, sched: RunSchedule, rng, x0: PhasePoint | None = None, sigma_z: int = 1):
    """Contributions of one phase point (all four initial pairs) per output time.

    Returns a dict of complex arrays keyed by ``norm, sx, sz, e_b, e_c``. The
    phase point is drawn from the thermal density unless ``x0`` is given.
    """
    if x0 is None:
        R0, P0 = sample_phase_points(BathThermalSpec.from_params(p), rng, 1)
    else:
        R0, P0 = np.array([x0.R]), np.array([x0.P])
    acc, _ = _propagate(p, sched, R0, P0, rng, sigma_z)
    return dict(zip(("norm", "sx", "sz", "e_b", "e_c"), acc))


# -- ensembles -----------------------------------------------------------------

def block_sizes(n_traj: int, n_blocks: int):
    n_blocks = min(n_blocks, n_traj)
    base, extra = divmod(n_traj, n_blocks)
    return [base + (1 if i < extra else 0) for i in range(n_blocks)]


def block_rngs(seed: int, n_blocks: int):
    """One independent generator per block, derived from the master seed."""
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(n_blocks)]


_BATCH = 5000


def _run_block(args):
    p, sched, index, size, sigma_z = args
    rng = block_rngs(sched.seed, min(sched.n_blocks, sched.n_traj))[index]
    spec = BathThermalSpec.from_params(p)
    total = np.zeros((N_ACC, sched.n_out), dtype=complex)
    hops = 0
    done = 0
    while done < size:
        m = min(_BATCH, size - done)
        R0, P0 = sample_phase_points(spec, rng, m)
        acc, h = _propagate(p, sched, R0, P0, rng, sigma_z)
        total += acc
        hops += h
        done += m
    return total, size, hops


@dataclass
class EnsembleResult:
    block_sums: np.ndarray  # (n_blocks, N_ACC, n_out) complex
    block_counts: np.ndarray
    hops: int
    times: np.ndarray


def run_ensemble(p: ModelParams, sched: RunSchedule, workers: int = 1, sigma_z: int = 1) -> EnsembleResult:
    """Propagate ``sched.n_traj`` trajectories split into independent blocks.

    Each block has its own seed-derived stream, and block results are summed
    in block order, so the outcome does not depend on ``workers``.
    """
    sizes = block_sizes(sched.n_traj, sched.n_blocks)
    jobs = [(p, sched, i, s, sigma_z) for i, s in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_block, jobs))
    else:
        results = [_run_block(j) for j in jobs]
    sums = np.stack([r[0] for r in results])
    counts = np.array([r[1] for r in results])
    hops = sum(r[2] for r in results)
    times = np.arange(sched.n_out) * (sched.stride * sched.tau)
    return EnsembleResult(sums, counts, hops, times)


def estimate_blocks(block_sums, block_counts):
    """Mean and block standard error from per-block sums.

    ``block_sums`` has the block index first. Real and imaginary parts get
    separate errors when the input is complex.
    """
    block_sums = np.asarray(block_sums)
    counts = np.asarray(block_counts, dtype=float)
    if len(counts) == 0 or counts.sum() == 0:
        raise ValueError("empty ensemble")
    if len(counts) < 2:
        raise ValueError("at least 2 blocks are needed for an error estimate")
    shape = (-1,) + (1,) * (block_sums.ndim - 1)
    mean = block_sums.sum(axis=0) / counts.sum()
    means = block_sums / counts.reshape(shape)
    nb = len(counts)

    def se(x):
        return np.std(x, axis=0, ddof=1) / math.sqrt(nb)

    if np.iscomplexobj(means):
        return mean, se(means.real) + 1j * se(means.imag)
    return mean, se(means)


def estimate(contributions, n_blocks: int):
    """Mean and block standard error of per-trajectory contributions.

    ``contributions`` has the trajectory index first; trajectories are cut
    into ``n_blocks`` contiguous blocks.
    """
    contributions = np.asarray(contributions)
    if len(contributions) == 0:
        raise ValueError("empty ensemble")
    sizes = block_sizes(len(contributions), n_blocks)
    edges = np.concatenate([[0], np.cumsum(sizes)])
    sums = np.stack([contributions[lo:hi].sum(axis=0) for lo, hi in zip(edges[:-1], edges[1:])])
    return estimate_blocks(sums, sizes)


def ensemble_series(p: ModelParams, sched: RunSchedule, result: EnsembleResult, meta=None) -> TimeSeries:
    """Turn block sums into a :class:`TimeSeries` with standard errors."""
    sums = result.block_sums  # (nb, N_ACC, n_out)
    norm, sx, sz, eb, ec = (sums[:, i] for i in range(N_ACC))
    es = -0.5 * p.Omega * sz
    et = es + eb + ec
    chans = {"sx": sx, "sz": sz, "e_s": es, "e_b": eb, "e_c": ec, "e_total": et, "norm": norm}
    data = {}
    for name, s in chans.items():
        mean, err = estimate_blocks(s, result.block_counts)
        data[name] = mean.real
        if name in ("sx", "sz", "norm", "e_total"):
            data[name + "_err"] = err.real
        if name in ("sx", "sz", "norm"):
            data[name + "_imag"] = mean.imag
            data[name + "_imag_err"] = err.imag
    data["dedt"] = energy_rate(data["e_total"], sched.stride * sched.tau)
    m = {"hops": result.hops, "n_traj": int(result.block_counts.sum()), "n_blocks": len(result.block_counts)}
    m.update(meta or {})
    return TimeSeries(result.times, data, provenance="pwd", meta=m)


def default_workers() -> int:
    env = os.environ.get("METAMOLECULE_WORKERS")
    return int(env) if env else 1
