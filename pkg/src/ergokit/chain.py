"""Discretized nonlinear wave chain on (-a, a) with Dirichlet ends.

The Hamiltonian is

    H = sum_i dx p_i^2/2 + sum_{i=0..N} dx ((q_{i+1}-q_i)/dx)^2/2
        + sum_i dx (g/2k) q_i^{2k}

with ghost sites ``q_0 = q_{N+1} = 0`` and ``dx = 2a/N``. Momenta are site
velocities, so the equations of motion read ``q'' = lap_h q - g q^{2k-1}``
(defocusing sign), and ``exp(-beta H)`` is invariant under the flow.

All steppers accept batched states: arrays whose last axis runs over sites.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import TrajectoryDiverged, ValidationError
from .stats import ensemble_estimate


@dataclass(frozen=True)
class ChainParams:
    N: int
    a: float = 1.0
    g: float = 0.0
    k: int = 1
    nu: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N}")
        if not self.a > 0:
            raise ValidationError("half-length a must be positive")
        if self.g < 0 or self.nu < 0:
            raise ValidationError("g and nu must be non-negative")
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError("k must be a positive integer")
        if not self.beta > 0:
            raise ValidationError("beta must be positive")

    @property
    def dx(self):
        return 2.0 * self.a / self.N

    @property
    def sites(self):
        """Site coordinates ``x_i = -a + i dx`` for ``i = 1..N``."""
        return -self.a + self.dx * np.arange(1, self.N + 1)

    def stiffness(self):
        """Matrix ``A`` with ``q.A.q/2`` equal to the gradient part of ``H``."""
        n = self.N
        return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / self.dx


def matched_chain_params(a, N, **kw):
    """Chain whose two Dirichlet ghosts are exactly ``2a`` apart.

    The ghosts ``q_0`` and ``q_{N+1}`` are ``(N+1) dx`` apart; ``a' = a N / (N+1)``
    makes that distance ``2a``, so site ``i`` discretizes the continuum point
    ``-a + i dx`` on ``(-a, a)`` (see :func:`continuum_sites`).
    """
    return ChainParams(N=N, a=a * N / (N + 1), **kw)


def continuum_sites(prm):
    """Continuum coordinates of the sites of a :func:`matched_chain_params` chain."""
    half = 0.5 * (prm.N + 1) * prm.dx
    return -half + prm.dx * np.arange(1, prm.N + 1)


@dataclass(frozen=True)
class ChainState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != p.shape:
            raise ValidationError(f"q and p shapes differ: {q.shape} vs {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def zeros(cls, N):
        return cls(np.zeros(N), np.zeros(N))

    def check(self, prm):
        if self.q.shape[-1] != prm.N:
            raise ValidationError(f"state has {self.q.shape[-1]} sites, params say N={prm.N}")
        return self


def laplacian(q, dx):
    """Dirichlet second difference along the last axis."""
    lap = -2.0 * q
    lap[..., 1:] += q[..., :-1]
    lap[..., :-1] += q[..., 1:]
    return lap / (dx * dx)


def acceleration(q, prm):
    acc = laplacian(q, prm.dx)
    if prm.g:
        acc -= prm.g * q ** (2 * prm.k - 1)
    return acc


def chain_energy(s, prm):
    """Total energy ``H``; batched states give one value per member."""
    q, p, dx = s.q, s.p, prm.dx
    pad = [(0, 0)] * (q.ndim - 1) + [(1, 1)]
    grad = np.diff(np.pad(q, pad), axis=-1) / dx
    e = 0.5 * dx * np.sum(p * p, axis=-1) + 0.5 * dx * np.sum(grad * grad, axis=-1)
    if prm.g:
        e = e + dx * prm.g / (2 * prm.k) * np.sum(q ** (2 * prm.k), axis=-1)
    return e


def _check_finite(q, t):
    if not np.all(np.isfinite(q)):
        raise TrajectoryDiverged("chain trajectory diverged", t=t)


def leapfrog_step(s, prm, dt):
    """One velocity-Verlet step of the conservative flow."""
    if prm.nu:
        raise ValidationError("leapfrog_step integrates the conservative chain only (nu=0)")
    with np.errstate(over="ignore", invalid="ignore"):
        p = s.p + 0.5 * dt * acceleration(s.q, prm)
        q = s.q + dt * p
        p = p + 0.5 * dt * acceleration(q, prm)
    _check_finite(q, s.t + dt)
    return ChainState(q, p, s.t + dt)


def evolve(s, prm, T, dt):
    """Advance ``round(T/dt)`` Verlet steps."""
    n = int(round(T / dt))
    for _ in range(n):
        s = leapfrog_step(s, prm, dt)
    return s


def normal_mode_frequencies(prm):
    m = np.arange(1, prm.N + 1)
    return 2.0 / prm.dx * np.sin(m * np.pi / (2 * (prm.N + 1)))


def normal_mode(prm, m, amplitude=1.0):
    """Shape of harmonic normal mode ``m`` (``1..N``), scaled to ``amplitude``."""
    i = np.arange(1, prm.N + 1)
    return amplitude * np.sin(m * np.pi * i / (prm.N + 1))


def _observable_values(F, s, prm):
    if F.kind == "energy":
        return chain_energy(s, prm)
    return F(s.q)


def time_average_observable(s0, prm, T, dt, F, n_batches=20):
    """Trajectory average of ``F`` over ``[0, T)`` with a batch-means error.

    For a batched ``s0`` the estimate is the ensemble mean of the per-member
    time averages, with the standard error taken across members.
    """
    s0.check(prm)
    if prm.nu:
        raise ValidationError("time averages are defined for the conservative chain (nu=0)")
    n = int(round(T / dt))
    if n < 100:
        raise ValidationError("T must cover at least 100 steps")
    values = run_observables(s0, prm, T, dt, [F], n_batches=n_batches)[0]
    if np.ndim(values) == 2:
        return ensemble_estimate(values.mean(axis=0), method="time_average")
    # values already are batch means
    return ensemble_estimate(values, method="time_average")


def run_observables(s0, prm, T, dt, observables, n_batches=20):
    """Batch means of each observable along the trajectory.

    Returns one array per observable of shape ``(n_batches, *batch_shape)``
    holding the batch averages of ``F(q(t_j))`` for ``t_j = j dt``.
    """
    n = int(round(T / dt))
    size = n // n_batches
    n = size * n_batches
    s = s0
    sums = [np.zeros((n_batches,) + np.shape(_observable_values(F, s0, prm))) for F in observables]
    for j in range(n):
        b = j // size
        for i, F in enumerate(observables):
            sums[i][b] += _observable_values(F, s, prm)
        s = leapfrog_step(s, prm, dt)
    return [total / size for total in sums]


def energy_drift(s0, prm, T, dt):
    """``max_t |E(t) - E(0)| / |E(0)|`` along a Verlet trajectory."""
    e0 = chain_energy(s0, prm)
    worst = 0.0
    s = s0
    for _ in range(int(round(T / dt))):
        s = leapfrog_step(s, prm, dt)
        worst = max(worst, float(np.max(np.abs(chain_energy(s, prm) - e0) / np.abs(e0))))
    return worst


def reversibility_error(s0, prm, dt, n_steps):
    """Max component error after ``n_steps`` forward, momentum flip, ``n_steps`` forward."""
    s = s0
    for _ in range(n_steps):
        s = leapfrog_step(s, prm, dt)
    s = ChainState(s.q, -s.p, s.t)
    for _ in range(n_steps):
        s = leapfrog_step(s, prm, dt)
    return float(max(np.max(np.abs(s.q - s0.q)), np.max(np.abs(-s.p - s0.p))))


def flow_map(x, prm, T, dt):
    """Time-``T`` Verlet map on the stacked phase-space vector ``(q, p)``."""
    n = prm.N
    s = evolve(ChainState(x[..., :n], x[..., n:]), prm, T, dt)
    return np.concatenate([s.q, s.p], axis=-1)


def liouville_jacobian_check(s0, prm, T, dt, h=1e-5):
    """``|det J - 1|`` for the central-difference Jacobian of the time-T map.

    All 2N perturbed pairs are propagated as one batch. The difference
    quotients divide by the actually representable step ``x+h - (x-h)``,
    so the identity map yields exactly ``det J = 1``.
    """
    s0.check(prm)
    x0 = np.concatenate([s0.q, s0.p])
    if T == 0:
        return 0.0
    dim = x0.size
    plus = np.tile(x0, (dim, 1))
    minus = plus.copy()
    idx = np.arange(dim)
    plus[idx, idx] += h
    minus[idx, idx] -= h
    step = plus[idx, idx] - minus[idx, idx]
    jac = (flow_map(plus, prm, T, dt) - flow_map(minus, prm, T, dt)).T / step
    return float(abs(np.linalg.det(jac) - 1.0))


# --- dissipative chain and the Caldirola-Kanai correspondence -------------

def damped_step(q, v, prm, dt):
    """Strang splitting: exact friction half-steps around a Verlet step."""
    damp = np.exp(-0.5 * prm.nu * dt)
    v = v * damp
    v = v + 0.5 * dt * acceleration(q, prm)
    q = q + dt * v
    v = v + 0.5 * dt * acceleration(q, prm)
    return q, v * damp


def kanai_acceleration(b, t, prm):
    """Force of the rescaled field ``b = exp(nu t/2) q``.

    ``b'' = lap_h b + (nu^2/4) b - g exp(-(k-1) nu t) b^{2k-1}``.
    """
    acc = laplacian(b, prm.dx) + 0.25 * prm.nu**2 * b
    if prm.g:
        acc -= prm.g * np.exp(-(prm.k - 1) * prm.nu * t) * b ** (2 * prm.k - 1)
    return acc


def kanai_step(b, w, t, prm, dt):
    w = w + 0.5 * dt * kanai_acceleration(b, t, prm)
    b = b + dt * w
    w = w + 0.5 * dt * kanai_acceleration(b, t + dt, prm)
    return b, w


def damped_trajectory(prm, U0, T, dt, U1=None, record_every=1):
    """Damped chain ``q'' = lap_h q - nu q' - g q^{2k-1}`` via the rescaled field.

    Integrates the undamped rescaled equation with Verlet and multiplies by
    the exact factor ``exp(-nu t/2)``. Returns ``(times, q)``.
    """
    b = np.asarray(U0, dtype=float)
    u1 = np.zeros_like(b) if U1 is None else np.asarray(U1, dtype=float)
    w = u1 + 0.5 * prm.nu * b
    n = int(round(T / dt))
    times, rows = [0.0], [b.copy()]
    for j in range(n):
        b, w = kanai_step(b, w, j * dt, prm, dt)
        _check_finite(b, (j + 1) * dt)
        if (j + 1) % record_every == 0:
            t = (j + 1) * dt
            times.append(t)
            rows.append(np.exp(-0.5 * prm.nu * t) * b)
    return np.array(times), np.array(rows)


def kanai_residual(prm, U0, T, dt):
    """Max gap between ``exp(nu t/2) q(t)`` and the rescaled field ``b(t)``.

    The gap is relative to ``max_t |b(t)|``; an instantaneous norm would
    blow up whenever a single-mode solution passes through zero.

    ``q`` comes from a direct Strang-split integration of the damped chain,
    ``b`` from Verlet on the rescaled equation; the two share only the
    initial data ``q(0) = b(0) = U0``, ``q'(0) = 0``, ``b'(0) = (nu/2) U0``.
    """
    q = np.asarray(U0, dtype=float).copy()
    if q.shape != (prm.N,):
        raise ValidationError(f"U0 must have {prm.N} entries")
    v = np.zeros_like(q)
    b = q.copy()
    w = 0.5 * prm.nu * q
    worst, scale = 0.0, float(np.linalg.norm(b))
    for j in range(int(round(T / dt))):
        q, v = damped_step(q, v, prm, dt)
        b, w = kanai_step(b, w, j * dt, prm, dt)
        t = (j + 1) * dt
        _check_finite(q, t)
        _check_finite(b, t)
        worst = max(worst, float(np.linalg.norm(np.exp(0.5 * prm.nu * t) * q - b)))
        scale = max(scale, float(np.linalg.norm(b)))
    return worst / scale if scale else worst


# --- Gibbs-distributed initial data and trajectory I/O ---------------------

def gibbs_momenta(prm, rng, size=None):
    """Momenta distributed as ``exp(-beta dx p^2 / 2)``."""
    shape = (prm.N,) if size is None else (size, prm.N)
    return rng.standard_normal(shape) / np.sqrt(prm.beta * prm.dx)


def write_trajectory_csv(path, s0, prm, T, dt, observables, record_every=1):
    """Dump ``t, E, F_1..F_m`` rows for a single trajectory."""
    s = s0.check(prm)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E"] + [F.name for F in observables])
        for j in range(int(round(T / dt)) + 1):
            if j % record_every == 0:
                row = [s.t, chain_energy(s, prm)] + [_observable_values(F, s, prm) for F in observables]
                w.writerow([f"{float(x):.17g}" for x in row])
            s = leapfrog_step(s, prm, dt)


def load_state_json(path):
    with open(path) as fh:
        data = json.load(fh)
    return ChainState(np.array(data["q"], dtype=float), np.array(data["p"], dtype=float),
                      float(data.get("t", 0.0)))


def dump_state_json(s, path):
    with open(path, "w") as fh:
        json.dump({"q": s.q.tolist(), "p": s.p.tolist(), "t": s.t}, fh)

