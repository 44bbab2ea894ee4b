"""Overdamped and kinetic Langevin dynamics and a stochastic heat equation.

Noise convention: ``<eta(t) eta(t')> = 2 kT delta(t - t')`` so that
``exp(-V/kT)`` is the stationary law of ``dq = -grad V dt + eta dt``.

Ensembles are simulated as batches whose leading axis indexes independent
paths. Path ``i`` draws its noise from a Philox stream keyed by
``seed + i``, so a path does not depend on how many others run beside it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from .exceptions import StepSizeError, TrajectoryDiverged, ValidationError
from .gibbs import GibbsSpec, MCMCConfig, PotentialSpec, StiffnessMatrix, mcmc_chains
from .stats import EstimateWithError, batch_means, ensemble_estimate

_BLOCK = 1000


def _rngs(seed, n):
    return [np.random.Generator(np.random.Philox(key=int(seed) + i)) for i in range(n)]


def _noise_blocks(rngs, d, n_steps, block=_BLOCK):
    """Standard normals of shape ``(steps, paths, d)``, one stream per path."""
    done = 0
    while done < n_steps:
        m = min(block, n_steps - done)
        yield np.stack([r.standard_normal((m, d)) for r in rngs], axis=1)
        done += m


@dataclass(frozen=True)
class LangevinPotential:
    """Confining potentials on R^d.

    ``quadratic``: ``q.K.q / 2``; ``double_well``: ``sum a q^4/4 - b q^2/2``;
    ``polynomial``: ``sum_i p(q_i)`` with coefficients in increasing order.
    """

    kind: str
    K: np.ndarray | None = None
    coefficients: tuple = ()

    @classmethod
    def quadratic(cls, K):
        return cls("quadratic", K=np.atleast_2d(np.asarray(K, dtype=float)))

    @classmethod
    def double_well(cls, a=1.0, b=1.0):
        return cls("polynomial", coefficients=(0.0, 0.0, -0.5 * b, 0.0, 0.25 * a))

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", coefficients=tuple(float(c) for c in coefficients))

    def value(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * np.einsum("...i,ij,...j->...", q, self.K, q)
        return np.sum(P.polyval(q, self.coefficients), axis=-1)

    def grad(self, q):
        if self.kind == "quadratic":
            return q @ self.K.T
        return P.polyval(q, P.polyder(self.coefficients))

    @cached_property
    def _quadratic_norm(self):
        return float(np.linalg.norm(self.K, 2))

    def hessian_norm(self, q):
        """Spectral-norm bound of the Hessian over all given states."""
        if self.kind == "quadratic":
            return self._quadratic_norm
        d2 = P.polyder(self.coefficients, 2)
        if not len(d2):
            return 0.0
        return float(np.max(np.abs(P.polyval(q, d2))))


@dataclass(frozen=True)
class LangevinSpec:
    potential: LangevinPotential
    kT: float = 1.0
    gamma: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.kT < 0:
            raise ValidationError("kT must be non-negative")
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")

    def log_weight(self, x):
        """``-V(x)/kT`` for scalar positions of a one-dimensional system."""
        return -self.potential.value(np.asarray(x, dtype=float)[..., None]) / self.kT


class Trajectory(NamedTuple):
    times: np.ndarray
    q: np.ndarray       # (records, *batch, d)
    p: np.ndarray | None = None


def _prepare(q0, d):
    q = np.array(q0, dtype=float)
    if q.shape[-1] != d:
        raise ValidationError(f"initial state has dimension {q.shape[-1]}, spec says {d}")
    single = q.ndim == 1
    return (q[None, :] if single else q), single


def euler_maruyama_trajectory(spec, q0, T, dt, seed, record_every=1, bound=1e6,
                              hess_limit=0.5):
    """Overdamped path ``dq = -grad V dt + sqrt(2 kT dt) xi``.

    ``q0`` of shape ``(d,)`` gives one path, ``(R, d)`` an ensemble.
    Raises :class:`StepSizeError` if ``dt * |Hess V|`` reaches ``hess_limit``
    on a visited state and :class:`TrajectoryDiverged` beyond ``bound``.
    """
    q, single = _prepare(q0, spec.d)
    n = int(round(T / dt))
    amp = np.sqrt(2.0 * spec.kT * dt)
    times, rows = [0.0], [q.copy()]
    rngs = _rngs(seed, q.shape[0])
    step = 0
    for noise in _noise_blocks(rngs, spec.d, n):
        for xi in noise:
            h = spec.potential.hessian_norm(q)
            if dt * h >= hess_limit:
                raise StepSizeError("step size too large for the visited region",
                                    dt=dt, hessian_norm=h, t=step * dt)
            q = q - dt * spec.potential.grad(q)
            if amp:
                q = q + amp * xi
            step += 1
            if not np.all(np.abs(q) < bound):
                raise TrajectoryDiverged("Langevin path left the bounded region", t=step * dt)
            if step % record_every == 0 or step == n:
                times.append(step * dt)
                rows.append(q.copy())
    path = np.array(rows)
    return Trajectory(np.array(times), path[:, 0] if single else path)


def kinetic_langevin_trajectory(spec, q0, p0, T, dt, seed, record_every=1, bound=1e6):
    """Underdamped path ``dq = p dt, dp = -grad V dt - gamma p dt + sqrt(2 gamma kT dt) xi``.

    Uses the BAOAB splitting: half kick, half drift, exact Ornstein-Uhlenbeck
    momentum update, half drift, half kick.
    """
    q, single = _prepare(q0, spec.d)
    p, _ = _prepare(p0, spec.d)
    n = int(round(T / dt))
    c1 = np.exp(-spec.gamma * dt)
    c2 = np.sqrt(spec.kT * (1.0 - c1 * c1))
    times, qs, ps = [0.0], [q.copy()], [p.copy()]
    rngs = _rngs(seed, q.shape[0])
    step = 0
    force = -spec.potential.grad(q)
    for noise in _noise_blocks(rngs, spec.d, n):
        for xi in noise:
            p = p + 0.5 * dt * force
            q = q + 0.5 * dt * p
            p = c1 * p + c2 * xi
            q = q + 0.5 * dt * p
            force = -spec.potential.grad(q)
            p = p + 0.5 * dt * force
            step += 1
            if not np.all(np.abs(q) < bound):
                raise TrajectoryDiverged("Langevin path left the bounded region", t=step * dt)
            if step % record_every == 0 or step == n:
                times.append(step * dt)
                qs.append(q.copy())
                ps.append(p.copy())
    qs, ps = np.array(qs), np.array(ps)
    if single:
        qs, ps = qs[:, 0], ps[:, 0]
    return Trajectory(np.array(times), qs, ps)


# --- equilibrium checks -------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    n_paths: int = 100
    T: float = 200.0
    dt: float = 1e-3
    burn_in: float = 10.0
    record_every: int = 10
    seed: int = 0
    bins: int = 60
    span: tuple = (-3.0, 3.0)


@dataclass(frozen=True)
class HistogramReport:
    bin_edges: np.ndarray
    counts: np.ndarray
    reference_density: np.ndarray
    sup_discrepancy: float
    moments: dict = field(default_factory=dict)

    @property
    def bin_centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_center", "count", "reference"])
            for c, n, r in zip(self.bin_centers, self.counts, self.reference_density):
                w.writerow([f"{c:.17g}", int(n), f"{r:.17g}"])


def boltzmann_bin_density(log_weight, edges):
    """Bin-averaged density of ``exp(log_weight)`` normalized by quadrature."""
    lo, hi = edges[0], edges[-1]
    span = hi - lo
    grid = np.linspace(lo - span, hi + span, 4001)
    shift = float(np.max(log_weight(grid)))

    def w(x):
        return np.exp(log_weight(x) - shift)

    z = integrate.quad(w, -np.inf, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    mass = np.array([integrate.quad(w, a, b, epsabs=0.0, epsrel=1e-12)[0]
                     for a, b in zip(edges[:-1], edges[1:])])
    return mass / (z * np.diff(edges))


def _histogram(samples, edges, log_weight):
    counts, _ = np.histogram(samples, bins=edges)
    ref = boltzmann_bin_density(log_weight, edges)
    dens = counts / (samples.size * np.diff(edges))
    return counts, ref, float(np.max(np.abs(dens - ref)))


def _per_path_mean(values):
    """Ensemble estimate from per-path time averages of ``values[records, paths]``."""
    return ensemble_estimate(values.mean(axis=0))


def stationary_histogram_check(spec, cfg):
    """Long-run 1-D histogram versus the normalized Boltzmann weight."""
    if spec.d != 1:
        raise ValidationError("histogram comparison needs d = 1")
    q0 = np.zeros((cfg.n_paths, 1))
    traj = euler_maruyama_trajectory(spec, q0, cfg.T, cfg.dt, cfg.seed, cfg.record_every)
    keep = traj.times >= cfg.burn_in
    x = traj.q[keep, :, 0]
    edges = np.linspace(*cfg.span, cfg.bins + 1)
    counts, ref, sup = _histogram(x, edges, spec.log_weight)
    right = (x > 0).mean(axis=0)
    frac = ensemble_estimate(right)
    moments = {
        "variance": _per_path_mean(x**2),
        "mean": _per_path_mean(x),
        "right_fraction": frac,
        "occupancy_ratio": EstimateWithError(
            frac.mean / (1 - frac.mean),
            frac.stderr / (1 - frac.mean) ** 2, frac.n_effective, "ensemble"),
    }
    return HistogramReport(edges, counts, ref, sup, moments)


class UnderdampedReport(NamedTuple):
    q: HistogramReport
    p: HistogramReport
    correlation: EstimateWithError


def underdamped_equilibrium_check(spec, cfg):
    """Position and momentum marginals of the kinetic Langevin equilibrium."""
    if spec.d != 1:
        raise ValidationError("marginal comparison needs d = 1")
    z = np.zeros((cfg.n_paths, 1))
    traj = kinetic_langevin_trajectory(spec, z, z, cfg.T, cfg.dt, cfg.seed, cfg.record_every)
    keep = traj.times >= cfg.burn_in
    q, p = traj.q[keep, :, 0], traj.p[keep, :, 0]
    edges = np.linspace(*cfg.span, cfg.bins + 1)
    cq, rq, sq = _histogram(q, edges, spec.log_weight)
    cp, rp, sp = _histogram(p, edges, lambda x: -0.5 * x * x / spec.kT)
    q_rep = HistogramReport(edges, cq, rq, sq, {"variance": _per_path_mean(q**2)})
    p_rep = HistogramReport(edges, cp, rp, sp, {"variance": _per_path_mean(p**2)})
    return UnderdampedReport(q_rep, p_rep, _per_path_mean(q * p))


class ErgodicComparison(NamedTuple):
    time_average: EstimateWithError
    ensemble_average: EstimateWithError

    @property
    def z(self):
        return self.time_average.z(self.ensemble_average.mean, self.ensemble_average.stderr)


def ergodic_average_check(spec, F, q0, T_long, n_paths, T_relax, dt, seed, record_every=10):
    """Time average of ``F`` along one long path versus an ensemble snapshot.

    The single path (stream ``seed``) is averaged after ``T_relax`` with batch
    means; ``n_paths`` independent paths (streams ``seed + 1`` onward) are
    each run for ``T_relax`` and ``F`` is read off their final states.
    """
    q0 = np.asarray(q0, dtype=float)
    one = euler_maruyama_trajectory(spec, q0, T_long, dt, seed, record_every)
    keep = one.times >= T_relax
    mean, se, n_eff = (float(x) for x in batch_means(F(one.q[keep])))
    start = np.broadcast_to(q0, (n_paths, spec.d))
    ens = euler_maruyama_trajectory(spec, start, T_relax, dt, seed + 1,
                                    record_every=10**9)
    return ErgodicComparison(EstimateWithError(mean, se, n_eff, "time_average"),
                             ensemble_estimate(F(ens.q[-1])))


# --- stochastic heat equation on a Dirichlet lattice --------------------------

@dataclass(frozen=True)
class SPDESpec:
    """``U_t = U_xx / 2 - sum_j lambda_j U^j + eta`` on ``(-a, a)``.

    ``lambdas`` maps odd powers ``j`` to non-negative coefficients. The grid
    has ``M`` interior nodes and spacing ``dx = 2a / (M + 1)``.
    """

    a: float
    M: int
    lambdas: dict = field(default_factory=dict)

    def __post_init__(self):
        for j, lam in self.lambdas.items():
            if int(j) % 2 != 1:
                raise ValidationError(f"drift power {j} is not odd")
            if lam < 0:
                raise ValidationError("drift coefficients must be non-negative")
        if self.M < 1 or not self.a > 0:
            raise ValidationError("need M >= 1 and a > 0")

    @property
    def dx(self):
        return 2.0 * self.a / (self.M + 1)

    @property
    def nodes(self):
        return -self.a + self.dx * np.arange(1, self.M + 1)

    def drift(self, u):
        out = np.zeros_like(u)
        for j, lam in self.lambdas.items():
            if lam:
                out += lam * u ** int(j)
        return out

    def mode_eigenvalues(self):
        """Eigenvalues ``mu_k`` of the discrete ``-d^2/dx^2``."""
        k = np.arange(1, self.M + 1)
        return 4.0 / self.dx**2 * np.sin(k * np.pi / (2 * (self.M + 1))) ** 2

    def mode_basis(self):
        """Rows ``e_k(x_i)``, orthonormal under the ``dx``-weighted sum."""
        k = np.arange(1, self.M + 1)
        return np.sin(np.outer(k, self.nodes + self.a) * np.pi / (2 * self.a)) / np.sqrt(self.a)

    def project(self, u):
        """L2 mode amplitudes of nodal fields ``u[..., M]``."""
        return self.dx * u @ self.mode_basis().T

    def lattice_gibbs(self):
        """Stationary lattice density from detailed balance, as a Gibbs spec.

        ``exp(-sum (U_{i+1}-U_i)^2 / (2 dx) - 2 dx sum V(U_i))`` with
        ``V(U) = sum_j lambda_j U^{j+1} / (j+1)``.
        """
        top = max([int(j) for j in self.lambdas] + [0])
        coeffs = np.zeros(top + 2)
        for j, lam in self.lambdas.items():
            coeffs[int(j) + 1] += 2.0 * lam / (int(j) + 1)
        pot = PotentialSpec.polynomial(coeffs) if np.any(coeffs) else PotentialSpec()
        return GibbsSpec(StiffnessMatrix.chain(self.M, self.dx), pot, 1.0, self.dx)


def spde_noise(rng, shape, dt, dx):
    """Nodal increments of unit space-time white noise: variance ``dt / dx``."""
    return np.sqrt(dt / dx) * rng.standard_normal(shape)


class FieldTrajectory(NamedTuple):
    times: np.ndarray
    U: np.ndarray       # (records, *batch, M)


def spde_evolve(spec, U0, T, dt, seed, record_every=1, noise_scale=1.0, theta=0.5,
                bound=1e6):
    """Semi-implicit Euler-Maruyama for the lattice stochastic heat equation.

    The linear part is treated implicitly with weight ``theta`` (``0.5`` is
    the trapezoidal rule, which reproduces the exact stationary variance
    ``1/mu_k`` of every linear mode; ``1.0`` is backward Euler). The
    polynomial drift is explicit and the noise additive.
    """
    if dt > 0.25 * spec.dx**2:
        raise StepSizeError("dt exceeds 0.25 dx^2", dt=dt, dx=spec.dx)
    u, single = _prepare(U0, spec.M)
    basis = spec.mode_basis()
    half_mu = 0.5 * spec.mode_eigenvalues()
    den = 1.0 + theta * dt * half_mu
    gain = (1.0 - (1.0 - theta) * dt * half_mu) / den
    to_modes = spec.dx * basis.T      # nodal -> modal (right-multiply)
    amp = noise_scale * np.sqrt(dt / spec.dx)
    n = int(round(T / dt))
    rngs = _rngs(seed, u.shape[0])
    times, rows = [0.0], [u.copy()]
    step = 0
    for noise in _noise_blocks(rngs, spec.M, n):
        for xi in noise:
            forcing = -dt * spec.drift(u)
            if amp:
                forcing = forcing + amp * xi
            c = gain * (u @ to_modes) + (forcing @ to_modes) / den
            u = c @ basis
            step += 1
            if not np.all(np.abs(u) < bound):
                raise TrajectoryDiverged("SPDE field diverged", t=step * dt)
            if step % record_every == 0 or step == n:
                times.append(step * dt)
                rows.append(u.copy())
    path = np.array(rows)
    return FieldTrajectory(np.array(times), path[:, 0] if single else path)


@dataclass(frozen=True)
class SPDERunConfig:
    n_paths: int = 64
    T: float = 60.0
    dt: float = 1e-3
    burn_in: float = 10.0
    record_every: int = 20
    seed: int = 0
    mcmc_samples: int = 200_000
    mcmc_chains: int = 4
    mcmc_thinning: int = 5


class MomentComparison(NamedTuple):
    node: int
    power: int
    sde: EstimateWithError
    reference: EstimateWithError

    @property
    def z(self):
        return self.sde.z(self.reference.mean, self.reference.stderr)


class SPDEReport(NamedTuple):
    comparisons: list
    mode_variances: list      # (k, estimate, 1/mu_k-style exact or None)
    max_z: float


def _probe_nodes(M):
    return sorted({M // 4, M // 2, (3 * M) // 4})


def spde_stationary_check(spec, cfg, modes=8):
    """Compare long-run SPDE moments with the lattice invariant measure.

    Second and fourth moments at three probe nodes are estimated from
    per-path time averages and compared with an independent Metropolis
    sample of :meth:`SPDESpec.lattice_gibbs` (or with the exact Gaussian
    covariance when the drift is linear).
    """
    u0 = np.zeros((cfg.n_paths, spec.M))
    traj = spde_evolve(spec, u0, cfg.T, cfg.dt, cfg.seed, cfg.record_every)
    keep = traj.times >= cfg.burn_in
    u = traj.U[keep]
    gibbs = spec.lattice_gibbs()
    linear = all(int(j) == 1 or lam == 0 for j, lam in spec.lambdas.items())
    cov = np.linalg.inv(gibbs.hessian(np.zeros(spec.M))) if linear else None
    samples = None
    if not linear:
        mcfg = MCMCConfig(cfg.mcmc_samples, burn_in=5000, thinning=cfg.mcmc_thinning,
                          seed=cfg.seed + 10_000)
        samples = [b.samples for b in mcmc_chains(gibbs, mcfg, cfg.mcmc_chains)]
    comps = []
    for i in _probe_nodes(spec.M):
        for power in (2, 4):
            sde = _per_path_mean(u[..., i] ** power)
            if linear:
                var = cov[i, i]
                exact = var if power == 2 else 3.0 * var**2
                ref = EstimateWithError(float(exact), 0.0, np.inf, "exact")
            else:
                means = [batch_means(s[:, i] ** power)[:2] for s in samples]
                m = np.array([x[0] for x in means])
                se = np.array([x[1] for x in means])
                ref = EstimateWithError(float(m.mean()), float(np.sqrt(np.sum(se**2)) / len(m)),
                                        float(len(m) * cfg.mcmc_samples), "mcmc")
            comps.append(MomentComparison(i + 1, power, sde, ref))
    coeffs = spec.project(u)
    mode_rows = []
    lin_prec = spec.mode_eigenvalues() + 2.0 * spec.lambdas.get(1, 0.0)
    for k in range(min(modes, spec.M)):
        est = _per_path_mean(coeffs[..., k] ** 2)
        mode_rows.append((k + 1, est, 1.0 / lin_prec[k] if linear else None))
    max_z = max(c.z for c in comps)
    return SPDEReport(comps, mode_rows, float(max_z))


def write_field_csv(path, traj, spec):
    """One row per record: ``t, U_1..U_M`` (single path)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"U{i + 1}" for i in range(spec.M)])
        for t, row in zip(traj.times, traj.U):
            w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in np.ravel(row)])
