"""Spectral Galerkin solver for ``U_tt = U_xx - sum_j c_j U^{p_j}`` on ``(-a, a)``.

Dirichlet boundary conditions, orthonormal basis
``e_m(x) = sin(m pi (x + a) / (2a)) / sqrt(a)`` with ``-e_m'' = mu_m e_m``.
The nonlinear term is projected with Gauss-Legendre quadrature on an
oversampled grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.fft import dst

from .chain import ChainState, continuum_sites, evolve, matched_chain_params
from .exceptions import QuadratureUnderresolved, TrajectoryDiverged, ValidationError

RESOLUTION_TOL = 1e-10


@dataclass(frozen=True)
class GalerkinSpec:
    n: int
    a: float = 1.0
    terms: tuple = ((1.0, 3),)
    quad_points: int | None = None

    def __post_init__(self):
        if self.n < 1 or not self.a > 0:
            raise ValidationError("need n >= 1 and a > 0")
        terms = tuple((float(c), int(p)) for c, p in self.terms)
        for c, p in terms:
            if p % 2 != 1 or p < 1:
                raise ValidationError(f"exponent {p} is not a positive odd integer")
            if c < 0:
                raise ValidationError("nonlinear coefficients must be non-negative")
        object.__setattr__(self, "terms", terms)
        need = 2 * self.max_exponent * self.n
        if self.quad_points is None:
            # small n needs headroom beyond the dealiasing count
            object.__setattr__(self, "quad_points",
                               max(need, (self.max_exponent + 1) * self.n + 16))
        elif self.quad_points < need:
            raise ValidationError(f"quad_points must be at least {need} for dealiasing")

    @classmethod
    def single(cls, n, a=1.0, g=1.0, k=2, **kw):
        """One defocusing term ``g U^{2k-1}``; ``g = 0`` is the linear equation."""
        return cls(n, a, ((g, 2 * k - 1),) if g else (), **kw)

    @property
    def max_exponent(self):
        return max([p for _, p in self.terms] + [1])

    @property
    def mu(self):
        m = np.arange(1, self.n + 1)
        return (m * np.pi / (2.0 * self.a)) ** 2

    def basis(self, x):
        m = np.arange(1, self.n + 1)
        return np.sin(np.outer(m, np.asarray(x) + self.a) * np.pi / (2 * self.a)) / np.sqrt(self.a)

    def with_quad(self, q):
        return GalerkinSpec(self.n, self.a, self.terms, q)

    def nonlinearity(self, u):
        out = np.zeros_like(u)
        for c, p in self.terms:
            out += c * u**p
        return out

    def potential_density(self, u):
        out = np.zeros_like(u)
        for c, p in self.terms:
            out += c * u ** (p + 1) / (p + 1)
        return out


class _Grid(NamedTuple):
    x: np.ndarray
    w: np.ndarray
    B: np.ndarray   # (n, Q) basis samples


_GRIDS: dict = {}


def quadrature_grid(spec):
    key = (spec.n, spec.a, spec.quad_points)
    if key not in _GRIDS:
        t, w = np.polynomial.legendre.leggauss(spec.quad_points)
        x = spec.a * t
        _GRIDS[key] = _Grid(x, spec.a * w, spec.basis(x))
    return _GRIDS[key]


@dataclass(frozen=True)
class ModeState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u, v = np.asarray(self.u, dtype=float), np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValidationError("mode amplitudes and velocities need equal 1-D shapes")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


def project_function(spec, f):
    """L2 coefficients of a callable ``f`` against the basis."""
    g = quadrature_grid(spec)
    return g.B @ (g.w * f(g.x))


def field(spec, u, x):
    """Evaluate ``sum_m u_m e_m(x)``."""
    return np.asarray(u) @ spec.basis(x)


def nonlinear_projection(spec, u):
    g = quadrature_grid(spec)
    return g.B @ (g.w * spec.nonlinearity(u @ g.B))


def galerkin_rhs(s, spec, check_resolution=False):
    """Mode accelerations ``-mu_m u_m - <N(U), e_m>``."""
    if s.u.shape != (spec.n,):
        raise ValidationError(f"state has {s.u.size} modes, spec has {spec.n}")
    acc = -spec.mu * s.u
    if not spec.terms:
        return acc
    proj = nonlinear_projection(spec, s.u)
    if check_resolution:
        fine = nonlinear_projection(spec.with_quad(2 * spec.quad_points), s.u)
        gap = float(np.max(np.abs(fine - proj)))
        if gap > RESOLUTION_TOL:
            raise QuadratureUnderresolved("nonlinear projection changes under refinement",
                                          gap=gap, quad_points=spec.quad_points)
    return acc - proj


def galerkin_energy(spec, u, v):
    """Conserved energy for mode arrays ``u, v`` of shape ``(..., n)``."""
    g = quadrature_grid(spec)
    lin = 0.5 * np.sum(v * v, axis=-1) + 0.5 * np.sum(spec.mu * u * u, axis=-1)
    if not spec.terms:
        return lin
    return lin + spec.potential_density(u @ g.B) @ g.w


class GalerkinTrajectory(NamedTuple):
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    energy: np.ndarray

    @property
    def final(self):
        return ModeState(self.u[-1], self.v[-1], float(self.times[-1]))


def _initial_modes(spec, U0):
    if callable(U0):
        return project_function(spec, U0)
    u = np.asarray(U0, dtype=float)
    if u.shape != (spec.n,):
        raise ValidationError(f"initial mode vector must have length {spec.n}")
    return u.copy()


def integrate_wave(spec, U0, T, dt, V0=None, record_every=1, bound=1e8):
    """Velocity Verlet on the projected system.

    ``U0`` (and ``V0``, default zero) may be mode vectors or callables on
    ``(-a, a)``. The energy is stored at every recorded step.
    """
    u = _initial_modes(spec, U0)
    v = np.zeros(spec.n) if V0 is None else _initial_modes(spec, V0)
    galerkin_rhs(ModeState(u, v), spec, check_resolution=True)
    n = int(round(T / dt))
    g = quadrature_grid(spec)

    def accel(x):
        out = -spec.mu * x
        if spec.terms:
            out -= g.B @ (g.w * spec.nonlinearity(x @ g.B))
        return out

    acc = accel(u)
    times, us, vs = [0.0], [u.copy()], [v.copy()]
    for step in range(1, n + 1):
        v = v + 0.5 * dt * acc
        u = u + dt * v
        acc = accel(u)
        v = v + 0.5 * dt * acc
        if not np.all(np.abs(u) < bound):
            raise TrajectoryDiverged("Galerkin amplitudes diverged; dt is likely unstable",
                                     t=step * dt, dt=dt)
        if step % record_every == 0 or step == n:
            times.append(step * dt)
            us.append(u.copy())
            vs.append(v.copy())
    us, vs = np.array(us), np.array(vs)
    return GalerkinTrajectory(np.array(times), us, vs, galerkin_energy(spec, us, vs))


def energy_drift(spec, U0, T, dt):
    traj = integrate_wave(spec, U0, T, dt)
    return float(np.max(np.abs(traj.energy - traj.energy[0])))


def a_priori_check(traj, rtol=1e-6):
    """``(passed, max ratio)`` for the bound ``E(t) <= E(0) (1 + rtol)``."""
    ratio = float(np.max(traj.energy) / traj.energy[0]) if traj.energy[0] > 0 else 1.0
    return ratio <= 1.0 + rtol, ratio


# --- convergence in the mode count -------------------------------------------

class ConvergenceRow(NamedTuple):
    n_coarse: int
    n_fine: int
    l2_difference: float


class ConvergenceReport(NamedTuple):
    rows: list
    monotone: bool


def _l2_on(x, w, f):
    return float(np.sqrt(np.sum(w * f * f)))


def convergence_study(ns, U0, T, dt, a=1.0, terms=((1.0, 3),), fine_points=None):
    """Successive L2 differences of ``U_n(T)`` for increasing ``n``.

    Differences are evaluated on a common Gauss grid fine enough for the
    largest ``n``. A non-monotone sequence is reported, not raised.
    """
    ns = sorted(int(n) for n in ns)
    specs = [GalerkinSpec(n, a, terms) for n in ns]
    finals = [integrate_wave(s, U0, T, dt, record_every=10**9).u[-1] for s in specs]
    q = fine_points or 4 * ns[-1] + 64
    t, w = np.polynomial.legendre.leggauss(q)
    x, w = a * t, a * w
    fields = [field(s, u, x) for s, u in zip(specs, finals)]
    rows = [ConvergenceRow(ns[i], ns[i + 1], _l2_on(x, w, fields[i + 1] - fields[i]))
            for i in range(len(ns) - 1)]
    diffs = [r.l2_difference for r in rows]
    return ConvergenceReport(rows, all(b < d for d, b in zip(diffs, diffs[1:])))


# --- stability of differences --------------------------------------------------

class GronwallReport(NamedTuple):
    sup_ratio: float
    M: float
    rate: float
    passed: bool
    exact_uniqueness: bool


def _energy_norm(spec, w, wdot):
    return np.sqrt(np.sum(wdot * wdot + spec.mu * w * w, axis=-1))


def gronwall_stability_check(spec, U0, delta, T, dt, bump=None, tol=0.05):
    """Envelope test for the difference of two nearby solutions.

    ``M`` bounds the difference quotient of the nonlinearity along both
    trajectories, ``sum_j c_j p_j max(|U|, |V|)^(p_j - 1)`` sampled on the
    quadrature grid. For the energy norm ``|W|_E^2 = sum(w'^2 + mu w^2)``
    the growth rate is at most ``M / (2 sqrt(mu_1))``; the envelope uses
    ``rate = M * max(1, 1 / (2 sqrt(mu_1)))`` so that ``exp(rate t)``
    dominates both that and the plain ``exp(M t)`` form.
    """
    if delta < 0:
        raise ValidationError("delta must be non-negative")
    u0 = _initial_modes(spec, U0)
    if bump is None:
        bump = np.zeros(spec.n)
        bump[0] = 1.0
    pert = _initial_modes(spec, bump)
    a = integrate_wave(spec, u0, T, dt)
    b = integrate_wave(spec, u0 + delta * pert, T, dt)
    if delta == 0:
        same = bool(np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v))
        return GronwallReport(0.0, 0.0, 0.0, same, same)
    g = quadrature_grid(spec)
    big = np.maximum(np.abs(a.u @ g.B), np.abs(b.u @ g.B))
    M = 0.0
    for c, p in spec.terms:
        M += c * p * float(np.max(big)) ** (p - 1) if p > 1 else c
    rate = M * max(1.0, 1.0 / (2.0 * np.sqrt(spec.mu[0])))
    wn = _energy_norm(spec, b.u - a.u, b.v - a.v)
    ratio = wn / (wn[0] * np.exp(rate * a.times))
    sup = float(np.max(ratio))
    return GronwallReport(sup, M, rate, sup <= 1.0 + tol, False)


# --- interpolation inequality ---------------------------------------------------

def holder_theta(q, k):
    """``theta`` with ``1/q = (1 - theta)/2 + theta/(2k)``."""
    if k < 2 or not 2 <= q <= 2 * k:
        raise ValidationError("need k >= 2 and 2 <= q <= 2k")
    return (0.5 - 1.0 / q) / (0.5 - 1.0 / (2 * k))


class HolderReport(NamedTuple):
    passed: bool
    min_slack: float
    theta: float
    n_fields: int


def holder_interpolation_check(fields, weights, q, k, rtol=1e-12):
    """Check ``|f|_q <= |f|_2^(1-theta) |f|_2k^theta`` on each row of ``fields``.

    Norms use the quadrature ``weights``. ``min_slack`` is the smallest
    relative gap ``(rhs - lhs) / rhs``; a field passes if it is above ``-rtol``.
    """
    theta = holder_theta(q, k)
    f = np.atleast_2d(np.abs(np.asarray(fields, dtype=float)))
    w = np.asarray(weights, dtype=float)

    def norm(p):
        return (f**p @ w) ** (1.0 / p)

    lhs = norm(q)
    rhs = norm(2) ** (1 - theta) * norm(2 * k) ** theta
    nz = rhs > 0
    slack = np.where(nz, (rhs - lhs) / np.where(nz, rhs, 1.0), 0.0)
    m = float(np.min(slack))
    return HolderReport(m >= -rtol, m, theta, f.shape[0])


def random_smooth_fields(spec, count, rng, decay=2.0):
    """Grid samples of random fields with mode amplitudes ``~ m^-decay``."""
    g = quadrature_grid(spec)
    m = np.arange(1, spec.n + 1)
    coeffs = rng.standard_normal((count, spec.n)) * m ** (-float(decay))
    return coeffs @ g.B, g.w


# --- comparison with the lattice chain -------------------------------------------

def chain_field_at(prm, q, x):
    """Trigonometric interpolation of chain values ``q`` at continuum points ``x``."""
    N = prm.N
    coef = dst(np.asarray(q, dtype=float), type=1) / (N + 1)
    half = 0.5 * (N + 1) * prm.dx
    m = np.arange(1, N + 1)
    xi = (np.asarray(x, dtype=float) + half) / prm.dx
    return np.sin(np.multiply.outer(xi, m) * np.pi / (N + 1)) @ coef


class CrossSolverReport(NamedTuple):
    x0: float
    galerkin: float
    galerkin_error: float
    chain: float
    chain_error: float
    passed: bool


def cross_solver_check(U0, T, dt, a=1.0, g=1.0, k=2, n=32, N=256, x0=0.0):
    """Compare ``U(x0, T)`` from the Galerkin solver and the lattice chain.

    Each solver's error bar is its self-convergence difference against the
    half-resolution run (``n/2`` modes, ``N/2`` sites).
    """
    def gal(nn):
        spec = GalerkinSpec.single(nn, a, g, k)
        return float(field(spec, integrate_wave(spec, U0, T, dt, record_every=10**9).u[-1],
                           [x0])[0])

    def lattice(NN):
        prm = matched_chain_params(a, NN, g=g, k=k)
        s = evolve(ChainState(U0(continuum_sites(prm)), np.zeros(NN)), prm, T, dt)
        return float(chain_field_at(prm, s.q, [x0])[0])

    ug, ug_c = gal(n), gal(n // 2)
    uc, uc_c = lattice(N), lattice(N // 2)
    eg, ec = abs(ug - ug_c), abs(uc - uc_c)
    return CrossSolverReport(x0, ug, eg, uc, ec, abs(ug - uc) <= eg + ec)


# --- artifacts ----------------------------------------------------------------------

def write_modes_csv(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = traj.u.shape[1]
        w.writerow(["t"] + [f"u{m}" for m in range(1, n + 1)] + ["energy"])
        for t, u, e in zip(traj.times, traj.u, traj.energy):
            w.writerow([f"{t:.17g}"] + [f"{x:.17g}" for x in u] + [f"{e:.17g}"])


def write_convergence_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_coarse", "n_fine", "l2_difference"])
        for r in report.rows:
            w.writerow([r.n_coarse, r.n_fine, f"{r.l2_difference:.17g}"])
