"""Gibbs measures ``exp(-beta [q.A.q/2 + dx sum_i G(q_i)])`` on R^N.

Sampling is single-site random-walk Metropolis. The inner sweep loop is
compiled with numba; all random numbers are drawn up front from a
counter-based Philox generator keyed by ``seed + chain_index``, so a chain
is bit-reproducible regardless of threading.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from numpy.polynomial import polynomial as P
from scipy import integrate, linalg

from ._parallel import map_parallel
from .exceptions import NotCoerciveError, ValidationError
from .observables import ObservableSpec
from .stats import EstimateWithError, batch_means

SYMMETRY_TOL = 1e-12
TARGET_ACCEPTANCE = 0.3

# potential codes understood by the compiled kernel
_NONE, _POLY, _SIN, _LINEAR = 0, 1, 2, 3


def coercivity_constant(A):
    """Smallest eigenvalue of a symmetric stiffness matrix (must be > 0)."""
    a = A.entries if isinstance(A, StiffnessMatrix) else np.asarray(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ValidationError("stiffness matrix is not symmetric")
    lam_min = float(linalg.eigvalsh(a)[0])
    if lam_min <= 0:
        raise NotCoerciveError(f"stiffness matrix is not coercive (lambda_min = {lam_min:.3e})")
    return lam_min


@dataclass(frozen=True)
class StiffnessMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        coercivity_constant(a)

    @property
    def dim(self):
        return self.entries.shape[0]

    def __mul__(self, c):
        return StiffnessMatrix(c * self.entries)

    __rmul__ = __mul__

    @classmethod
    def dirichlet_1d(cls, n, h=1.0):
        """Second difference ``(2, -1)/h^2`` with Dirichlet ends."""
        return cls((2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2)

    @classmethod
    def dirichlet_2d(cls, nx, ny, h=1.0):
        """Five-point Laplacian on an ``nx`` by ``ny`` interior grid."""
        lx = cls.dirichlet_1d(nx, h).entries
        ly = cls.dirichlet_1d(ny, h).entries
        return cls(np.kron(lx, np.eye(ny)) + np.kron(np.eye(nx), ly))

    @classmethod
    def biharmonic_1d(cls, n, h=1.0):
        """Square of the 1-D Dirichlet Laplacian, the order-4 flavour."""
        l1 = cls.dirichlet_1d(n, h).entries
        return cls(l1 @ l1)

    @classmethod
    def chain(cls, n, dx):
        """Gradient energy ``sum (q_{i+1}-q_i)^2 / (2 dx)`` as a quadratic form."""
        return cls(dx * cls.dirichlet_1d(n, dx).entries)


@dataclass(frozen=True)
class PotentialSpec:
    """Nodal potential ``G`` entering the measure as ``dx * sum_i G(q_i)``."""

    kind: str = "none"
    coefficients: tuple = ()
    name: str = ""
    params: dict = field(default_factory=dict)
    lipschitz_constant: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "polynomial", "lipschitz"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "lipschitz":
            if self.name not in ("sin", "linear"):
                raise ValidationError(f"unknown Lipschitz potential {self.name!r}")
            if self.lipschitz_constant is None or not np.isfinite(self.lipschitz_constant):
                raise ValidationError("Lipschitz potentials need a finite constant")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def polynomial_even(cls, g, k):
        """``(g / 2k) z^{2k}``."""
        if g < 0 or k < 1:
            raise ValidationError("polynomial_even needs g >= 0 and k >= 1")
        coeffs = [0.0] * (2 * k + 1)
        coeffs[2 * k] = g / (2 * k)
        return cls("polynomial", tuple(coeffs))

    @classmethod
    def polynomial(cls, coefficients):
        return cls("polynomial", tuple(float(c) for c in coefficients))

    @classmethod
    def sine(cls, amplitude, frequency):
        """``amplitude * sin(frequency * z)``."""
        return cls("lipschitz", name="sin",
                   params={"amplitude": float(amplitude), "frequency": float(frequency)},
                   lipschitz_constant=abs(amplitude * frequency))

    @classmethod
    def linear(cls, c):
        return cls("lipschitz", name="linear", params={"c": float(c)},
                   lipschitz_constant=abs(float(c)))

    def _kernel_args(self):
        if self.kind == "polynomial":
            return _POLY, np.array(self.coefficients or (0.0,), dtype=float)
        if self.kind == "lipschitz" and self.name == "sin":
            return _SIN, np.array([self.params["amplitude"], self.params["frequency"]])
        if self.kind == "lipschitz":
            return _LINEAR, np.array([self.params["c"]])
        return _NONE, np.zeros(1)

    def derivative(self, z, order=0):
        """``G^{(order)}(z)`` elementwise, ``order`` in 0..3."""
        z = np.asarray(z, dtype=float)
        if self.kind == "none":
            return np.zeros_like(z)
        if self.kind == "polynomial":
            c = P.polyder(self.coefficients, order) if order else np.array(self.coefficients)
            return P.polyval(z, c) if len(c) else np.zeros_like(z)
        if self.name == "linear":
            c = self.params["c"]
            return c * z if order == 0 else (np.full_like(z, c) if order == 1 else np.zeros_like(z))
        amp, w = self.params["amplitude"], self.params["frequency"]
        phase = [np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)][order]
        return amp * w**order * phase(w * z)

    def __call__(self, z):
        return self.derivative(z, 0)


@dataclass(frozen=True)
class GibbsSpec:
    A: StiffnessMatrix
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    beta: float = 1.0
    dx: float = 1.0

    def __post_init__(self):
        if not isinstance(self.A, StiffnessMatrix):
            object.__setattr__(self, "A", StiffnessMatrix(self.A))
        if not self.beta > 0 or not self.dx > 0:
            raise ValidationError("beta and dx must be positive")

    @property
    def dim(self):
        return self.A.dim

    @classmethod
    def for_chain(cls, prm):
        """Configuration marginal of the wave-chain Gibbs measure."""
        return cls(StiffnessMatrix.chain(prm.N, prm.dx),
                   PotentialSpec.polynomial_even(prm.g, prm.k) if prm.g else PotentialSpec(),
                   prm.beta, prm.dx)

    def _check(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.dim:
            raise ValidationError(f"configuration has {q.shape[-1]} entries, expected {self.dim}")
        return q

    def energy(self, q):
        """``q.A.q/2 + dx sum G(q_i)`` for configurations ``q[..., N]``."""
        q = self._check(q)
        quad = 0.5 * np.einsum("...i,ij,...j->...", q, self.A.entries, q)
        return quad + self.dx * np.sum(self.potential(q), axis=-1)

    def gradient(self, q):
        q = self._check(q)
        return self.A.entries @ q + self.dx * self.potential.derivative(q, 1)

    def hessian(self, q):
        q = self._check(q)
        return self.A.entries + self.dx * np.diag(self.potential.derivative(q, 2))

    def covariance(self):
        """``(beta A)^{-1}``, the covariance of the Gaussian part."""
        return np.linalg.inv(self.beta * self.A.entries)

    def to_json(self):
        pot = asdict(self.potential)
        return json.dumps({"A": self.A.entries.tolist(), "potential": pot,
                           "beta": self.beta, "dx": self.dx}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        pot = d["potential"]
        pot["coefficients"] = tuple(pot.get("coefficients", ()))
        return cls(StiffnessMatrix(np.array(d["A"])), PotentialSpec(**pot), d["beta"], d["dx"])


def log_density(spec, q):
    """Unnormalized log-density, shifted to vanish at the origin."""
    q = spec._check(q)
    return -spec.beta * (spec.energy(q) - spec.dx * spec.dim * float(spec.potential(0.0)))


# --- Metropolis sampling ----------------------------------------------------

@njit(cache=True)
def _site_potential(code, params, z):
    if code == _POLY:
        acc = 0.0
        for j in range(params.shape[0] - 1, -1, -1):
            acc = acc * z + params[j]
        return acc
    if code == _SIN:
        return params[0] * math.sin(params[1] * z)
    if code == _LINEAR:
        return params[0] * z
    return 0.0


@njit(cache=True, nogil=True)
def _metropolis_sweeps(q, A, beta, dx, code, params, scale, normals, uniforms, out):
    n_sweeps, n = normals.shape
    aq = A @ q
    accepted = 0
    for s in range(n_sweeps):
        for i in range(n):
            d = scale * normals[s, i]
            z = q[i]
            dE = d * aq[i] + 0.5 * A[i, i] * d * d + dx * (
                _site_potential(code, params, z + d) - _site_potential(code, params, z))
            if dE <= 0.0 or uniforms[s, i] < math.exp(-beta * dE):
                q[i] = z + d
                for j in range(n):
                    aq[j] += d * A[j, i]
                accepted += 1
        out[s, :] = q
    return accepted


@dataclass(frozen=True)
class MCMCConfig:
    n_samples: int
    burn_in: int = 1000
    thinning: int = 1
    step_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.burn_in < 0 or self.thinning < 1:
            raise ValidationError("need n_samples >= 1, burn_in >= 0, thinning >= 1")
        if not self.step_scale > 0:
            raise ValidationError("step_scale must be positive")


class SampleBatch(NamedTuple):
    samples: np.ndarray
    acceptance_rate: float
    step_scale: float


def chain_rng(seed, index=0):
    return np.random.Generator(np.random.Philox(key=int(seed) + int(index)))


_CHUNK = 2048


def _run(spec, q, scale, n_sweeps, rng, record_every=0):
    code, params = spec.potential._kernel_args()
    A = np.ascontiguousarray(spec.A.entries)
    n = spec.dim
    accepted = 0
    kept = []
    done = 0
    while done < n_sweeps:
        m = min(_CHUNK, n_sweeps - done)
        normals = rng.standard_normal((m, n))
        uniforms = rng.random((m, n))
        out = np.empty((m, n))
        accepted += _metropolis_sweeps(q, A, spec.beta, spec.dx, code, params, scale,
                                       normals, uniforms, out)
        if record_every:
            idx = np.arange(done, done + m)
            kept.append(out[(idx + 1) % record_every == 0])
        done += m
    rate = accepted / max(1, n_sweeps * n)
    return rate, (np.concatenate(kept) if kept else None)


def mcmc_sample(spec, cfg, chain_index=0, x0=None):
    """Draw ``cfg.n_samples`` configurations by single-site Metropolis.

    During burn-in the proposal scale is tuned in blocks of 50 sweeps toward
    an acceptance rate of 0.3 (Robbins-Monro on its logarithm); it is then
    frozen so the production chain is a fixed reversible kernel.
    """
    rng = chain_rng(cfg.seed, chain_index)
    q = np.zeros(spec.dim) if x0 is None else np.array(x0, dtype=float)
    scale = cfg.step_scale
    block = 50
    for b in range(cfg.burn_in // block):
        rate, _ = _run(spec, q, scale, block, rng)
        scale *= math.exp((rate - TARGET_ACCEPTANCE) / math.sqrt(b + 1.0))
    rest = cfg.burn_in % block
    if rest:
        _run(spec, q, scale, rest, rng)
    rate, samples = _run(spec, q, scale, cfg.n_samples * cfg.thinning, rng,
                         record_every=cfg.thinning)
    return SampleBatch(samples, rate, scale)


def mcmc_chains(spec, cfg, n_chains):
    """Independent chains keyed ``seed + index``; threads capped by ``ERGOKIT_THREADS``."""
    return map_parallel(lambda i: mcmc_sample(spec, cfg, chain_index=i), range(n_chains))


def chain_initial_conditions(prm, n, seed, thinning=500, burn_in=5000):
    """``n`` nearly independent ``(q, p)`` draws from the chain's Gibbs measure.

    Positions come from one thinned Metropolis chain, momenta from the exact
    Gaussian factor on a separate stream.
    """
    from .chain import gibbs_momenta

    batch = mcmc_sample(GibbsSpec.for_chain(prm),
                        MCMCConfig(n, burn_in=burn_in, thinning=thinning, seed=seed))
    p = gibbs_momenta(prm, chain_rng(seed, 1 << 20), size=n)
    return batch.samples, p


def metropolis_transition_density(spec, x, y, step_scale):
    """Off-diagonal density of one single-site update from ``x`` to ``y``.

    ``x`` and ``y`` must differ in exactly one coordinate; the site is
    chosen uniformly, as in a random-scan version of the sweep.
    """
    x = spec._check(x)
    y = spec._check(y)
    diff = np.flatnonzero(x != y)
    if diff.size != 1:
        raise ValidationError("single-site kernel needs states differing in one coordinate")
    d = (y - x)[diff[0]]
    proposal = math.exp(-0.5 * (d / step_scale) ** 2) / (step_scale * math.sqrt(2 * math.pi))
    accept = min(1.0, math.exp(log_density(spec, y) - log_density(spec, x)))
    return proposal * accept / spec.dim


# --- expectations -------------------------------------------------------------

def _quadrature_box(spec):
    sd = np.sqrt(np.diag(spec.covariance()))
    return 14.0 * float(sd.max())


def quadrature_expectation(spec, F):
    """Ratio of 1-D or 2-D integrals of ``F * density`` and ``density``."""
    if spec.dim > 2:
        raise ValidationError("quadrature oracle is available for N <= 2 only")
    L = _quadrature_box(spec)
    if spec.dim == 1:
        grid = np.linspace(-L, L, 2001)
        shift = float(np.max(log_density(spec, grid[:, None])))

        def w(z):
            return math.exp(float(log_density(spec, np.array([z]))) - shift)

        opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
        z = integrate.quad(w, -L, L, **opts)[0]
        m = integrate.quad(lambda t: float(F(np.array([t]))) * w(t), -L, L, **opts)[0]
        return m / z
    g = np.linspace(-L, L, 201)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    shift = float(np.max(log_density(spec, pts)))

    def w2(y, x):
        return math.exp(float(log_density(spec, np.array([x, y]))) - shift)

    opts = dict(epsabs=0.0, epsrel=1e-10)
    z = integrate.dblquad(w2, -L, L, -L, L, **opts)[0]
    m = integrate.dblquad(lambda y, x: float(F(np.array([x, y]))) * w2(y, x), -L, L, -L, L,
                          **opts)[0]
    return m / z


def expectation(spec, F, cfg, method="mcmc", n_batches=20):
    """Gibbs expectation of a configuration observable."""
    if method == "quadrature":
        return EstimateWithError(quadrature_expectation(spec, F), 0.0, np.inf, "quadrature")
    if method != "mcmc":
        raise ValidationError(f"unknown expectation method {method!r}")
    F.check_dim(spec.dim)
    batch = mcmc_sample(spec, cfg)
    mean, se, n_eff = batch_means(F(batch.samples), n_batches)
    return EstimateWithError(float(mean), float(se), float(n_eff), "mcmc")


def gaussian_samples(spec, n, rng):
    """Exact draws from the Gaussian part ``N(0, (beta A)^{-1})``."""
    chol = np.linalg.cholesky(spec.beta * spec.A.entries)
    z = rng.standard_normal((n, spec.dim))
    return linalg.solve_triangular(chol, z.T, lower=True, trans="T").T


def reweighting_factor(spec, samples, weight_factor=0.5):
    """``exp(-weight_factor * dx * sum_i G(phi_i))`` per sample."""
    g = np.sum(spec.potential(np.asarray(samples)), axis=-1)
    return np.exp(-weight_factor * spec.dx * g)


class LipschitzReport(NamedTuple):
    weight_in_bounds: float
    gaussian_mean_weight: EstimateWithError
    analytic_bound: float
    exact_mean_weight: float | None


def lipschitz_weight_bound(spec, weight_factor=0.5):
    """Upper bound on the Gaussian mean of the reweighting factor.

    Uses ``G(z) >= G(0) - L|z|`` and ``|z| <= (eps z^2 + 1/eps)/2`` to
    dominate the weight by a Gaussian-integrable quadratic exponential,
    then integrates exactly: ``E exp(tau |phi|^2) = det(1 - 2 tau C)^{-1/2}``.
    """
    L = spec.potential.lipschitz_constant
    n, f, dx = spec.dim, weight_factor, spec.dx
    base = -f * dx * n * float(spec.potential(0.0))
    if L == 0:
        return math.exp(base)
    lam = np.linalg.eigvalsh(spec.covariance())
    tau = 0.25 / lam.max()
    eps = 2.0 * tau / (f * dx * L)
    log_det = np.sum(np.log1p(-2.0 * tau * lam))
    return math.exp(base + f * dx * L * n / (2.0 * eps) - 0.5 * log_det)


def lipschitz_weight_check(spec, cfg, weight_factor=0.5):
    if spec.potential.kind != "lipschitz":
        raise ValidationError("lipschitz_weight_check needs a Lipschitz potential")
    rng = chain_rng(cfg.seed)
    phi = gaussian_samples(spec, cfg.n_samples, rng)
    L = spec.potential.lipschitz_constant
    g = spec.potential(phi)
    lhs = np.abs(np.diff(g, axis=0))
    rhs = L * np.abs(np.diff(phi, axis=0))
    ok = np.all(lhs <= rhs * (1 + 1e-12) + 1e-15, axis=1)
    fraction = float(ok.mean()) if ok.size else 1.0
    w = reweighting_factor(spec, phi, weight_factor)
    est = EstimateWithError(float(w.mean()), float(w.std(ddof=1) / np.sqrt(w.size)),
                            float(w.size), "ensemble")
    exact = None
    if spec.potential.name == "linear":
        c = spec.potential.params["c"]
        ones = np.ones(spec.dim)
        s = weight_factor * c * spec.dx
        exact = math.exp(0.5 * s * s * ones @ spec.covariance() @ ones)
    return LipschitzReport(fraction, est, lipschitz_weight_bound(spec, weight_factor), exact)


def write_samples_csv(path, samples):
    samples = np.atleast_2d(samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"q{i + 1}" for i in range(samples.shape[1])])
        for row in samples:
            w.writerow([f"{x:.17g}" for x in row])
