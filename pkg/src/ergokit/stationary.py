"""Low-temperature structure of Gibbs measures.

The minimizer of ``E(q) = q.A.q/2 + dx sum G(q_i)`` is the saddle point of
``exp(-beta E)``. Around it, expectations expand as

    E[F] = F(q*) + (1/beta) [ tr(F'' H^{-1})/2 - F' H^{-1} t / 2 ] + O(beta^-2)

where ``H = A + dx diag G''(q*)`` and ``t_j = dx G'''(q*_j) (H^{-1})_jj``.
The second bracket term (mean shift from the cubic part of ``E``) vanishes
whenever ``F'(q*) = 0`` or the potential is even about ``q*``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, ExpansionInvalid
from .gibbs import mcmc_sample
from .stats import batch_means, loglog_slope


@dataclass(frozen=True)
class StationarySolution:
    phi_star: np.ndarray
    residual_norm: float
    newton_iters: int


@dataclass(frozen=True)
class ExpansionResult:
    zeroth: float
    first_order: float
    beta: float

    @property
    def value(self):
        return self.zeroth + self.first_order


def solve_stationary(spec, tol=1e-12, max_iter=50):
    """Damped Newton on ``A phi + dx G'(phi) = 0`` starting from ``phi = 0``."""
    phi = np.zeros(spec.dim)
    res = spec.gradient(phi)
    norm = float(np.linalg.norm(res))
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise ConvergenceError("Newton iteration did not converge",
                                   residual=norm, iterations=it)
        step = np.linalg.solve(spec.hessian(phi), res)
        lam = 1.0
        while True:
            trial = phi - lam * step
            r_trial = spec.gradient(trial)
            n_trial = float(np.linalg.norm(r_trial))
            if n_trial < norm or lam < 1e-10:
                break
            lam *= 0.5
        phi, res, norm = trial, r_trial, n_trial
        it += 1
    return StationarySolution(phi, norm, it)


def laplace_expansion(spec, F, beta=None, solution=None):
    """Zeroth and first-order Laplace terms of ``E[F]`` at inverse temperature ``beta``."""
    beta = spec.beta if beta is None else beta
    sol = solution or solve_stationary(spec)
    phi = sol.phi_star
    H = spec.hessian(phi)
    try:
        chol = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ExpansionInvalid("Hessian at the stationary point is not positive definite",
                               min_eigenvalue=float(np.linalg.eigvalsh(H)[0])) from exc
    h_inv = np.linalg.inv(chol).T @ np.linalg.inv(chol)
    trace_term = 0.5 * float(np.sum(F.hessian(phi) * h_inv))
    third = spec.dx * spec.potential.derivative(phi, 3)
    shift = -0.5 * float((h_inv @ F.gradient(phi)) @ (third * np.diag(h_inv)))
    return ExpansionResult(float(F(phi)), (trace_term + shift) / beta, beta)


@dataclass(frozen=True)
class ConcentrationRow:
    beta: float
    mean_sq_distance: float
    stderr: float
    mean_norm: float


def concentration_check(spec, betas, cfg, solution=None):
    """Sample at each ``beta`` and fit the decay of ``E|q - q*|^2``.

    Returns ``(rows, slope)``; the slope is the log-log fit against beta,
    close to -1 for a non-degenerate minimum.
    """
    sol = solution or solve_stationary(spec)
    rows = []
    for b in betas:
        s = type(spec)(spec.A, spec.potential, float(b), spec.dx)
        batch = mcmc_sample(s, cfg)
        d2 = np.sum((batch.samples - sol.phi_star) ** 2, axis=1)
        mean, se, _ = batch_means(d2)
        rows.append(ConcentrationRow(float(b), float(mean), float(se),
                                     float(np.linalg.norm(batch.samples.mean(axis=0)))))
    slope = loglog_slope([r.beta for r in rows], [r.mean_sq_distance for r in rows])
    return rows, slope


def write_expansion_csv(path, rows):
    """Rows of ``(beta, mcmc, zeroth, first_order, error)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "mcmc", "zeroth", "first_order", "error"])
        for r in rows:
            w.writerow([f"{float(x):.17g}" for x in r])
