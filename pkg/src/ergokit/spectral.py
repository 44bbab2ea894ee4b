"""Finite-dimensional spectral machinery.

Hermitian decompositions, unitary and contraction-semigroup evolution, and
Cesaro time averages evaluated in closed form through the eigenexpansion.
Every time integral here is analytic: for frequencies ``w`` the average
``(1/T) int_0^T exp(i w t) dt`` equals ``exp(i w T/2) sinc(w T/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import NumericalError, ValidationError

HERMITIAN_RTOL = 1e-12
ACCRETIVE_TOL = 1e-12


def _as_state(psi, dim):
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.shape[0] != dim:
        raise ValidationError(f"state of shape {psi.shape} does not match dimension {dim}")
    return psi


def _check_time(T):
    if not T > 0:
        raise ValidationError(f"averaging time must be positive, got {T}")


def cesaro_kernel(omega, T):
    """``(1/T) int_0^T exp(i omega t) dt`` for an array of frequencies."""
    x = 0.5 * np.asarray(omega, dtype=float) * T
    return np.exp(1j * x) * np.sinc(x / np.pi)


@dataclass(frozen=True)
class HermitianOperator:
    entries: np.ndarray

    def __post_init__(self):
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
            raise ValidationError(f"expected a non-empty square matrix, got shape {h.shape}")
        scale = max(1.0, float(np.max(np.abs(h))))
        err = float(np.max(np.abs(h - h.conj().T)))
        if err > HERMITIAN_RTOL * scale:
            raise ValidationError(f"matrix is not Hermitian (max asymmetry {err:.3e})")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def random(cls, dim, rng):
        """Seeded GUE-like test operator."""
        x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return cls(0.5 * (x + x.conj().T))


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int

    @property
    def dim(self):
        return self.source_dim

    @property
    def diameter(self):
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def coefficients(self, psi):
        """Components of ``psi`` in the eigenbasis."""
        return self.eigenvectors.conj().T @ _as_state(psi, self.dim)

    def groups(self, degeneracy_tol=None):
        """Index arrays of eigenvalue clusters closer than ``degeneracy_tol``.

        Defaults to ``1e-9`` times the spectral diameter.
        """
        if degeneracy_tol is None:
            degeneracy_tol = 1e-9 * self.diameter
        if degeneracy_tol < 0:
            raise ValidationError("degeneracy_tol must be non-negative")
        breaks = np.flatnonzero(np.diff(self.eigenvalues) > degeneracy_tol) + 1
        return np.split(np.arange(self.dim), breaks)

    def kernel_mask(self, tol=None):
        lam = np.abs(self.eigenvalues)
        if tol is None:
            tol = kernel_threshold(lam)
        return lam <= tol


def kernel_threshold(abs_eigenvalues):
    top = float(np.max(abs_eigenvalues)) if np.size(abs_eigenvalues) else 0.0
    return 1e-9 * top if top > 1e-3 else 1e-12


def spectral_decompose(H):
    """Ascending eigenvalues and orthonormal eigenvectors of ``H``."""
    if not isinstance(H, HermitianOperator):
        H = HermitianOperator(H)
    try:
        lam, vec = np.linalg.eigh(H.entries)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigensolver did not converge", dim=H.dim,
                             max_abs_entry=float(np.max(np.abs(H.entries)))) from exc
    lam.setflags(write=False)
    vec.setflags(write=False)
    return SpectralDecomposition(lam, vec, H.dim)


def evolve_unitary(D, psi, t):
    """``exp(i t L) psi`` through the eigenexpansion."""
    c = D.coefficients(psi)
    return D.eigenvectors @ (np.exp(1j * D.eigenvalues * t) * c)


def _grouped_overlaps(D, psi_tilde, psi, degeneracy_tol):
    a = D.coefficients(psi_tilde)
    b = D.coefficients(psi)
    groups = D.groups(degeneracy_tol)
    overlaps = np.array([np.vdot(a[g], b[g]) for g in groups])
    freqs = np.array([D.eigenvalues[g].mean() for g in groups])
    return overlaps, freqs


def cesaro_correlation(D, psi_tilde, psi, T, n_quad=None, degeneracy_tol=None):
    """Time average of ``|<psi_tilde, exp(itL) psi>|**2`` over ``[0, T]``.

    Evaluated in closed form. When ``n_quad`` is given, the integral is also
    computed by ``n_quad``-point Gauss-Legendre quadrature and a
    :class:`NumericalError` is raised if the two disagree by more than 1e-8.
    """
    _check_time(T)
    c, w = _grouped_overlaps(D, psi_tilde, psi, degeneracy_tol)
    # |sum_g c_g e^{i w_g t}|^2 = sum_{g,h} c_g conj(c_h) e^{i (w_g - w_h) t}
    kern = cesaro_kernel(w[:, None] - w[None, :], T)
    value = float(np.real(np.einsum("g,h,gh->", c, c.conj(), kern)))
    if n_quad is not None:
        check = cesaro_correlation_quadrature(D, psi_tilde, psi, T, n_quad)
        if abs(check - value) > 1e-8:
            raise NumericalError("quadrature cross-check disagrees with closed form",
                                 closed_form=value, quadrature=check, n_quad=n_quad)
    return value


def cesaro_correlation_quadrature(D, psi_tilde, psi, T, n_quad):
    _check_time(T)
    if n_quad < 2:
        raise ValidationError("n_quad must be at least 2")
    a = D.coefficients(psi_tilde)
    b = D.coefficients(psi)
    x, wts = np.polynomial.legendre.leggauss(int(n_quad))
    t = 0.5 * T * (x + 1.0)
    amp = np.exp(1j * np.outer(t, D.eigenvalues)) @ (a.conj() * b)
    return float(0.5 * np.sum(wts * np.abs(amp) ** 2))


def cesaro_limit_exact(D, psi_tilde, psi, degeneracy_tol=None):
    """``T -> infinity`` limit: sum over degenerate groups of ``|<psi_tilde, P_g psi>|**2``."""
    c, _ = _grouped_overlaps(D, psi_tilde, psi, degeneracy_tol)
    return float(np.sum(np.abs(c) ** 2))


class ErgodicAverage(NamedTuple):
    finite: np.ndarray
    limit: np.ndarray


def mean_ergodic_vector(D, psi, T, kernel_tol=None):
    """Finite-T orbit average ``(1/T) int exp(itL) psi dt`` and its limit ``P_ker(L) psi``."""
    _check_time(T)
    c = D.coefficients(psi)
    finite = D.eigenvectors @ (cesaro_kernel(D.eigenvalues, T) * c)
    mask = D.kernel_mask(kernel_tol)
    limit = D.eigenvectors[:, mask] @ c[mask]
    return ErgodicAverage(finite, limit)


class RageAverage(NamedTuple):
    finite: float
    limit: float


def compact_rage_average(D, K, psi, T, degeneracy_tol=None):
    """Time average of ``||K exp(itL) psi||**2`` and its exact limit."""
    _check_time(T)
    K = np.asarray(K, dtype=complex)
    if K.shape != (D.dim, D.dim):
        raise ValidationError(f"K has shape {K.shape}, expected {(D.dim, D.dim)}")
    b = D.coefficients(psi)
    groups = D.groups(degeneracy_tol)
    w = np.array([D.eigenvalues[g].mean() for g in groups])
    # columns K P_g psi
    kp = np.stack([K @ (D.eigenvectors[:, g] @ b[g]) for g in groups], axis=1)
    gram = kp.conj().T @ kp
    kern = cesaro_kernel(w[None, :] - w[:, None], T)
    finite = float(np.real(np.sum(gram * kern)))
    limit = float(np.real(np.trace(gram)))
    return RageAverage(finite, limit)


@dataclass(frozen=True)
class AccretiveOperator:
    """Real diagonalizable generator with spectrum in the closed right half-plane."""

    entries: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)
    inverse_eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {a.shape}")
        mu, w = np.linalg.eig(a)
        if np.any(mu.real < -ACCRETIVE_TOL):
            raise ValidationError(
                f"generator has eigenvalue with real part {mu.real.min():.3e} < 0")
        cond = np.linalg.cond(w)
        if not np.isfinite(cond) or cond > 1e10:
            raise ValidationError(f"generator is not (numerically) diagonalizable, cond={cond:.2e}")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "eigenvalues", mu)
        object.__setattr__(self, "eigenvectors", w)
        object.__setattr__(self, "inverse_eigenvectors", np.linalg.inv(w))

    @property
    def dim(self):
        return self.entries.shape[0]

    def _apply(self, diag, f):
        out = self.eigenvectors @ (diag * (self.inverse_eigenvectors @ f))
        return out.real if np.isrealobj(f) else out

    def _real_vector(self, f):
        f = np.asarray(f)
        if f.ndim != 1 or f.shape[0] != self.dim:
            raise ValidationError(f"vector of shape {f.shape} does not match dimension {self.dim}")
        return f

    def kernel_projection(self, f, tol=None):
        f = self._real_vector(f)
        mags = np.abs(self.eigenvalues)
        if tol is None:
            tol = kernel_threshold(mags)
        return self._apply((mags <= tol).astype(float), f)

    def semigroup(self, f, t):
        """``exp(-t A) f``."""
        f = self._real_vector(f)
        return self._apply(np.exp(-t * self.eigenvalues), f)


def _phi1(z):
    """``(1 - exp(-z)) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, -np.expm1(-safe) / safe)


def semigroup_ergodic_limit(A, f, T, kernel_tol=None):
    """Finite-T average ``(1/T) int_0^T exp(-tA) f dt`` and the limit ``P_ker(A) f``."""
    if not isinstance(A, AccretiveOperator):
        A = AccretiveOperator(A)
    _check_time(T)
    f = A._real_vector(f)
    finite = A._apply(_phi1(A.eigenvalues * T), f)
    return ErgodicAverage(finite, A.kernel_projection(f, kernel_tol))


def doubling_ratio(error, T, n_samples=512):
    """Ratio of the RMS of ``error(s)`` on ``[T, 2T]`` to that on ``[2T, 4T]``.

    Cesaro errors oscillate like ``(exp(i w T) - 1) / (i w T)``, so pointwise
    doubling is erratic; the windowed RMS of an O(1/T) error has ratio 2.
    """
    def rms(lo):
        s = np.linspace(lo, 2 * lo, n_samples)
        return float(np.sqrt(np.mean([error(x) ** 2 for x in s])))

    return rms(T) / rms(2 * T)
