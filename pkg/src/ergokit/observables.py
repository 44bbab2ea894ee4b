"""Observables evaluated on lattice configurations.

Configurations are arrays whose last axis runs over the N interior sites.
Site indices follow the lattice convention ``1..N`` (the Dirichlet ghosts
are sites ``0`` and ``N+1`` and are never stored).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .exceptions import ValidationError

KINDS = ("site_square", "l2_norm_sq", "energy", "custom_polynomial")


@dataclass(frozen=True)
class ObservableSpec:
    kind: str
    index: int | None = None
    coefficients: tuple = field(default=())
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown observable kind {self.kind!r}")
        if self.kind == "site_square" and (self.index is None or self.index < 1):
            raise ValidationError("site_square needs a 1-based site index")

    @classmethod
    def site_square(cls, i):
        return cls("site_square", index=int(i))

    @classmethod
    def l2_norm_sq(cls, weight=1.0):
        return cls("l2_norm_sq", weight=float(weight))

    @classmethod
    def energy(cls):
        return cls("energy")

    @classmethod
    def custom_polynomial(cls, coefficients, weight=1.0):
        """``weight * sum_i p(q_i)`` with ``p(z) = sum_n c_n z**n``."""
        return cls("custom_polynomial", coefficients=tuple(float(c) for c in coefficients),
                   weight=float(weight))

    @property
    def name(self):
        if self.kind == "site_square":
            return f"q{self.index}^2"
        return self.kind

    def check_dim(self, n):
        if self.kind == "site_square" and self.index > n:
            raise ValidationError(f"site index {self.index} out of range 1..{n}")

    def __call__(self, q):
        """Evaluate on configurations ``q[..., N]``."""
        q = np.asarray(q, dtype=float)
        self.check_dim(q.shape[-1])
        if self.kind == "site_square":
            return q[..., self.index - 1] ** 2
        if self.kind == "l2_norm_sq":
            return self.weight * np.sum(q * q, axis=-1)
        if self.kind == "custom_polynomial":
            return self.weight * np.sum(P.polyval(q, self.coefficients), axis=-1)
        raise ValidationError("energy observables need the full phase-space state")

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        self.check_dim(q.shape[-1])
        if self.kind == "site_square":
            g = np.zeros_like(q)
            g[self.index - 1] = 2.0 * q[self.index - 1]
            return g
        if self.kind == "l2_norm_sq":
            return 2.0 * self.weight * q
        if self.kind == "custom_polynomial":
            return self.weight * P.polyval(q, P.polyder(self.coefficients or (0.0,)))
        raise ValidationError("energy observables have no configuration gradient")

    def hessian(self, q):
        q = np.asarray(q, dtype=float)
        n = q.shape[-1]
        self.check_dim(n)
        if self.kind == "site_square":
            h = np.zeros((n, n))
            h[self.index - 1, self.index - 1] = 2.0
            return h
        if self.kind == "l2_norm_sq":
            return 2.0 * self.weight * np.eye(n)
        if self.kind == "custom_polynomial":
            d2 = P.polyder(self.coefficients or (0.0,), 2)
            return np.diag(self.weight * P.polyval(q, d2))
        raise ValidationError("energy observables have no configuration Hessian")
