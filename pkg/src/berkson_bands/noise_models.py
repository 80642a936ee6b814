"""Error laws for the Berkson covariate noise.

Each law exposes its characteristic function, its Lebesgue density, a
sampler, and the polynomial-decay envelope constants used by the
deconvolution machinery: c_lower * (1+t^2)^(-beta/2) <= |charfn(t)| <=
c_upper * (1+t^2)^(-beta/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Laplace",
    "LaplaceMixture",
    "NoError",
    "NoiseModel",
    "laplace_from_sd",
    "make_noise",
]


@dataclass(frozen=True)
class Laplace:
    """Laplace law with rate ``a``: density (a/2) exp(-a|x|), sd sqrt(2)/a."""

    a: float

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError(f"rate must be positive, got a={self.a}")

    beta: float = 2.0
    smoothness_class: str = "S"

    @property
    def sd(self) -> float:
        return math.sqrt(2.0) / self.a

    @property
    def c_lower(self) -> float:
        return min(self.a**2, 1.0)

    @property
    def c_upper(self) -> float:
        return max(self.a**2, 1.0)

    def charfn(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (1.0 + (t / self.a) ** 2)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a * np.exp(-self.a * np.abs(x))

    def density_kinks(self) -> list[float]:
        return [0.0]

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.laplace(0.0, 1.0 / self.a, size=size)


@dataclass(frozen=True)
class LaplaceMixture:
    """Three-component shift mixture of a common Laplace(a) core.

    Density (1-lam) f0(x) + (lam/2) f0(x-mu) + (lam/2) f0(x+mu) with f0 the
    Laplace(a) density.  Its Fourier transform (1-lam+lam cos(mu t)) /
    (1+(t/a)^2) oscillates, so the law is only weakly ordinary smooth; the
    lower envelope picks up the factor (1-2 lam), which forces lam < 1/2.
    """

    a: float
    lam: float
    mu: float

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError(f"rate must be positive, got a={self.a}")
        if not 0.0 <= self.lam < 0.5:
            raise ValueError(f"mixture weight must be in [0, 1/2), got {self.lam}")
        if self.mu < 0:
            raise ValueError(f"shift must be nonnegative, got {self.mu}")

    beta: float = 2.0
    smoothness_class: str = "W"

    @property
    def sd(self) -> float:
        return math.sqrt(2.0 / self.a**2 + self.lam * self.mu**2)

    @property
    def c_lower(self) -> float:
        return min(self.a**2, 1.0) * (1.0 - 2.0 * self.lam)

    @property
    def c_upper(self) -> float:
        return max(self.a**2, 1.0)

    def charfn(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 - self.lam + self.lam * np.cos(self.mu * t)) / (
            1.0 + (t / self.a) ** 2
        )

    def density(self, x):
        x = np.asarray(x, dtype=float)

        def f0(u):
            return 0.5 * self.a * np.exp(-self.a * np.abs(u))

        return (1.0 - self.lam) * f0(x) + 0.5 * self.lam * (
            f0(x - self.mu) + f0(x + self.mu)
        )

    def density_kinks(self) -> list[float]:
        return sorted({-self.mu, 0.0, self.mu})

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        core = rng.laplace(0.0, 1.0 / self.a, size=size)
        u = rng.random(size=size)
        shift = np.where(
            u < 0.5 * self.lam, -self.mu, np.where(u < self.lam, self.mu, 0.0)
        )
        return core + shift


@dataclass(frozen=True)
class NoError:
    """Degenerate point mass at zero (no covariate noise)."""

    beta: float = 0.0
    smoothness_class: str = "S"
    c_lower: float = 0.5
    c_upper: float = 2.0

    @property
    def sd(self) -> float:
        return 0.0

    def charfn(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t)

    def density(self, x):
        raise ValueError("point mass at zero has no Lebesgue density")

    def density_kinks(self) -> list[float]:
        return []

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.zeros(size)


NoiseModel = Laplace | LaplaceMixture | NoError


def laplace_from_sd(sigma_delta: float) -> Laplace:
    """Laplace law with standard deviation ``sigma_delta``."""
    if sigma_delta <= 0:
        raise ValueError(f"sd must be positive, got {sigma_delta}")
    return Laplace(a=math.sqrt(2.0) / sigma_delta)


def make_noise(
    kind: str,
    *,
    a: float | None = None,
    sigma_delta: float | None = None,
    lam: float = 0.2,
    mu: float = 0.3,
) -> NoiseModel:
    """Build a noise model from config-style fields.

    Exactly one of ``a`` (rate) or ``sigma_delta`` (for ``laplace``, the
    law's sd; for ``mixture``, the sd of the Laplace core) fixes the scale.
    """
    kind = kind.lower()
    if kind in ("none", "noerror"):
        return NoError()
    if a is None:
        if sigma_delta is None:
            raise ValueError("need a rate 'a' or a scale 'sigma_delta'")
        a = math.sqrt(2.0) / sigma_delta
    if kind == "laplace":
        return Laplace(a=a)
    if kind in ("mixture", "laplace_mixture"):
        return LaplaceMixture(a=a, lam=lam, mu=mu)
    raise ValueError(f"unknown noise kind {kind!r}")
