"""Point estimator of the regression function and its exact-moment oracles.

The estimator averages responses against the deconvolution kernel,
ghat(x;h) = sum_j weight_j Y_j K((w_j - x)/h; h) / h, which undoes the
smoothing gamma = g * f(-.) induced by the Berkson errors.  The oracles
compute gamma, the conditional variance nu^2, and the exact mean and
variance of ghat by quadrature, for use as test references.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .deconv_kernel import KernelTable, TaperSpec, phi_k
from .design import Design, RegressionSample
from .noise_models import Laplace, LaplaceMixture, NoError, NoiseModel

__all__ = [
    "EstimateCurve",
    "phi_gamma_hat",
    "estimate_g",
    "estimate_g_fourier",
    "oracle_gamma",
    "oracle_nu2",
    "gamma_profile",
    "nu2_profile",
    "oracle_mean",
    "oracle_variance",
]


@dataclass(frozen=True)
class EstimateCurve:
    grid: np.ndarray
    values: np.ndarray
    h: float
    beta: float


def phi_gamma_hat(sample: RegressionSample, t) -> complex | np.ndarray:
    """Empirical Fourier transform sum_j weight_j Y_j exp(i t w_j)."""
    t = np.asarray(t, dtype=float)
    w = sample.design.points
    coef = sample.design.weights * sample.responses
    out = np.exp(1j * np.multiply.outer(t, w)) @ coef
    return complex(out) if out.ndim == 0 else out


def _check_grid(design: Design, h: float, grid: np.ndarray) -> None:
    lo, hi = design.identifiable_range(h)
    tol = 1e-12
    if grid.size and (grid.min() < lo - tol or grid.max() > hi + tol):
        raise ValueError(
            f"evaluation points must lie in the identifiable range "
            f"[{lo:.4g}, {hi:.4g}] for h={h}"
        )


def estimate_g(
    sample: RegressionSample, h: float, grid, table: KernelTable
) -> EstimateCurve:
    """Kernel-sum evaluation of ghat(.;h) on ``grid`` (authoritative route)."""
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if abs(table.h - h) > 1e-12:
        raise ValueError(f"kernel table built for h={table.h}, not h={h}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    _check_grid(sample.design, h, grid)
    w = sample.design.points
    if grid.size:
        extremes = np.array([grid.min(), grid.max()])
        needed = float(np.max(np.abs(w[None, :] - extremes[:, None]))) / h
        if needed > table.span:
            raise ValueError(
                f"kernel table span {table.span:.4g} does not cover scaled "
                f"arguments up to {needed:.4g}; enlarge the span"
            )
    coef = sample.design.weights * sample.responses
    vals = np.empty(grid.shape)
    block = max(1, int(2**22 // max(1, w.size)))
    for s in range(0, grid.size, block):
        gb = grid[s : s + block]
        vals[s : s + gb.size] = table((w[None, :] - gb[:, None]) / h) @ coef
    vals /= h
    return EstimateCurve(grid=grid, values=vals, h=float(h), beta=table.beta)


def estimate_g_fourier(
    sample: RegressionSample,
    h: float,
    grid,
    noise: NoiseModel,
    spec: TaperSpec,
    n_omega: int = 1 << 15,
    block: int = 1024,
) -> EstimateCurve:
    """Frequency-domain evaluation of ghat; mutual check for estimate_g.

    Integrates exp(-i omega x) phi_k(omega h) phi_gamma_hat(omega) /
    charfn(-omega) over the taper's frequency band with a trapezoid rule,
    chunked to bound memory.
    """
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    _check_grid(sample.design, h, grid)
    w = sample.design.points
    coef = sample.design.weights * sample.responses
    om_max = spec.cutoff / h
    om = np.linspace(0.0, om_max, n_omega + 1)
    dw = om[1] - om[0]
    trap = np.full(n_omega + 1, dw)
    trap[0] = trap[-1] = 0.5 * dw
    out = np.zeros(len(grid))
    for start in range(0, n_omega + 1, block):
        ob = om[start : start + block]
        tb = trap[start : start + block]
        eb = np.exp(1j * ob[:, None] * w[None, :]) @ coef
        fb = phi_k(ob * h, spec) / noise.charfn(-ob)
        cb = tb * fb * eb
        phase = np.exp(-1j * ob[:, None] * grid[None, :])
        out += np.real(cb[None, :] @ phase).ravel()
    return EstimateCurve(
        grid=grid, values=out / math.pi, h=float(h), beta=float(noise.beta)
    )


def _tail_halfwidth(noise: NoiseModel) -> float:
    if isinstance(noise, Laplace):
        return 31.0 / noise.a
    if isinstance(noise, LaplaceMixture):
        return noise.mu + 31.0 / noise.a
    return 0.0


def oracle_gamma(g, noise: NoiseModel, w: float) -> float:
    """Smoothed regression gamma(w) = int g(w+d) f(d) dd by quadrature."""
    if isinstance(noise, NoError):
        return float(g(w))
    tail = _tail_halfwidth(noise)
    pts = sorted({-tail, *noise.density_kinks(), tail})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = quad(
            lambda d: float(g(w + d)) * float(noise.density(d)),
            lo,
            hi,
            epsabs=1e-10,
            limit=200,
        )
        total += val
    return total


def oracle_nu2(g, noise: NoiseModel, sigma2: float, w: float) -> float:
    """Conditional variance nu^2(w) = int (g(w+d)-gamma(w))^2 f(d) dd + sigma^2."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if isinstance(noise, NoError):
        return float(sigma2)
    gam = oracle_gamma(g, noise, w)
    tail = _tail_halfwidth(noise)
    pts = sorted({-tail, *noise.density_kinks(), tail})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = quad(
            lambda d: (float(g(w + d)) - gam) ** 2 * float(noise.density(d)),
            lo,
            hi,
            epsabs=1e-10,
            limit=200,
        )
        total += val
    return total + sigma2


def _simpson_rule(noise: NoiseModel, step: float = 1e-3):
    """Kink-aligned composite-Simpson nodes and weights over the error law."""
    tail = _tail_halfwidth(noise)
    edges = sorted({-tail, *noise.density_kinks(), tail})
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = max(2, int(math.ceil((hi - lo) / step / 2)) * 2)
        x = np.linspace(lo, hi, m + 1)
        wts = np.empty(m + 1)
        wts[0] = wts[-1] = 1.0
        wts[1:-1:2] = 4.0
        wts[2:-1:2] = 2.0
        wts *= (hi - lo) / m / 3.0
        nodes.append(x)
        weights.append(wts)
    d = np.concatenate(nodes)
    wt = np.concatenate(weights) * noise.density(d)
    return d, wt


def gamma_profile(g, noise: NoiseModel, w, block: int = 256) -> np.ndarray:
    """Vectorized gamma over a grid of w values (bulk quadrature path)."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if isinstance(noise, NoError):
        return np.asarray(g(w), dtype=float)
    d, wt = _simpson_rule(noise)
    out = np.empty(len(w))
    for s in range(0, len(w), block):
        out[s : s + block] = g(w[s : s + block, None] + d[None, :]) @ wt
    return out


def nu2_profile(g, noise: NoiseModel, sigma2: float, w, block: int = 256) -> np.ndarray:
    """Vectorized nu^2 over a grid of w values."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if isinstance(noise, NoError):
        return np.full(len(w), float(sigma2))
    d, wt = _simpson_rule(noise)
    m1 = np.empty(len(w))
    m2 = np.empty(len(w))
    for s in range(0, len(w), block):
        gv = g(w[s : s + block, None] + d[None, :])
        m1[s : s + block] = gv @ wt
        m2[s : s + block] = (gv**2) @ wt
    return np.maximum(m2 - m1**2, 0.0) + sigma2


def oracle_mean(
    g, noise: NoiseModel, design: Design, h: float, x, table: KernelTable
) -> np.ndarray:
    """Exact E[ghat(x;h)]: the estimator applied to the noiseless gamma."""
    gamma = gamma_profile(g, noise, design.points)
    sample = RegressionSample(design=design, responses=gamma)
    return estimate_g(sample, h, x, table).values


def oracle_variance(
    g,
    noise: NoiseModel,
    sigma2: float,
    design: Design,
    h: float,
    x,
    table: KernelTable,
) -> np.ndarray:
    """Exact Var[ghat(x;h)] = sum_j (weight_j/h)^2 nu^2(w_j) K(...)^2."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nu2 = nu2_profile(g, noise, sigma2, design.points)
    args = (design.points[None, :] - x[:, None]) / h
    km = table(args)
    return (km**2 * (design.weights / h) ** 2) @ nu2
