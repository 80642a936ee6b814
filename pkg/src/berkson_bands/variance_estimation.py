"""Difference-based estimators of the calibrated noise level.

The calibrated model has heteroscedastic standard deviation nu(.) >=
sigma.  estimate_sigma2 recovers the average level from first
differences; estimate_nu smooths the pseudo squared residuals
(Y_{j+1}-Y_j)^2/2 with a Nadaraya-Watson/Epanechnikov local average and
floors the result away from zero, as the band construction requires.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .design import RegressionSample

__all__ = ["VarianceCurve", "estimate_sigma2", "estimate_nu"]


@dataclass(frozen=True)
class VarianceCurve:
    """Standard-deviation curve x -> nu_hat(x) with a hard positive floor."""

    midpoints: np.ndarray
    residuals: np.ndarray
    h_v: float
    floor: float
    interval: tuple[float, float]
    degenerate: bool = False

    def variance(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = (self.midpoints[None, :] - x[:, None]) / self.h_v
        wts = np.maximum(1.0 - u**2, 0.0)
        sums = wts.sum(axis=1)
        if np.any(sums <= 0.0):
            raise ValueError(
                f"empty smoothing window at some evaluation points; "
                f"increase h_v (currently {self.h_v:.4g})"
            )
        out = np.maximum(wts @ self.residuals / sums, self.floor**2)
        return float(out[0]) if scalar else out

    def __call__(self, x):
        return np.sqrt(self.variance(x))


def estimate_sigma2(sample: RegressionSample) -> float:
    """First-difference noise level mean((Y_{j+1}-Y_j)^2)/2.

    Targets the local average of nu^2; used as a conservative floor.  A
    degenerate constant sample yields a machine-epsilon value and a
    warning.
    """
    y = sample.responses
    if len(y) < 2:
        raise ValueError("need at least two responses")
    diffs = np.diff(y)
    est = 0.5 * float(np.mean(diffs**2))
    if est == 0.0:
        warnings.warn(
            "constant responses: noise level estimate degenerates to "
            "machine epsilon",
            RuntimeWarning,
            stacklevel=2,
        )
        return float(np.finfo(float).eps)
    return est


def estimate_nu(
    sample: RegressionSample,
    h_v: float | None = None,
    interval: tuple[float, float] | None = None,
    mask: np.ndarray | None = None,
    floor_override: float | None = None,
) -> VarianceCurve:
    """Smoothed standard-deviation curve from pseudo squared residuals.

    ``mask`` selects the subsequence of observations to use (the held-out
    split of the extension); residuals pair consecutive selected points.
    The default bandwidth is (b-a) * n_points^(-1/5) over the requested
    interval, and the floor is max(sigma_hat/2, 1e-8) with sigma_hat the
    difference-based level of the same subsequence.
    """
    w = sample.design.points
    y = sample.responses
    if mask is not None:
        mask = np.asarray(mask)
        if mask.dtype == bool:
            idx = np.flatnonzero(mask)
        else:
            idx = np.asarray(mask, dtype=int)
        if len(idx) < 2:
            raise ValueError("mask must select at least two observations")
        w = w[idx]
        y = y[idx]
    if interval is None:
        interval = (float(w[0]), float(w[-1]))
    a, b = interval
    if not b >= a:
        raise ValueError(f"invalid interval [{a}, {b}]")
    r = 0.5 * (y[1:] - y[:-1]) ** 2
    mids = 0.5 * (w[1:] + w[:-1])
    if h_v is None:
        h_v = max((b - a), 1e-12) * len(w) ** (-0.2)
    spacing = float(np.max(np.diff(w))) if len(w) > 1 else 0.0
    if h_v <= 0.5 * spacing:
        raise ValueError(
            f"h_v={h_v:.4g} is below the data spacing {spacing:.4g}; "
            f"smoothing windows would be empty"
        )
    mean_r = float(np.mean(r))
    degenerate = mean_r == 0.0
    if degenerate:
        warnings.warn(
            "constant responses: variance curve reduced to its floor",
            RuntimeWarning,
            stacklevel=2,
        )
    if floor_override is not None:
        floor = floor_override
    else:
        floor = max(np.sqrt(mean_r) / 2.0, 1e-8)
    return VarianceCurve(
        midpoints=mids,
        residuals=r,
        h_v=float(h_v),
        floor=float(floor),
        interval=(float(a), float(b)),
        degenerate=degenerate,
    )
