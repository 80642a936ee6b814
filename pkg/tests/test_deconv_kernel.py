"""Deconvolution kernel: taper shapes, table accuracy, norm and tail bounds."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from berkson_bands import Laplace, NoError, TaperSpec, kernel_eval, kernel_table, phi_k

from conftest import LAP01, MIX, SMOOTH, TAPER_S, TAPER_W


def test_taper_validation():
    with pytest.raises(ValueError):
        TaperSpec(kind="boxcar", cutoff=1.0)
    with pytest.raises(ValueError, match="cutoff must be positive"):
        TaperSpec(kind="damped_cutoff", cutoff=0.0)
    with pytest.raises(ValueError, match="flat_radius"):
        TaperSpec(kind="smooth_poly", cutoff=1.0, flat_radius=1.0)


def test_damped_cutoff_shape():
    S = TAPER_S.cutoff
    t = np.array([0.4, 1.0, 2.0, 0.5 * S])
    assert np.array_equal(phi_k(t, TAPER_S), 1.0 - np.exp(-((S / t) ** 2)))
    assert float(phi_k(0.0, TAPER_S)) == 1.0
    assert float(phi_k(S, TAPER_S)) == 0.0
    assert float(phi_k(1.2 * S, TAPER_S)) == 0.0
    grid = np.linspace(-7.0, 7.0, 2001)
    vals = np.asarray(phi_k(grid, TAPER_S))
    assert np.array_equal(vals, np.asarray(phi_k(-grid, TAPER_S)))
    assert np.all((vals >= 0.0) & (vals <= 1.0))


def _second_derivative(t, e=2e-5):
    return (float(phi_k(t + e, SMOOTH)) - 2.0 * float(phi_k(t, SMOOTH))
            + float(phi_k(t - e, SMOOTH))) / e**2


def _one_sided_jump(knot, d=1e-4):
    left = (3 * _second_derivative(knot - d) - 3 * _second_derivative(knot - 2 * d)
            + _second_derivative(knot - 3 * d))
    right = (3 * _second_derivative(knot + d) - 3 * _second_derivative(knot + 2 * d)
             + _second_derivative(knot + 3 * d))
    return abs(left - right)


def test_smooth_poly_is_flat_then_falls_twice_differentiably():
    assert float(phi_k(0.0, SMOOTH)) == 1.0
    assert float(phi_k(0.49, SMOOTH)) == 1.0
    assert float(phi_k(1.0, SMOOTH)) == 0.0
    assert float(phi_k(1.7, SMOOTH)) == 0.0
    mid = np.asarray(phi_k(np.linspace(0.5, 1.0, 101), SMOOTH))
    assert np.all(np.diff(mid) <= 1e-12)
    assert _one_sided_jump(0.5) < 1e-4
    assert _one_sided_jump(1.0) < 1e-4


@pytest.mark.parametrize("noise,spec", [(LAP01, TAPER_S), (MIX, TAPER_W)],
                         ids=["laplace", "mixture"])
@pytest.mark.parametrize("h", [0.1, 0.25, 0.5])
def test_table_matches_direct_quadrature(noise, spec, h):
    args = np.random.default_rng(42).uniform(-7.2, 7.2, 32)
    tab = kernel_table(h, noise, spec, span=8.0)
    err = max(abs(kernel_eval(float(u), h, noise, spec) - float(tab(u)))
              for u in args)
    assert err < 1e-6


def test_kernel_eval_is_symmetric():
    assert max(abs(kernel_eval(w, 0.25, LAP01, SMOOTH)
                   - kernel_eval(-w, 0.25, LAP01, SMOOTH))
               for w in (0.3, 1.1, 2.7)) < 1e-10


def test_error_free_kernel_reduces_to_taper_transform():
    ref, _ = quad(lambda t: float(phi_k(t, SMOOTH)), 0.0, 1.0, epsabs=1e-12)
    assert abs(kernel_eval(0.0, 0.3, NoError(), SMOOTH) - ref / math.pi) < 1e-8


def test_kernel_eval_agrees_with_trapezoid_rule():
    def trap(u, h):
        t = np.linspace(0.0, SMOOTH.cutoff, 2**17 + 1)
        f = np.asarray(phi_k(t, SMOOTH)) / np.asarray(LAP01.charfn(-t / h))
        return float(np.trapezoid(f * np.cos(t * u), t)) / math.pi

    assert max(abs(trap(u, 0.25) - kernel_eval(u, 0.25, LAP01, SMOOTH))
               for u in (0.0, 1.0)) < 1e-8


def test_table_refinement_is_stable():
    coarse = kernel_table(0.25, LAP01, TAPER_S, grid_len=1 << 14, span=8.0)
    fine = kernel_table(0.25, LAP01, TAPER_S, grid_len=1 << 15, span=8.0)
    us = np.linspace(-6.0, 6.0, 1001)
    assert np.max(np.abs(coarse(us) - fine(us))) < 1e-8


def test_tables_are_memoized():
    one = kernel_table(0.25, LAP01, TAPER_S, span=8.0)
    two = kernel_table(0.25, LAP01, TAPER_S, span=8.0)
    assert one is two


def test_table_argument_validation():
    tab = kernel_table(0.25, LAP01, TAPER_S, span=8.0)
    with pytest.raises(ValueError, match="outside the tabulated span"):
        tab(tab.span * 1.001)
    with pytest.raises(ValueError, match="power of two"):
        kernel_table(0.25, LAP01, TAPER_S, grid_len=300, span=8.0)
    with pytest.raises(ValueError, match="power of two"):
        kernel_table(0.25, LAP01, TAPER_S, grid_len=128, span=8.0)
    with pytest.raises(ValueError):
        kernel_table(0.25, LAP01, TAPER_S, span=-1.0)


def _squared_norm(h, noise, spec):
    t = np.linspace(0.0, spec.cutoff, 2**20 + 1)
    f = np.asarray(phi_k(t, spec)) / np.asarray(noise.charfn(-t / h))
    return float(np.trapezoid(f * f, t)) / math.pi


@pytest.mark.parametrize("noise,spec,hs",
                         [(Laplace(6.0), TAPER_S, (0.1, 0.25, 0.5)),
                          (MIX, TAPER_W, (0.2, 0.32))],
                         ids=["laplace", "mixture"])
def test_squared_norm_obeys_two_sided_rate_bounds(noise, spec, hs):
    for h in hs:
        norm = _squared_norm(h, noise, spec)
        lo = 1.0 / (math.pi * noise.c_upper * h ** (2 * noise.beta))
        hi = (1.0 / (math.pi * noise.c_lower)) * (1.0 + 1.0 / h**2) ** noise.beta
        assert lo <= norm <= hi


def test_peak_height_scales_with_squared_bandwidth():
    for h in (0.1, 0.25, 0.5):
        tab = kernel_table(h, LAP01, TAPER_S)
        assert h**2 * float(np.max(np.abs(tab.grid * tab.values))) < 0.1


@pytest.mark.parametrize("h", [0.1, 0.2, 0.4])
def test_squared_tail_mass_is_negligible(h):
    A = 2.0
    zs = np.linspace(A, 60.0, 24001)
    tab = kernel_table(h, LAP01, TAPER_S, span=(60.0 + 1.0) / h + 2.0)
    worst = 0.0
    for x in (0.0, 0.25, 0.5, 0.75, 1.0):
        vals = tab((zs - x) / h) ** 2 + tab((-zs - x) / h) ** 2
        integral = float(np.trapezoid(vals, zs))
        geometric = 2.0 * A / (A * A - x * x) * h ** (-2.0 * LAP01.beta + 2.0)
        worst = max(worst, integral / geometric)
    assert worst < 6e-5
