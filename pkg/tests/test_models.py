"""Density families: evaluation, normalization, products, limits, closure."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0

from chromalocus import Density, ResolutionExceededError, SensorDataError
from chromalocus.models import (
    BandedParams,
    FAMILIES,
    GaussianParams,
    GeneralizedPeakParams,
    LogLinearParams,
    PeriodicShape,
    StepParams,
    VonMisesParams,
    closure_residual,
    cosine_shape,
    count_sign_changes,
    eval_model,
    gaussian_limit_coeffs,
    log_eval,
    multiply_von_mises,
    normalization_b,
    params_from_dict,
    params_to_dict,
)
from chromalocus.scene import Scene

from conftest import make_wheel, uniform_ref

# Quadrature value of the flat-reference normalization at unit amplitude;
# equals -log(i0(1)) to machine precision on the 301-point wheel.
B_UNIT_AMPLITUDE = -0.23591435850717857


@pytest.fixture(scope="module")
def wheel_scene(wheel):
    return Scene.build(wheel, uniform_ref(wheel))


# -- parameter validation ------------------------------------------------------

def test_von_mises_params_validation():
    with pytest.raises(SensorDataError):
        VonMisesParams(a=-1.0, b=0.0, s=0.0, width=1.0)
    with pytest.raises(SensorDataError):
        VonMisesParams(a=1.0, b=0.0, s=0.0, width=0.0)
    p = VonMisesParams(a=0.0, b=0.0, s=1.7, width=1.0)
    assert p.sigma == pytest.approx(0.7)


def test_step_params_validation():
    with pytest.raises(SensorDataError):
        StepParams(s=0.0, delta=0.0)
    with pytest.raises(SensorDataError):
        StepParams(s=0.0, delta=1.5)
    assert StepParams(s=0.2, delta=1.0).delta == 1.0


def test_banded_params_validation():
    with pytest.raises(SensorDataError):
        BandedParams(bands=((0.0, 0.5), (0.4, 1.0)), values=(1.0, 1.0))
    with pytest.raises(SensorDataError):
        BandedParams(bands=((0.5, 0.2),), values=(1.0,))
    with pytest.raises(SensorDataError):
        BandedParams(bands=((0.0, 0.5),), values=(-1.0,))
    p = BandedParams(bands=((0.2, 0.3), ((0.5, 0.6), (0.8, 0.9))), values=(2.0, 1.0))
    assert len(p.bands) == 2


# -- evaluation ----------------------------------------------------------------

def test_von_mises_zero_amplitude_is_flat():
    p = VonMisesParams(a=0.0, b=0.4, s=0.3, width=1.0)
    x = np.linspace(0, 1, 11)
    assert np.allclose(eval_model(p, x), np.exp(0.4), rtol=0, atol=0)


def test_von_mises_peak_value():
    p = VonMisesParams(a=2.0, b=-1.0, s=0.3, width=1.0)
    assert eval_model(p, 0.3) == pytest.approx(np.exp(1.0))
    assert eval_model(p, 0.8) == pytest.approx(np.exp(-3.0))


def test_step_eval_is_raw_indicator():
    p = StepParams(s=0.2, delta=0.3)
    x = np.array([0.25, 0.5, 0.2, 0.55, 0.7, 0.1])
    want = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    assert np.array_equal(eval_model(p, x), want)
    assert log_eval(p, 0.9) == -np.inf


def test_step_eval_wraps():
    p = StepParams(s=0.9, delta=0.3)
    assert eval_model(p, 0.95) == 1.0
    assert eval_model(p, 0.1) == 1.0
    assert eval_model(p, 0.5) == 0.0


def test_banded_eval():
    p = BandedParams(bands=((0.2, 0.3), ((0.5, 0.6), (0.8, 0.9))), values=(2.0, 1.0))
    x = np.array([0.25, 0.55, 0.85, 0.4, 0.0])
    assert np.array_equal(eval_model(p, x), [2.0, 1.0, 1.0, 0.0, 0.0])


def test_gaussian_eval():
    p = GaussianParams(alpha=-0.5, beta=1.0, gamma=0.2)
    x = np.array([0.0, 2.0])
    assert np.allclose(eval_model(p, x), np.exp(-0.5 * x**2 + x + 0.2))


def test_log_linear_eval_interpolates():
    grid = np.linspace(0, 1, 33)
    basis = np.vstack([np.ones(33), grid])
    p = LogLinearParams(np.array([0.5, 2.0]), basis, grid)
    assert eval_model(p, 0.25) == pytest.approx(np.exp(0.5 + 2.0 * 0.25))


def test_generalized_peak_matches_von_mises_on_cosine_samples():
    shape = PeriodicShape(np.cos(2 * np.pi * np.arange(256) / 256))
    gp = GeneralizedPeakParams(shape=shape, a=1.5, b=0.2, s=0.3, width=1.0)
    vm = VonMisesParams(a=1.5, b=0.2, s=0.3, width=1.0)
    x = np.linspace(0, 1, 97)
    assert np.allclose(log_eval(gp, x), log_eval(vm, x), atol=1e-9)


def test_scaling_shifts_offset():
    # multiplying the density by e^t only moves b
    p = VonMisesParams(a=1.3, b=-0.2, s=0.4, width=1.0)
    q = VonMisesParams(a=1.3, b=-0.2 + 0.9, s=0.4, width=1.0)
    x = np.linspace(0, 1, 50)
    assert np.allclose(eval_model(q, x), np.exp(0.9) * eval_model(p, x), rtol=1e-12)


# -- shift periodicity -----------------------------------------------------------

def test_full_width_shift_is_exact():
    x = np.linspace(400.0, 700.0, 301)
    p = VonMisesParams(a=2.0, b=0.1, s=137.0, width=300.0)
    q = VonMisesParams(a=2.0, b=0.1, s=137.0 + 300.0, width=300.0)
    assert np.array_equal(log_eval(p, x), log_eval(q, x))


def test_full_width_shift_is_exact_step():
    x = np.linspace(0.0, 1.0, 257)
    p = StepParams(s=0.375, delta=0.25)
    q = StepParams(s=0.375 + 1.0, delta=0.25)
    assert np.array_equal(eval_model(p, x), eval_model(q, x))


def test_full_width_shift_is_exact_generalized():
    shape = PeriodicShape(np.cos(2 * np.pi * np.arange(64) / 64))
    x = np.linspace(400.0, 700.0, 101)
    a = GeneralizedPeakParams(shape=shape, a=1.0, b=0.0, s=17.0, width=300.0)
    b = GeneralizedPeakParams(shape=shape, a=1.0, b=0.0, s=317.0, width=300.0)
    assert np.array_equal(log_eval(a, x), log_eval(b, x))


# -- periodic shapes ---------------------------------------------------------------

def test_periodic_shape_rejects_plateau():
    vals = np.cos(2 * np.pi * np.arange(64) / 64)
    vals[10] = vals[0] = 1.0
    with pytest.raises(SensorDataError):
        PeriodicShape(vals)


def test_periodic_shape_rejects_two_peaks():
    u = np.arange(64) / 64
    with pytest.raises(SensorDataError):
        PeriodicShape(np.cos(4 * np.pi * u) + 0.1 * np.cos(2 * np.pi * u))


def test_periodic_shape_needs_samples():
    with pytest.raises(SensorDataError):
        PeriodicShape(np.array([1.0, 0.0, -1.0]))


def test_periodic_shape_wraps():
    shape = PeriodicShape(np.cos(2 * np.pi * np.arange(128) / 128))
    assert shape(1.25) == pytest.approx(shape(0.25), abs=1e-12)
    assert shape(-0.25) == pytest.approx(shape(0.75), abs=1e-12)


def test_cosine_shape_values():
    assert cosine_shape(0.0) == pytest.approx(1.0)
    assert cosine_shape(0.5) == pytest.approx(-1.0)


# -- normalization ------------------------------------------------------------------

def test_normalization_b_zero_amplitude(wheel):
    b = normalization_b(wheel, uniform_ref(wheel), 0.0, 0.2)
    assert abs(b) < 1e-12


def test_normalization_b_frozen_value(wheel):
    # dual route: frozen quadrature value and the Bessel special function
    b = normalization_b(wheel, uniform_ref(wheel), 1.0, 0.0)
    assert b == pytest.approx(B_UNIT_AMPLITUDE, abs=1e-12)
    assert b == pytest.approx(-np.log(i0(1.0)), abs=1e-12)


def test_normalization_b_bessel_amplitudes(wheel):
    ref = uniform_ref(wheel)
    for a in (3.0, 10.0, 50.0):
        b = normalization_b(wheel, ref, a, 0.37)
        assert b == pytest.approx(-np.log(i0(a)), rel=1e-10)


def test_normalization_b_grid_consistency(wheel):
    fine = make_wheel(601)
    for a in (1.0, 25.0, 50.0):
        b1 = normalization_b(wheel, uniform_ref(wheel), a, 0.3)
        b2 = normalization_b(fine, uniform_ref(fine), a, 0.3)
        assert abs(b1 - b2) < 1e-10


def test_normalization_b_makes_unit_mass(wheel_scene):
    # direct check: exp(b + a cos) integrates to one against the scene
    a, s = 4.0, 0.62
    b = -wheel_scene.log_partition(a, s)
    dens = np.exp(b + a * np.cos(2 * np.pi * (wheel_scene.tau - s)))
    assert np.sum(wheel_scene.mass * dens) == pytest.approx(1.0, abs=1e-12)


def test_normalization_b_resolution_guard(wheel):
    with pytest.raises(ResolutionExceededError):
        normalization_b(wheel, uniform_ref(wheel), 1e9, 0.5)


def test_normalization_b_rejects_negative_amplitude(wheel):
    with pytest.raises(SensorDataError):
        normalization_b(wheel, uniform_ref(wheel), -1.0, 0.5)


# -- products -------------------------------------------------------------------------

def test_multiply_von_mises_self():
    p = VonMisesParams(a=1.5, b=-0.3, s=0.2, width=1.0)
    r = multiply_von_mises(p, p)
    assert r.a == pytest.approx(3.0)
    assert r.b == pytest.approx(-0.6)
    assert r.s == pytest.approx(0.2)


def test_multiply_von_mises_opposite_phases_cancel():
    p = VonMisesParams(a=2.0, b=0.0, s=0.1, width=1.0)
    q = VonMisesParams(a=2.0, b=0.5, s=0.6, width=1.0)
    r = multiply_von_mises(p, q)
    assert r.a == pytest.approx(0.0, abs=1e-12)


def test_multiply_von_mises_phasor_amplitude():
    p = VonMisesParams(a=1.0, b=0.0, s=0.1, width=1.0)
    q = VonMisesParams(a=2.0, b=0.0, s=0.4, width=1.0)
    r = multiply_von_mises(p, q)
    assert r.a == pytest.approx(np.sqrt(5.0 + 4.0 * np.cos(0.6 * np.pi)))


def test_multiply_von_mises_width_mismatch():
    p = VonMisesParams(a=1.0, b=0.0, s=0.0, width=1.0)
    q = VonMisesParams(a=1.0, b=0.0, s=0.0, width=2.0)
    with pytest.raises(SensorDataError):
        multiply_von_mises(p, q)


@settings(max_examples=60, deadline=None)
@given(
    a1=st.floats(0.0, 8.0), a2=st.floats(0.0, 8.0),
    s1=st.floats(0.0, 1.0), s2=st.floats(0.0, 1.0),
    b1=st.floats(-2.0, 2.0), b2=st.floats(-2.0, 2.0),
)
def test_multiply_von_mises_pointwise(a1, a2, s1, s2, b1, b2):
    p = VonMisesParams(a=a1, b=b1, s=s1, width=1.0)
    q = VonMisesParams(a=a2, b=b2, s=s2, width=1.0)
    r = multiply_von_mises(p, q)
    x = np.linspace(0, 1, 37)
    assert np.allclose(
        log_eval(r, x), log_eval(p, x) + log_eval(q, x), rtol=0, atol=1e-12)


# -- wide-domain limit -------------------------------------------------------------------

def test_gaussian_limit_zero_amplitude():
    p = VonMisesParams(a=0.0, b=0.7, s=5.0, width=40.0)
    g, gap = gaussian_limit_coeffs(p, (0.0, 2.0))
    assert (g.alpha, g.beta, g.gamma) == (0.0, 0.0, 0.7)
    assert gap == 0.0


def test_gaussian_limit_quarter_turn_shift():
    # peak a quarter period away: pure linear exponent at x=0
    width = 32.0
    p = VonMisesParams(a=1.2, b=0.0, s=width / 4.0, width=width)
    g, _ = gaussian_limit_coeffs(p, (0.0, 1.0))
    A = 2 * np.pi / width
    assert g.alpha == pytest.approx(0.0, abs=1e-14)
    assert g.beta == pytest.approx(A * 1.2)
    assert g.gamma == pytest.approx(0.0, abs=1e-14)


def test_gaussian_limit_gap_matches_brute_force():
    p = VonMisesParams(a=1.0, b=-0.5, s=0.7, width=8.0)
    g, gap = gaussian_limit_coeffs(p, (0.0, 2.0), n_eval=10001)
    x = np.linspace(0.0, 2.0, 10001)
    brute = np.max(np.abs(eval_model(p, x) - eval_model(g, x)))
    assert gap == pytest.approx(brute, rel=0, abs=0)


def test_gaussian_limit_gap_shrinks_with_width():
    gaps = []
    for width in (8.0, 16.0, 32.0):
        p = VonMisesParams(a=1.0, b=0.0, s=0.3, width=width)
        gaps.append(gaussian_limit_coeffs(p, (0.0, 2.0))[1])
    assert gaps[0] > gaps[1] > gaps[2] > 0.0


def test_gaussian_limit_needs_wide_density():
    p = VonMisesParams(a=1.0, b=0.0, s=0.0, width=1.0)
    with pytest.raises(SensorDataError):
        gaussian_limit_coeffs(p, (0.0, 2.0))


# -- sign structure -------------------------------------------------------------------------

def test_sign_changes_two_peaks(wheel_scene):
    f = wheel_scene.peak_density(2.0, 0.3)
    g = wheel_scene.peak_density(2.0, 0.55)
    r = count_sign_changes(wheel_scene, f, g)
    assert r.kind == "twice_cyclic"
    assert r.count == 2
    assert r.positive_interval is not None


def test_sign_changes_two_steps(wheel_scene):
    f = wheel_scene.step_density(0.1, 0.4)
    g = wheel_scene.step_density(0.3, 0.4)
    r = count_sign_changes(wheel_scene, f, g)
    assert r.kind == "twice_cyclic"
    # the positive side starts where g's window ends
    lo, hi = r.positive_interval
    assert lo == pytest.approx(0.7, abs=0.01)


def test_sign_changes_mixture_is_other(wheel_scene):
    f = wheel_scene.peak_density(2.0, 0.3)
    g = 0.5 * wheel_scene.peak_density(6.0, 0.05) + 0.5 * wheel_scene.peak_density(6.0, 0.55)
    r = count_sign_changes(wheel_scene, f, g)
    assert r.kind == "other"
    assert r.count == 4


def test_sign_changes_identical_rejected(wheel_scene):
    f = wheel_scene.peak_density(2.0, 0.3)
    with pytest.raises(SensorDataError):
        count_sign_changes(wheel_scene, f, f.copy())


def test_sign_changes_requires_unit_mass(wheel_scene):
    f = wheel_scene.peak_density(2.0, 0.3)
    with pytest.raises(SensorDataError):
        count_sign_changes(wheel_scene, f, 2.0 * f)


# -- closure residuals ------------------------------------------------------------------------

def test_closure_banded_closed_both_ways():
    fam = FAMILIES["banded"]()
    prod, tot = closure_residual(fam, n_trials=40, seed=1)
    assert prod.max_residual <= 1e-10
    assert tot.max_residual <= 1e-10


def test_closure_von_mises_products_only():
    fam = FAMILIES["von_mises"]()
    prod, tot = closure_residual(fam, n_trials=40, seed=1)
    assert prod.max_residual <= 1e-10
    assert tot.median_residual >= 1e-3


def test_closure_linear_span_sums_only():
    fam = FAMILIES["linear3"]()
    prod, tot = closure_residual(fam, n_trials=40, seed=1)
    assert tot.max_residual <= 1e-10
    assert prod.median_residual >= 1e-2


def test_closure_trials_reproducible():
    fam = FAMILIES["von_mises"]()
    a = closure_residual(fam, n_trials=10, seed=3)
    b = closure_residual(fam, n_trials=10, seed=3)
    assert a == b


# -- serialization -----------------------------------------------------------------------------

def test_params_roundtrip_all_types():
    shape = PeriodicShape(np.cos(2 * np.pi * np.arange(64) / 64))
    grid = np.linspace(0, 1, 33)
    cases = [
        VonMisesParams(a=1.5, b=-0.3, s=0.2, width=300.0),
        GeneralizedPeakParams(shape=shape, a=1.0, b=0.0, s=5.0, width=300.0),
        GaussianParams(alpha=-0.5, beta=1.0, gamma=0.2),
        StepParams(s=0.2, delta=0.3),
        BandedParams(bands=((0.2, 0.3), ((0.5, 0.6), (0.8, 0.9))), values=(2.0, 1.0)),
        LogLinearParams(np.array([0.5, 2.0]), np.vstack([np.ones(33), grid]), grid),
    ]
    x = np.linspace(0, 1, 41)
    for p in cases:
        q = params_from_dict(params_to_dict(p))
        assert type(q) is type(p)
        assert np.allclose(log_eval(q, x), log_eval(p, x), rtol=0, atol=1e-12)


def test_params_from_dict_unknown_type():
    with pytest.raises(SensorDataError):
        params_from_dict({"type": "mystery"})
