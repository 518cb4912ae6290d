"""Tests for Bessel functions, periodic quadrature, and tilt constants."""

import math

import numpy as np
import pytest
from scipy import special as sps

from gvmts.errors import QuadratureError
from gvmts.special import (
    BESSEL_Z_LIMIT,
    GvMShape,
    QuadratureSpec,
    ab_ratios,
    bessel_i,
    default_abs_tol,
    g_const,
    h_const,
    quad_periodic,
)
from gvmts.spectrum import TabulatedDensity

TWO_PI = 2.0 * math.pi

# Frozen reference values, computed from the ascending power series at high
# precision (mpmath).
I0_1 = 1.2660658777520083356
I1_1 = 0.56515910399248502721
REFERENCE_IV = {
    (0, 1.0): 1.26606587775200834,
    (1, 1.0): 0.565159103992485027,
    (2, 1.0): 0.135747669767038281,
    (2, 0.5): 0.0319061491777382538,
    (0, 5.0): 27.2398718236044469,
    (3, 5.0): 10.3311501691511384,
    (0, 15.0): 339649.37329791388,
    (5, 15.0): 144572.011200634027,
    (0, 20.0): 43558282.5595535333,
    (4, 20.0): 28935060.3187648706,
    (8, 30.0): 265912658948.355091,
    (0, 50.0): 2.93255378384933633e20,
    (6, 50.0): 2.03938928199686472e20,
    (0, 650.0): 3.0616123926081447e280,
    (3, 650.0): 3.04047363405446954e280,
}


def oracle_besseli(n: int, z: float) -> float:
    """Independent oracle: the ascending power series, term by term."""
    terms = []
    term = (z / 2.0) ** n / math.factorial(n)
    m = 0
    while True:
        terms.append(term)
        m += 1
        term *= (z / 2.0) ** 2 / (m * (m + n))
        if term < 1e-25 * sum(terms) and m > 4:
            break
    return math.fsum(terms)


class TestBesselI:
    def test_trivial_at_zero(self):
        assert bessel_i(0, 0.0) == 1.0
        assert bessel_i(3, 0.0) == 0.0

    def test_series_oracle(self):
        assert bessel_i(0, 1.0) == pytest.approx(oracle_besseli(0, 1.0), rel=1e-14)
        for n in range(0, 9):
            for z in (0.1, 0.7, 2.0, 6.3, 11.0, 14.9):
                assert bessel_i(n, z) == pytest.approx(
                    oracle_besseli(n, z), rel=1e-13
                )

    def test_frozen_values(self):
        for (n, z), ref in REFERENCE_IV.items():
            assert bessel_i(n, z) == pytest.approx(ref, rel=1e-13)

    def test_against_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(0, 12))
            z = float(rng.uniform(0.0, 50.0))
            assert bessel_i(n, z) == pytest.approx(float(sps.iv(n, z)), rel=1e-12)

    def test_recurrence(self):
        # I_{n-1}(z) - I_{n+1}(z) = (2n/z) I_n(z)
        for z in np.linspace(0.5, 20.0, 14):
            for n in range(1, 9):
                lhs = bessel_i(n - 1, z) - bessel_i(n + 1, z)
                rhs = 2.0 * n / z * bessel_i(n, z)
                assert lhs == pytest.approx(rhs, rel=1e-11)

    def test_monotone_in_order(self):
        for z in (0.3, 4.0, 17.0, 120.0):
            vals = [bessel_i(n, z) for n in range(12)]
            assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_overflow_limit(self):
        with pytest.raises(OverflowError):
            bessel_i(0, BESSEL_Z_LIMIT + 1.0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            bessel_i(-1, 1.0)
        with pytest.raises(ValueError):
            bessel_i(0, -0.5)
        with pytest.raises(ValueError):
            bessel_i(0, math.nan)


class TestQuadPeriodic:
    def test_odd_harmonic_vanishes(self):
        assert quad_periodic(np.cos) == pytest.approx(0.0, abs=1e-14)

    def test_normalized_constant(self):
        assert quad_periodic(lambda t: np.full_like(t, 1.0 / TWO_PI)) == pytest.approx(
            1.0, abs=1e-14
        )

    def test_bessel_integral_identity(self):
        val = quad_periodic(lambda t: np.exp(np.cos(t)) / TWO_PI)
        assert val == pytest.approx(I0_1, abs=1e-13)

    def test_nonsmooth_integrand_fails(self):
        spec = QuadratureSpec(num_nodes=16, abs_tol=1e-12)
        with pytest.raises(QuadratureError):
            quad_periodic(lambda t: np.sign(np.sin(10.5 * t)), spec)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(num_nodes=8)
        with pytest.raises(ValueError):
            QuadratureSpec(refinement_factor=1)
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=1e-16)

    def test_env_tolerance_override(self, monkeypatch):
        monkeypatch.setenv("GVM_TOL", "1e-8")
        assert default_abs_tol() == 1e-8
        monkeypatch.delenv("GVM_TOL")
        assert default_abs_tol() == 1e-12


class TestGvMShape:
    def test_validation(self):
        with pytest.raises(ValueError):
            GvMShape(kappas=())
        with pytest.raises(ValueError):
            GvMShape(kappas=(1.0, 1.0))  # missing delta
        with pytest.raises(ValueError):
            GvMShape(kappas=(-0.1,))
        with pytest.raises(ValueError):
            GvMShape(kappas=(1.0, 1.0), deltas=(math.pi,))  # out of [0, pi)

    def test_exponent(self):
        shape = GvMShape(kappas=(2.0, 0.5), deltas=(0.3,))
        theta = np.array([0.1, -1.2])
        expect = 2.0 * np.cos(theta) + 0.5 * np.cos(2 * (theta + 0.3))
        np.testing.assert_allclose(shape.exponent(theta), expect, rtol=1e-15)


def quad_g(r, shape):
    spec = QuadratureSpec(abs_tol=1e-13)
    return quad_periodic(
        lambda t: np.cos(r * t) * np.exp(shape.exponent(t)) / TWO_PI, spec
    )


def quad_h(r, shape):
    spec = QuadratureSpec(abs_tol=1e-13)
    return quad_periodic(
        lambda t: np.sin(r * t) * np.exp(shape.exponent(t)) / TWO_PI, spec
    )


class TestTiltConstants:
    def test_uniform_case(self):
        shape = GvMShape(kappas=(0.0, 0.0), deltas=(0.7,))
        assert g_const(0, shape) == pytest.approx(1.0, abs=1e-15)
        for r in range(1, 5):
            assert g_const(r, shape) == pytest.approx(0.0, abs=1e-15)
            assert h_const(r, shape) == pytest.approx(0.0, abs=1e-15)

    def test_second_harmonic_off_collapses(self):
        shape = GvMShape(kappas=(1.0, 0.0), deltas=(0.4,))
        assert g_const(1, shape) == pytest.approx(I1_1, rel=1e-13)

    def test_order_one_sine_vanishes(self):
        for kap in (0.2, 1.0, 7.0):
            assert h_const(1, GvMShape(kappas=(kap,))) == 0.0

    def test_axially_symmetric_sine_vanishes(self):
        shape = GvMShape(kappas=(1.0, 1.0), deltas=(0.0,))
        assert h_const(1, shape) == pytest.approx(0.0, abs=1e-14)
        half = GvMShape(kappas=(1.0, 1.0), deltas=(math.pi / 2,))
        assert h_const(1, half) == pytest.approx(0.0, abs=1e-14)
        assert h_const(2, half) == pytest.approx(0.0, abs=1e-14)

    def test_series_matches_quadrature(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            shape = GvMShape(
                kappas=(rng.uniform(0, 5), rng.uniform(0, 5)),
                deltas=(rng.uniform(0, math.pi),),
            )
            for r in range(0, 7):
                assert g_const(r, shape) == pytest.approx(
                    quad_g(r, shape), abs=1e-10
                )
                if r >= 1:
                    assert h_const(r, shape) == pytest.approx(
                        quad_h(r, shape), abs=1e-10
                    )

    def test_asymmetric_case_frozen(self):
        # values pinned by high-precision quadrature of the defining integral
        shape = GvMShape(kappas=(1.5, 0.8), deltas=(0.3,))
        assert g_const(2, shape) == pytest.approx(0.99795773224605839, rel=1e-12)
        shape2 = GvMShape(kappas=(1.0, 1.0), deltas=(0.5,))
        assert h_const(1, shape2) == pytest.approx(-0.26093104823884089, rel=1e-12)

    def test_general_order_uses_quadrature(self):
        shape = GvMShape(kappas=(1.0, 0.6, 0.4), deltas=(0.3, 0.9))
        for r in range(0, 4):
            assert g_const(r, shape) == pytest.approx(quad_g(r, shape), abs=1e-10)

    def test_tabulated_reference(self):
        # against a tabulated uniform reference, constants match the
        # closed uniform-reference values
        href = TabulatedDensity.uniform(2.5, 512)
        shape = GvMShape(kappas=(1.2, 0.5), deltas=(0.8,))
        for r in range(0, 4):
            assert g_const(r, shape, h=href) == pytest.approx(
                g_const(r, shape), rel=1e-12, abs=1e-12
            )


class TestAbRatios:
    def test_uniform_zero(self):
        assert ab_ratios(1, GvMShape(kappas=(0.0,))) == (0.0, 0.0)

    def test_frozen_ratio(self):
        a, b = ab_ratios(1, GvMShape(kappas=(1.0,)))
        assert a == pytest.approx(0.44638996589653450705, rel=1e-13)
        assert b == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            shape = GvMShape(
                kappas=(rng.uniform(0, 6), rng.uniform(0, 6)),
                deltas=(rng.uniform(0, math.pi),),
            )
            for r in range(1, 5):
                a, b = ab_ratios(r, shape)
                assert abs(a) <= 1.0 + 1e-12
                assert abs(b) <= 1.0 + 1e-12
                assert a * a + b * b <= 1.0 + 1e-12

    def test_first_ratio_strictly_increasing(self):
        kappas = np.linspace(0.0, 50.0, 201)
        vals = [ab_ratios(1, GvMShape(kappas=(k,)))[0] for k in kappas]
        diffs = np.diff(vals)
        assert np.all(diffs > 0)
        assert 0.0 < vals[-1] < 1.0

    def test_large_concentration_fallback(self):
        # series cancellation regime: must agree with stabilized quadrature
        shape = GvMShape(kappas=(80.0, 60.0), deltas=(0.8,))
        shift = sum(shape.kappas)
        spec = QuadratureSpec(abs_tol=1e-13)

        def coeff(trig, r):
            return quad_periodic(
                lambda t: trig(r * t) * np.exp(shape.exponent(t) - shift), spec
            )

        a, b = ab_ratios(1, shape)
        g0 = coeff(np.cos, 0)
        assert a == pytest.approx(coeff(np.cos, 1) / g0, rel=1e-9)
        assert b == pytest.approx(coeff(np.sin, 1) / g0, rel=1e-9)
