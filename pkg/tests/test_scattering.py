import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dnlslab import HypothesisError
from dnlslab.propagators import free_propagate
from dnlslab.scattering import (
    ErrorCurve,
    ExtractionError,
    ScatteringState,
    elemlem_check,
    error_curve,
    extract_phi,
    fit_rate,
    i2_norm,
    profile_norm,
    pullback_state,
    tail_integral,
)
from dnlslab.solver import M11, SIGMA, ModelParams, simulate
from dnlslab.spectral import Field, NormSpec, make_grid, norm

# integral_3^inf s^-1 e^{-2s} ds = E1(6), mpmath at 40 digits
TAIL_M1_2_3 = 0.000360082452162659


def gaussian(grid, amplitude=1.0):
    return Field.from_function(grid, lambda x: amplitude * np.exp(-(x**2) / 2))


@pytest.fixture(scope="module")
def small_run():
    g = make_grid(1, 1024, 128.0)
    traj = simulate(gaussian(g, 0.1), ModelParams(), 8.0, 0.01, monitor_every=0.1, monitors=("L2", "sigma_pullback"))
    return traj


class TestTailIntegral:
    @pytest.mark.parametrize("beta,t", [(1.0, 0.5), (2.0, 3.0), (0.3, 10.0)])
    def test_alpha_zero(self, beta, t):
        assert tail_integral(0.0, beta, t) == pytest.approx(math.exp(-beta * t) / beta, rel=1e-14)

    @pytest.mark.parametrize("beta,t", [(1.0, 0.5), (2.0, 3.0)])
    def test_alpha_one(self, beta, t):
        exact = (t / beta + 1 / beta**2) * math.exp(-beta * t)
        assert tail_integral(1.0, beta, t) == pytest.approx(exact, rel=1e-14)

    def test_exponential_integral(self):
        assert tail_integral(-1.0, 2.0, 3.0) == pytest.approx(TAIL_M1_2_3, rel=1e-13)

    @pytest.mark.parametrize("alpha,beta,t", [(-1.0, 2.0, 3.0), (-0.5, 1.0, 0.2), (-2.5, 4.0, 1.0), (3.0, 1.0, 2.0)])
    def test_matches_quadrature(self, alpha, beta, t):
        ref, _ = quad(lambda s: s**alpha * math.exp(-beta * s), t, np.inf, epsabs=0, epsrel=1e-12)
        assert tail_integral(alpha, beta, t) == pytest.approx(ref, rel=1e-10)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            tail_integral(0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            tail_integral(0.0, 1.0, 0.0)


class TestElemLem:
    def test_alpha_zero_is_constant(self):
        np.testing.assert_allclose(elemlem_check(0.0, 2.0, [1, 5, 40]), 0.5, rtol=1e-13)

    def test_negative_alpha_approaches_limit(self):
        r = elemlem_check(-1.0, 2.0, np.linspace(10, 80, 8))
        assert np.all(np.abs(r * 2.0 - 1) <= 0.05)
        assert np.all(np.diff(r) > 0)

    def test_cubic_closed_form(self):
        t = np.array([1.0, 5.0, 30.0, 79.0])
        np.testing.assert_allclose(elemlem_check(3.0, 1.0, t), 1 + 3 / t + 6 / t**2 + 6 / t**3, rtol=1e-13)

    def test_underflow_uses_asymptotic(self):
        r = elemlem_check(-1.0, 2.0, [400.0, 1000.0])
        np.testing.assert_allclose(r * 2, 1 - 1 / np.array([800.0, 2000.0]), rtol=1e-5)

    @pytest.mark.parametrize("t_grid", [[], [0.0, 1.0], [2.0, 1.0], [[1.0]]])
    def test_rejects_bad_grid(self, t_grid):
        with pytest.raises(ValueError):
            elemlem_check(0.0, 1.0, t_grid)


class TestProfile:
    @pytest.mark.parametrize("amp", [0.1, 1.0])
    def test_gaussian_profile_norm(self, amp):
        # phi_hat = A e^{-xi^2/2}, || |phi_hat|^3 || = A^3 (pi/3)^{1/4}, times 2^{-1}
        g = make_grid(1, 512, 40.0)
        assert profile_norm(gaussian(g, amp), ModelParams()) == pytest.approx(0.5 * amp**3 * (np.pi / 3) ** 0.25, rel=1e-12)

    def test_i2_factorises(self):
        g = make_grid(1, 256, 32.0)
        params = ModelParams(power=5, damping=0.4)
        phi = gaussian(g)
        ratios = [i2_norm(phi, t, params) / tail_integral(-2.0, 1.6, t) for t in (0.5, 2.0, 7.0)]
        np.testing.assert_allclose(ratios, profile_norm(phi, params), rtol=1e-13)

    def test_i2_zero_profile(self):
        g = make_grid(1, 64, 16.0)
        assert i2_norm(Field.zeros(g), 1.0, ModelParams()) == 0.0

    def test_pullback_state(self):
        g = make_grid(1, 128, 24.0)
        f = gaussian(g)
        assert norm(pullback_state(free_propagate(f, 2.0), 2.0) - f, "L2") <= 1e-13


class TestExtract:
    def test_linear_run_recovers_data(self):
        g = make_grid(1, 256, 32.0)
        f = gaussian(g)
        traj = simulate(f, ModelParams(sign=0), 2.0, 0.05, monitor_every=0.5)
        st = extract_phi(traj)
        assert st.cauchy_gap == 0.0
        assert norm(st.phi - f, "L2") <= 1e-14
        assert st.trusted_until == pytest.approx(1.0)

    def test_zero_run(self):
        g = make_grid(1, 64, 16.0)
        st = extract_phi(simulate(Field.zeros(g), ModelParams(), 1.0, 0.1))
        assert (st.cauchy_gap, st.relative_gap) == (0.0, 0.0)

    def test_converged_run(self, small_run):
        st = extract_phi(small_run, SIGMA, tol=1e-6)
        assert st.relative_gap < 1e-6
        assert st.extraction_time == pytest.approx(8.0)
        assert small_run.times[st.half_index] == pytest.approx(4.0)

    def test_short_run_fails(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g, 2.0), ModelParams(damping=0.1), 0.4, 0.01, monitor_every=0.1)
        with pytest.raises(ExtractionError, match="longer"):
            extract_phi(traj, tol=1e-6)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_single_state_fails(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(gaussian(g, 1e60), ModelParams(power=7), 1.0, 0.1, monitors=("L2",))
        with pytest.raises(ExtractionError):
            extract_phi(traj)

    def test_hypothesis_checked(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(gaussian(g, 0.1), ModelParams(power=2), 1.0, 0.1, monitors=("L2",))
        with pytest.raises(HypothesisError):
            extract_phi(traj, M11)
        with pytest.raises(ValueError):
            extract_phi(traj, "H1")


class TestErrorCurve:
    def test_linear_curve_vanishes(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g), ModelParams(sign=0), 2.0, 0.05, monitor_every=0.1)
        curve = error_curve(traj, extract_phi(traj))
        assert np.all(curve.values == 0)
        assert curve.times[-1] == pytest.approx(1.0)

    def test_trust_factor_and_t_min(self, small_run):
        st = extract_phi(small_run)
        curve = error_curve(small_run, st, trust_factor=4.0, t_min=0.5)
        assert curve.times[0] == pytest.approx(0.5)
        assert curve.times[-1] == pytest.approx(2.0)

    def test_decreasing_and_gauge_relation(self, small_run):
        st = extract_phi(small_run)
        curve = error_curve(small_run, st)
        assert np.all(np.diff(curve.values[5:]) < 0)
        u = curve.ungauged(1.0)
        np.testing.assert_allclose(u.values, np.exp(-curve.times) * curve.values, rtol=1e-15)
        with pytest.raises(ValueError):
            u.ungauged(1.0)

    def test_against_i2(self, small_run):
        # E / I2 approaches 1 once the free profile dominates
        st = extract_phi(small_run)
        curve = error_curve(small_run, st).restrict(3.0, 4.0)
        ratio = curve.values / np.array([i2_norm(st.phi, t, small_run.params) for t in curve.times])
        assert np.all(np.abs(ratio - 1) < 0.02)

    def test_foreign_phi_matches_direct_difference(self, small_run):
        st = extract_phi(small_run)
        foreign = ScatteringState(st.phi, st.extraction_time, 0.0, 0.0, SIGMA, len(small_run) + 5, 0)
        curve = error_curve(small_run, foreign, "H1")
        i = small_run.index_of(2.0)
        direct = norm(small_run.state(i) - free_propagate(st.phi, 2.0), "H1")
        j = int(np.argmin(np.abs(curve.times - 2.0)))
        assert curve.values[j] == pytest.approx(direct, rel=1e-6)

    @pytest.mark.parametrize("spec", ["L2", "H1", "FH1", "Sigma", "Linf"])
    def test_norm_choices(self, small_run, spec):
        st = extract_phi(small_run)
        curve = error_curve(small_run, st, spec)
        assert curve.norm_spec == NormSpec.parse(spec)
        assert np.all(np.isfinite(curve.values))

    def test_validation(self):
        with pytest.raises(ValueError):
            ErrorCurve(np.arange(3.0), np.ones(2), NormSpec("L2"))
        with pytest.raises(ValueError):
            ErrorCurve(np.arange(3.0), -np.ones(3), NormSpec("L2"))


def synthetic(C, gamma, delta, times):
    t = np.asarray(times, dtype=float)
    return ErrorCurve(t, C * t**-gamma * np.exp(-delta * t), NormSpec("L2"))


class TestFitRate:
    def test_exact_recovery(self):
        fit = fit_rate(synthetic(2.0, 1.0, 2.0, np.linspace(1, 10, 91)), (5.0, 8.0))
        assert (fit.C, fit.gamma, fit.delta) == (pytest.approx(2.0, rel=1e-10), pytest.approx(1.0, rel=1e-10), pytest.approx(2.0, rel=1e-10))
        assert fit.samples == 31
        assert fit.max_log_misfit(synthetic(2.0, 1.0, 2.0, np.linspace(1, 10, 91))) < 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.5, 3), delta=st.floats(0.5, 4))
    def test_noisy_recovery(self, seed, gamma, delta):
        rng = np.random.default_rng(seed)
        t = np.linspace(10, 20, 101)
        clean = synthetic(1.0, gamma, delta, t)
        noisy = ErrorCurve(t, clean.values * np.exp(1e-3 * rng.standard_normal(t.size)), clean.norm_spec)
        fit = fit_rate(noisy, (10.0, 20.0))
        assert abs(fit.gamma - gamma) <= 0.05 * gamma

    def test_default_window(self):
        fit = fit_rate(synthetic(1.0, 1.0, 1.0, np.linspace(0.1, 10, 100)))
        assert fit.window == (pytest.approx(4.0), pytest.approx(10.0))

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="at least"):
            fit_rate(synthetic(1.0, 1.0, 1.0, np.linspace(1, 10, 10)), (5.0, 8.0))

    def test_nonpositive_values(self):
        c = ErrorCurve(np.linspace(1, 10, 91), np.zeros(91), NormSpec("L2"))
        with pytest.raises(ValueError, match="nonpositive"):
            fit_rate(c, (5.0, 8.0))

    @pytest.mark.parametrize("window", [(0.0, 5.0), (5.0, 5.0), (8.0, 5.0)])
    def test_bad_window(self, window):
        with pytest.raises(ValueError):
            fit_rate(synthetic(1.0, 1.0, 1.0, np.linspace(1, 10, 91)), window)

    def test_empty(self):
        with pytest.raises(ValueError):
            fit_rate(ErrorCurve(np.array([]), np.array([]), NormSpec("L2")))

    def test_sandwich_onset(self):
        t = np.linspace(0, 10, 101)
        values = 2.0 * np.exp(-t) / np.maximum(t, 1e-9)
        values[t < 3 - 1e-9] *= 1.5
        curve = ErrorCurve(t, values, NormSpec("L2"))
        fit = fit_rate(curve, (5.0, 8.0))
        assert fit.sandwich_onset(curve, tol=0.1) == pytest.approx(3.0)
        assert fit.sandwich_onset(curve, tol=0.5) == pytest.approx(0.1)
        worse = ErrorCurve(t, np.where(t > 7.95, 2 * values, values), NormSpec("L2"))
        assert fit.sandwich_onset(worse, tol=0.1) is None
