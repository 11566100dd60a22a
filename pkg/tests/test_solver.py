import math

import numpy as np
import pytest
from scipy.integrate import quad

from dnlslab import HypothesisError
from dnlslab.propagators import free_propagate
from dnlslab.solver import (
    M11,
    SIGMA,
    ModelParams,
    decay_check,
    fit_contraction,
    phase_weight,
    picard_iterate,
    simulate,
    strang_step,
)
from dnlslab.spectral import Field, make_grid, norm


def gaussian(grid, amplitude=1.0, width=1.0):
    return Field.from_function(grid, lambda *x: amplitude * np.exp(-sum(c**2 for c in x) / (2 * width**2)))


def rk4_ungauged(u0, params, T, dt):
    """Independent oracle: integrating-factor RK4 for i u_t + D u + i a u = mu |u|^{p-1} u."""
    g = u0.grid
    xi2 = g.fft_xi_sq
    a, mu, q = params.damping, params.sign, params.power - 1

    def rhs(t, w):
        u = np.fft.ifft(np.exp(-1j * t * xi2) * w)
        return -np.exp(1j * t * xi2) * np.fft.fft(a * u + 1j * mu * np.abs(u) ** q * u)

    w = np.fft.fft(u0.samples)
    t = 0.0
    for _ in range(int(round(T / dt))):
        k1 = rhs(t, w)
        k2 = rhs(t + dt / 2, w + dt / 2 * k1)
        k3 = rhs(t + dt / 2, w + dt / 2 * k2)
        k4 = rhs(t + dt, w + dt * k3)
        w = w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return np.fft.ifft(np.exp(-1j * t * xi2) * w)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.dim, p.power, p.damping, p.sign) == (1, 3.0, 1.0, 1)
        assert p.margin == pytest.approx(0.01)

    def test_rates(self):
        p = ModelParams(dim=2, power=3, damping=0.5, margin=0.1)
        assert p.nonlinear_rate == pytest.approx(1.0)
        assert p.algebraic_rate == pytest.approx(2.0)
        assert p.assumption_rate == pytest.approx((1.5 + 0.1) / 5)

    @pytest.mark.parametrize(
        "kwargs",
        [{"dim": 0}, {"dim": 1.5}, {"power": 1.0}, {"power": 0.5}, {"damping": 0.0},
         {"damping": -1.0}, {"sign": 2}, {"margin": -0.1}],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)

    @pytest.mark.parametrize("dim,power", [(1, 3), (2, 5), (3, 7)])
    def test_odd_powers_admissible_in_both_modes(self, dim, power):
        p = ModelParams(dim=dim, power=power)
        p.check_mode(M11)
        p.check_mode(SIGMA)

    @pytest.mark.parametrize("power", [2, 4, 2.5])
    def test_m11_needs_odd_integer(self, power):
        with pytest.raises(HypothesisError, match="odd integer"):
            ModelParams(power=power).check_mode(M11)

    def test_sigma_threshold(self):
        # [n/2] + 1 = 2 in three dimensions
        ModelParams(dim=3, power=2.5).check_mode(SIGMA)
        with pytest.raises(HypothesisError):
            ModelParams(dim=3, power=2).check_mode(SIGMA)
        ModelParams(dim=1, power=2).check_mode(SIGMA)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            ModelParams().check_mode("H1")


class TestStrangStep:
    @pytest.mark.parametrize("t,dt,c", [(0.0, 0.1, 2.0), (3.0, 1e-3, 2.0), (1.0, 0.5, 0.3)])
    def test_phase_weight_matches_quadrature(self, t, dt, c):
        params = ModelParams(power=3, damping=c / 2)
        ref, _ = quad(lambda s: math.exp(-c * s), t, t + dt, epsabs=0, epsrel=1e-13)
        assert phase_weight(t, dt, params) == pytest.approx(ref, rel=1e-14)

    def test_zero_field(self):
        g = make_grid(1, 64, 16.0)
        out = strang_step(Field.zeros(g), 0.0, 0.1, ModelParams())
        assert np.all(out.samples == 0)

    def test_linear_step_is_free_propagation(self):
        g = make_grid(1, 64, 16.0)
        f = gaussian(g)
        a = strang_step(f, 0.0, 0.1, ModelParams(sign=0))
        b = free_propagate(f, 0.1)
        assert norm(a - b, "L2") <= 1e-14

    @pytest.mark.parametrize("sign", [1, -1])
    def test_conserves_gauged_mass(self, sign):
        g = make_grid(2, 32, 12.0)
        f = gaussian(g, amplitude=2.0)
        out = strang_step(f, 0.3, 0.05, ModelParams(dim=2, sign=sign))
        assert norm(out, "L2") == pytest.approx(norm(f, "L2"), rel=1e-13)

    def test_rejects_bad_dt(self):
        g = make_grid(1, 16, 4.0)
        with pytest.raises(ValueError):
            strang_step(gaussian(g), 0.0, 0.0, ModelParams())


class TestSimulate:
    def test_zero_data(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(Field.zeros(g), ModelParams(), 1.0, 0.01, monitor_every=0.1)
        assert len(traj) == 11
        assert np.all(traj.samples == 0)
        for series in traj.monitors.values():
            assert np.all(series == 0)

    def test_linear_mass_decays_exponentially(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g), ModelParams(sign=0, damping=0.7), 2.0, 0.01, monitors=("L2",))
        m0 = norm(gaussian(g), "L2")
        for i, t in enumerate(traj.times):
            assert traj.monitors["L2"][i] == pytest.approx(m0, rel=1e-13)
            assert norm(traj.ungauged(i), "L2") == pytest.approx(m0 * math.exp(-0.7 * t), rel=1e-13)

    def test_linear_pullback_is_constant(self):
        g = make_grid(1, 128, 24.0)
        f = gaussian(g)
        traj = simulate(f, ModelParams(sign=0), 1.0, 0.05, monitor_every=0.25)
        for i in range(len(traj)):
            assert norm(traj.pullback(i) - f, "L2") <= 1e-14

    def test_matches_repeated_strang_steps(self):
        g = make_grid(1, 128, 24.0)
        params = ModelParams(power=3)
        v = gaussian(g, amplitude=1.5)
        traj = simulate(v, params, 0.5, 0.01, monitor_every=0.5, monitors=("L2",))
        for j in range(50):
            v = strang_step(v, j * 0.01, 0.01, params)
        assert norm(traj.state(-1) - v, "L2") <= 1e-12 * norm(v, "L2")

    @pytest.mark.parametrize("sign,power", [(1, 3), (-1, 3), (1, 5)])
    def test_gauge_against_ungauged_oracle(self, sign, power):
        g = make_grid(1, 128, 32.0)
        params = ModelParams(power=power, damping=0.5, sign=sign)
        u0 = gaussian(g, amplitude=1.0)
        traj = simulate(u0, params, 1.0, 1e-3, monitor_every=1.0, monitors=("L2",))
        ref = rk4_ungauged(u0, params, 1.0, 1e-3)
        err = np.linalg.norm(traj.ungauged(-1).samples - ref) / np.linalg.norm(ref)
        assert err <= 1e-5

    def test_second_order(self):
        g = make_grid(1, 128, 32.0)
        params = ModelParams(power=3, damping=0.5)
        u0 = gaussian(g)
        finals = [simulate(u0, params, 1.0, dt, monitor_every=1.0, monitors=("L2",)).state(-1) for dt in (0.04, 0.02, 0.01)]
        ratio = norm(finals[0] - finals[1], "L2") / norm(finals[1] - finals[2], "L2")
        assert 3.6 <= ratio <= 4.4

    def test_free_decay_monitor_bounded(self):
        # ||u||_inf <t>^{1/2} e^{at} stays bounded for small data
        g = make_grid(1, 2048, 256.0)
        traj = simulate(gaussian(g, 0.1), ModelParams(), 8.0, 0.01, monitor_every=0.5, monitors=("Linf",))
        scaled = traj.monitors["Linf"] * (1 + traj.times**2) ** 0.25
        assert scaled.max() <= 1.1 * scaled[0]

    def test_time_reversal_linear(self):
        g = make_grid(1, 128, 24.0)
        f = gaussian(g)
        fwd = simulate(f, ModelParams(sign=0), 1.0, 0.1, monitor_every=1.0, monitors=("L2",)).state(-1)
        assert norm(free_propagate(fwd, -1.0) - f, "L2") <= 1e-13

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_abort_on_overflow(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(gaussian(g, amplitude=1e60), ModelParams(power=7), 1.0, 0.01, monitors=("L2",))
        assert traj.aborted
        assert traj.last_good_time == 0.0
        assert len(traj) == 1

    @pytest.mark.parametrize(
        "kwargs",
        [{"T": 1.05, "dt": 0.1}, {"T": 1.0, "dt": 0.03}, {"T": 0.0, "dt": 0.1}, {"T": 1.0, "dt": -0.1},
         {"T": 1.0, "dt": 0.1, "monitors": ("H7",)}],
    )
    def test_rejects_invalid(self, kwargs):
        g = make_grid(1, 32, 8.0)
        with pytest.raises(ValueError):
            simulate(gaussian(g), ModelParams(), **kwargs)

    def test_monitors_and_lookup(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g, 0.2), ModelParams(), 1.0, 0.01, monitor_every=0.2)
        assert set(traj.monitors) == {"L2", "Linf", "Hs", "sigma_pullback", "M11"}
        assert traj.index_of(0.6) == 3
        assert traj.final_time == pytest.approx(1.0)
        with pytest.raises(KeyError):
            traj.index_of(0.5)
        with pytest.raises(ValueError):
            traj.samples[0, 0] = 1.0


class TestFitContraction:
    def test_geometric(self):
        factor, steps = fit_contraction(np.array([1.0, 0.5, 0.25, 0.125]), 1e-12)
        assert factor == pytest.approx(0.5)
        assert steps == 3

    def test_stops_at_floor(self):
        factor, steps = fit_contraction(np.array([1.0, 0.1, 0.01, 1e-17, 2e-17]), 1e-15)
        assert (factor, steps) == (pytest.approx(0.1), 2)

    def test_growth(self):
        factor, steps = fit_contraction(np.array([1.0, 3.0, 9.0]), 1e-12)
        assert factor == pytest.approx(3.0)
        assert steps == 0

    def test_zero(self):
        assert fit_contraction(np.zeros(4), 0.0) == (0.0, 0)


class TestPicard:
    def test_zero_data(self):
        g = make_grid(1, 32, 8.0)
        rep = picard_iterate(Field.zeros(g), ModelParams(), 3, 1.0, 0.1)
        assert np.all(rep.residuals == 0)
        assert rep.contraction_factor == 0.0

    def test_linear_converges_in_one_step(self):
        g = make_grid(1, 64, 16.0)
        rep = picard_iterate(gaussian(g), ModelParams(sign=0), 3, 1.0, 0.1)
        assert np.all(rep.residuals == 0)

    def test_small_data_contracts(self):
        g = make_grid(1, 128, 32.0)
        rep = picard_iterate(gaussian(g, 0.1), ModelParams(), 5, 2.0, 0.02)
        assert not rep.diverged
        assert rep.contraction_factor < 0.05
        assert rep.geometric_steps >= 3

    def test_fixed_point_matches_simulation(self):
        g = make_grid(1, 256, 32.0)
        params = ModelParams()
        u0 = gaussian(g, 0.5)
        rep = picard_iterate(u0, params, 10, 1.0, 0.005, snapshot_times=[0.5, 1.0])
        traj = simulate(u0, params, 1.0, 1e-3, monitor_every=0.5, monitors=("L2",))
        for t in (0.5, 1.0):
            a = rep.iterate(-1, t)
            b = traj.state(traj.index_of(t))
            assert norm(a - b, "L2") <= 1e-4 * norm(b, "L2")

    def test_rejects_invalid(self):
        g = make_grid(1, 32, 8.0)
        with pytest.raises(ValueError):
            picard_iterate(gaussian(g), ModelParams(), 1, 1.0, 0.1)
        with pytest.raises(ValueError):
            picard_iterate(gaussian(g), ModelParams(), 3, 1.0, 0.1, snapshot_times=[0.55])
        with pytest.raises(ValueError):
            picard_iterate(gaussian(g), ModelParams(), 3, 1.0, 0.1, working_norm="M11")
        rep = picard_iterate(gaussian(g, 0.1), ModelParams(), 2, 1.0, 0.1)
        with pytest.raises(KeyError):
            rep.iterate(0, 0.5)

    @pytest.mark.parametrize("working_norm", ["Hs", "Sigma"])
    def test_other_working_norms(self, working_norm):
        g = make_grid(1, 64, 16.0)
        rep = picard_iterate(gaussian(g, 0.1), ModelParams(), 3, 1.0, 0.05, working_norm=working_norm)
        assert rep.working_norm == working_norm
        assert rep.contraction_factor < 0.05


class TestDecayCheck:
    def test_linear_sigma_ratio_is_constant(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g), ModelParams(sign=0), 2.0, 0.05, monitor_every=0.5)
        rep = decay_check(traj, SIGMA)
        np.testing.assert_allclose(rep.ratio, rep.ratio[0], rtol=1e-13)
        assert rep.growth(0.0, 2.0) == pytest.approx(0.0, abs=1e-13)

    def test_zero_run(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(Field.zeros(g), ModelParams(), 1.0, 0.1)
        for mode in (M11, SIGMA):
            rep = decay_check(traj, mode)
            assert rep.sup == 0.0
            assert rep.growth(0.0, 1.0) == 0.0

    def test_assumption_envelope_and_window(self):
        g = make_grid(1, 256, 32.0)
        traj = simulate(gaussian(g, 0.1), ModelParams(), 2.0, 0.05, monitor_every=0.5)
        rep = decay_check(traj, M11, envelope="assumption", window=(1.0, 2.0))
        np.testing.assert_allclose(rep.times, [1.0, 1.5, 2.0])
        assert np.all(np.diff(rep.running_sup) >= 0)

    def test_errors(self):
        g = make_grid(1, 64, 16.0)
        traj = simulate(gaussian(g), ModelParams(), 1.0, 0.1, monitors=("L2",))
        with pytest.raises(ValueError):
            decay_check(traj, M11)
        with pytest.raises(ValueError):
            decay_check(traj, SIGMA)
        with pytest.raises(ValueError):
            decay_check(traj, "H1")
        full = simulate(gaussian(g), ModelParams(), 1.0, 0.1)
        with pytest.raises(ValueError):
            decay_check(full, M11, envelope="strict")
