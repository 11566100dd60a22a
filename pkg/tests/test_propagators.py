import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnlslab.propagators import (
    BoxEscapeError,
    dilation_prefactor,
    dispersive_ratio,
    free_propagate,
    mdfm_consistency,
    mdfm_propagate,
    trig_interpolate,
)
from dnlslab.spectral import FREQUENCY, Field, fourier_transform, make_grid, norm


def gaussian(grid, width=1.0):
    return Field.from_function(grid, lambda x: np.exp(-(x**2) / (2 * width**2)))


def band_limited(grid, rng, keep=0.2):
    spec = np.zeros(grid.shape, dtype=complex)
    mask = np.abs(np.fft.fftfreq(grid.points_per_axis)) < keep / 2
    spec[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    # smooth taper keeps the data well inside the box
    x = grid.axis
    env = np.exp(-(x**2) / (2 * (0.08 * grid.box_length) ** 2))
    return Field(grid, env * np.fft.ifft(spec))


def exact_free_gaussian(x, t):
    """e^{itD} e^{-x^2/2} = (1 + 2it)^{-1/2} exp(-x^2 / (2 (1 + 2it)))."""
    z = 1 + 2j * t
    return z**-0.5 * np.exp(-(x**2) / (2 * z))


class TestFreePropagate:
    def test_zero_time_is_identity(self):
        g = make_grid(1, 64, 16.0)
        f = gaussian(g)
        assert free_propagate(f, 0.0) is f

    @pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
    def test_matches_closed_form_gaussian(self, t):
        g = make_grid(1, 1024, 128.0)
        out = free_propagate(gaussian(g), t)
        ref = exact_free_gaussian(g.axis, t)
        assert np.linalg.norm(out.samples - ref) / np.linalg.norm(ref) <= 1e-8

    def test_requires_physical(self):
        g = make_grid(1, 32, 8.0)
        with pytest.raises(ValueError):
            free_propagate(fourier_transform(gaussian(g)), 1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), t=st.floats(-50, 50, allow_nan=False))
    def test_unitary(self, seed, t):
        rng = np.random.default_rng(seed)
        g = make_grid(1, 128, 20.0)
        f = Field(g, rng.normal(size=128) + 1j * rng.normal(size=128))
        assert abs(norm(free_propagate(f, t), "L2") - norm(f, "L2")) <= 1e-12 * norm(f, "L2")

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), s=st.floats(-5, 5), t=st.floats(-5, 5))
    def test_group_law(self, seed, s, t):
        rng = np.random.default_rng(seed)
        g = make_grid(1, 128, 20.0)
        f = Field(g, rng.normal(size=128) + 1j * rng.normal(size=128))
        a = free_propagate(free_propagate(f, s), t)
        b = free_propagate(f, s + t)
        assert norm(a - b, "L2") <= 1e-11 * norm(f, "L2")

    def test_time_reversal(self):
        g = make_grid(2, 32, 10.0)
        f = Field.from_function(g, lambda x, y: np.exp(-(x**2 + 2 * y**2)) * (1 + 1j * x))
        back = free_propagate(free_propagate(f, 3.7), -3.7)
        assert norm(back - f, "L2") <= 1e-12 * norm(f, "L2")


class TestMDFM:
    def test_prefactor_branch(self):
        assert dilation_prefactor(1, 0.5) == pytest.approx(np.exp(-0.25j * np.pi))
        # (2it)^{-n/2} on the principal branch
        for n in (1, 2, 3):
            assert dilation_prefactor(n, 2.0) == pytest.approx((2j * 2.0) ** (-n / 2))

    def test_zero_field(self):
        g = make_grid(1, 64, 16.0)
        out = mdfm_propagate(Field.zeros(g), 1.0)
        assert np.all(out.samples == 0)

    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_rejects_nonpositive_time(self, t):
        g = make_grid(1, 64, 16.0)
        with pytest.raises(ValueError):
            mdfm_propagate(gaussian(g), t)

    def test_dilation_preserves_l2(self):
        g = make_grid(1, 1024, 64.0)
        f = gaussian(g)
        for t in (0.5, 1.0, 2.0):
            assert abs(mdfm_propagate(f, t).l2_norm() - norm(f, "L2")) <= 1e-8 * norm(f, "L2")

    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_consistency_with_multiplier(self, t):
        g = make_grid(1, 1024, 64.0)
        f = gaussian(g)
        assert mdfm_consistency(f, t) <= 1e-8 * norm(f, "L2")

    def test_consistency_two_dims(self):
        g = make_grid(2, 128, 24.0)
        f = Field.from_function(g, lambda x, y: np.exp(-(x**2 + y**2) / 2) * (1 + 0.5j * y))
        assert mdfm_consistency(f, 0.5) <= 1e-8 * norm(f, "L2")

    def test_zero_field_consistency(self):
        g = make_grid(1, 256, 32.0)
        assert mdfm_consistency(Field.zeros(g), 1.0) == 0.0

    def test_box_escape_is_an_error(self):
        # spectrum up to |xi| ~ 10 dilates to |x| ~ 20 t, far outside L/2 = 8
        g = make_grid(1, 256, 16.0)
        f = gaussian(g, width=0.2)
        with pytest.raises(BoxEscapeError):
            mdfm_consistency(f, 5.0)

    def test_chirp_resolution_precondition(self):
        g = make_grid(1, 64, 64.0)
        with pytest.raises(ValueError):
            mdfm_consistency(gaussian(g), 0.5 * g.spacing**2 / (4 * np.pi))

    def test_modulus_approaches_fourier_profile(self):
        # |e^{itD} f (2t xi)| (2t)^{1/2} -> |f^(xi)| as t grows
        g = make_grid(1, 1024, 64.0)
        f = gaussian(g)
        fhat = np.abs(fourier_transform(f).samples)
        errs = []
        for t in (1.0, 4.0, 16.0):
            d = mdfm_propagate(f, t)
            approx = np.abs(d.samples) * np.sqrt(2 * t)
            errs.append(np.linalg.norm(approx - fhat) / np.linalg.norm(fhat))
        assert errs[0] > errs[1] > errs[2]

    def test_trig_interpolate_reproduces_samples(self):
        g = make_grid(1, 128, 20.0)
        f = gaussian(g)
        np.testing.assert_allclose(trig_interpolate(f, g.axis), f.samples, atol=1e-13)


class TestDispersive:
    def test_zero_field_rejected(self):
        g = make_grid(1, 64, 16.0)
        with pytest.raises(ValueError):
            dispersive_ratio(Field.zeros(g), 1.0)

    def test_gaussian_at_t10(self):
        # sup |e^{itD} f| = (1 + 4t^2)^{-1/4} and ||f||_1 = sqrt(2 pi), so the
        # ratio is sqrt(2t) (1 + 4t^2)^{-1/4}
        g = make_grid(1, 4096, 512.0)
        r = dispersive_ratio(gaussian(g), 10.0)
        assert r == pytest.approx(np.sqrt(20) / 401**0.25, rel=1e-9)
        assert r <= 1

    def test_bounded_uniformly_in_time(self):
        g = make_grid(1, 16384, 4096.0)
        f = gaussian(g)
        ratios = [dispersive_ratio(f, t) for t in (1, 2, 5, 10, 20, 50, 100)]
        assert max(ratios) <= 1.0 + 1e-9
        # and approaches the sharp constant from below
        assert ratios[-1] > ratios[0]

    def test_random_family(self):
        rng = np.random.default_rng(11)
        g = make_grid(1, 16384, 4096.0)
        worst = 0.0
        for _ in range(20):
            f = band_limited(make_grid(1, 512, 128.0), rng)
            # embed the compact data in the large box by zero padding
            big = np.zeros(g.shape, dtype=complex)
            x = g.axis
            inside = np.abs(x) < 64
            big[inside] = np.interp(x[inside], f.grid.axis, f.samples.real) + 1j * np.interp(
                x[inside], f.grid.axis, f.samples.imag
            )
            F = Field(g, big)
            for t in (1, 2, 5, 10, 50):
                worst = max(worst, dispersive_ratio(F, t))
        assert worst <= 1.05

    def test_frequency_field_rejected_by_propagator(self):
        g = make_grid(1, 64, 16.0)
        with pytest.raises(ValueError):
            free_propagate(Field(g, np.ones(64), FREQUENCY), 1.0)
