"""Short-time Fourier transform on a periodic grid and M^{1,1} estimates.

The M^{1,1} norm is approximated by a Riemann sum of |V_g f| over a
time-frequency lattice. No frame bounds are computed, so values are only
meaningful as ratios and regressions for a fixed window and lattice.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._validation import is_odd_integer
from .spectral import (
    FREQUENCY,
    PHYSICAL,
    Field,
    Grid,
    NormSpec,
    forward_samples,
    inverse_samples,
    norm,
)

GAUSSIAN = "gaussian"
BUMP = "band_limited_bump"

_SPHERE_AREA = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


class CoverageError(ValueError):
    """The lattice misses a non-negligible part of the field's energy."""


def bump_profile(r: np.ndarray, radius: float) -> np.ndarray:
    """exp(-1/(1 - (r/radius)^2)) for r < radius, zero outside."""
    r = np.asarray(r, dtype=float)
    s = (r / radius) ** 2
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return out


def _radial_integral(func, radius: float, dim: int) -> float:
    """integral over |xi| < radius in R^dim of func(|xi|)."""
    val, _ = integrate.quad(
        lambda rho: func(rho) * rho ** (dim - 1), 0.0, radius, epsabs=0.0, epsrel=1e-13, limit=200
    )
    return _SPHERE_AREA[dim] * val


@functools.lru_cache(maxsize=32)
def _bump_l2(radius: float, dim: int) -> float:
    return math.sqrt(_radial_integral(lambda r: bump_profile(r, radius) ** 2, radius, dim))


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window: a Gaussian of width ``scale`` or a band-limited bump.

    For the bump, ``scale`` is the radius of the Fourier support. Windows are
    normalised to unit L^2 norm.
    """

    shape: str
    scale: float

    def __post_init__(self):
        if self.shape not in (GAUSSIAN, BUMP):
            raise ValueError(f"unknown window shape {self.shape!r}")
        if not self.scale > 0:
            raise ValueError("window scale must be positive")

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> WindowSpec:
        return cls(GAUSSIAN, float(sigma))

    @classmethod
    def band_limited_bump(cls, radius: float = 0.25) -> WindowSpec:
        return cls(BUMP, float(radius))

    def bump_l2(self, dim: int) -> float:
        """L^2 norm of the unnormalised bump profile, by quadrature."""
        return _bump_l2(self.scale, dim)

    def spectrum(self, grid: Grid, shift: np.ndarray | None = None) -> np.ndarray:
        """Continuum-normalised spectrum on the dual grid of the window
        (bump only), optionally with its centre moved to frequency ``shift``."""
        if self.shape != BUMP:
            raise ValueError("only the bump window is defined through its spectrum")
        coords = grid.dual_coords()
        r2 = 0.0
        for ax, c in enumerate(coords):
            off = 0.0 if shift is None else shift[ax]
            r2 = r2 + (c - off) ** 2
        prof = bump_profile(np.sqrt(np.broadcast_to(r2, grid.shape)), self.scale)
        return prof / self.bump_l2(grid.dim)

    def samples(self, grid: Grid) -> np.ndarray:
        """The window centred at the origin, periodised on ``grid``."""
        if self.shape == GAUSSIAN:
            sig = self.scale
            g = np.exp(-grid.x_sq / (2.0 * sig**2)) * (np.pi * sig**2) ** (-grid.dim / 4)
            return g.astype(complex)
        return inverse_samples(grid, self.spectrum(grid))

    def natural_step(self) -> float:
        """Lattice step that resolves the window's spatial scale."""
        return 0.5 * self.scale if self.shape == GAUSSIAN else 0.5 / self.scale


@dataclass(frozen=True)
class TFLattice:
    """Time-frequency sampling lattice; extents are half-widths."""

    x_step: float
    xi_step: float
    x_extent: float
    xi_extent: float

    def __post_init__(self):
        for name in ("x_step", "xi_step", "x_extent", "xi_extent"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def for_grid(
        cls, grid: Grid, window: WindowSpec | None = None, *, xi_stride: int | None = None
    ) -> TFLattice:
        """Lattice over the whole box and the whole dual grid.

        Frequencies are taken every ``xi_stride`` dual points. By default the
        stride is the largest power of two that still leaves a segment of
        ``SEGMENT_WIDTHS`` window widths (Gaussian windows in 1-D), which
        enables the segmented fast path of :func:`m11_norm`; otherwise 1.
        """
        window = window or WindowSpec.gaussian()
        if xi_stride is None:
            xi_stride = _auto_stride(grid, window)
        return cls(
            x_step=min(window.natural_step(), 0.5 * grid.box_length),
            xi_step=grid.dual_spacing * xi_stride,
            x_extent=0.5 * grid.box_length,
            xi_extent=grid.dual_spacing * grid.points_per_axis / 2,
        )

    def centers(self, grid: Grid) -> np.ndarray:
        half = 0.5 * grid.box_length
        if self.x_extent >= half:
            count = max(1, int(round(grid.box_length / self.x_step)))
            return -half + self.x_step * np.arange(count)
        m = int(math.floor(self.x_extent / self.x_step + 1e-9))
        return self.x_step * np.arange(-m, m + 1)


#: Segment length, in Gaussian window widths, below which the window is
#: treated as vanishing (exp(-SEGMENT_WIDTHS**2 / 8) ~ 1e-31 at the edge).
SEGMENT_WIDTHS = 24.0


def _auto_stride(grid: Grid, window: WindowSpec) -> int:
    if window.shape != GAUSSIAN or grid.dim != 1:
        return 1
    m = 1
    N = grid.points_per_axis
    while N % (2 * m) == 0 and grid.box_length / (2 * m) >= SEGMENT_WIDTHS * window.scale:
        m *= 2
    return m


def _outside_fraction(a2: np.ndarray, axis: np.ndarray, extent: float, dim: int) -> float:
    total = a2.sum()
    if total == 0:
        return 0.0
    inside = np.ones(a2.shape, dtype=bool)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        inside &= (np.abs(axis) <= extent + 1e-12).reshape(shape)
    return float(a2[~inside].sum() / total)


def _shifted_windows(window: WindowSpec, grid: Grid, centers: np.ndarray) -> np.ndarray:
    """Stack of periodised windows g(x - c) for centres ``c`` (shape (k, dim))."""
    L = grid.box_length
    if window.shape == GAUSSIAN:
        sig = window.scale
        g1 = []
        for ax in range(grid.dim):
            d = (grid.axis[None, :] - centers[:, ax : ax + 1] + 0.5 * L) % L - 0.5 * L
            g1.append(np.exp(-(d**2) / (2.0 * sig**2)) * (np.pi * sig**2) ** (-0.25))
        out = g1[0]
        for ax in range(1, grid.dim):
            out = out[..., None] * g1[ax].reshape((g1[ax].shape[0],) + (1,) * ax + (-1,))
        return out
    base = window.spectrum(grid)
    coords = grid.dual_coords()
    stack = []
    for c in centers:
        phase = 0.0
        for ax in range(grid.dim):
            phase = phase + c[ax] * coords[ax]
        stack.append(inverse_samples(grid, base * np.exp(-1j * phase)))
    return np.array(stack)


def stft_magnitude(f: Field, window: WindowSpec, centers: np.ndarray) -> np.ndarray:
    """|V_g f(c, xi_k)| for each centre ``c`` (rows) over the dual grid, FFT order."""
    g = f.grid
    axes = tuple(range(-g.dim, 0))
    wins = _shifted_windows(window, g, np.atleast_2d(centers).reshape(-1, g.dim))
    scale = g.cell_volume / (2.0 * np.pi) ** (g.dim / 2)
    return np.abs(np.fft.fftn(np.conj(wins) * f.samples, axes=axes)) * scale


def m11_norm(
    f: Field,
    window: WindowSpec | None = None,
    lattice: TFLattice | None = None,
    *,
    coverage_tol: float = 1e-8,
    chunk: int | None = None,
) -> float:
    """Lattice Riemann sum of |V_g f| approximating ||f||_{M^{1,1}}.

    The STFT is taken on the periodic box (windows wrap around), one FFT per
    lattice column. Raises :class:`CoverageError` when more than
    ``coverage_tol`` of the energy of f (or of f^) falls outside the lattice.
    """
    if f.space != PHYSICAL:
        raise ValueError("m11_norm needs a physical-space field")
    g = f.grid
    window = window or WindowSpec.gaussian()
    lattice = lattice or TFLattice.for_grid(g, window)

    stride = lattice.xi_step / g.dual_spacing
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise ValueError("xi_step must be a positive integer multiple of the dual spacing")
    stride = int(round(stride))

    a2 = np.abs(f.samples) ** 2
    if a2.sum() == 0:
        return 0.0
    out_x = _outside_fraction(a2, g.axis, lattice.x_extent, g.dim)
    spec2 = np.abs(forward_samples(g, f.samples)) ** 2
    out_xi = _outside_fraction(spec2, g.dual_axis, lattice.xi_extent, g.dim)
    if max(out_x, out_xi) > coverage_tol:
        raise CoverageError(
            f"lattice misses {out_x:.2e} of the energy in x and {out_xi:.2e} in xi"
        )

    k = np.rint(g.fft_axis / g.dual_spacing).astype(int)
    keep1 = (k % stride == 0) & (np.abs(g.fft_axis) <= lattice.xi_extent + 1e-12)
    keep = keep1
    for _ in range(1, g.dim):
        keep = keep[..., None] & keep1

    c1 = lattice.centers(g)
    if (
        g.dim == 1
        and window.shape == GAUSSIAN
        and stride > 1
        and g.points_per_axis % stride == 0
        and g.box_length / stride >= SEGMENT_WIDTHS * window.scale
    ):
        return _m11_segmented(f, window, lattice, c1, stride)
    grids = np.meshgrid(*([c1] * g.dim), indexing="ij")
    centers = np.stack([m.ravel() for m in grids], axis=1)
    if chunk is None:
        chunk = max(1, int(2**22 // g.size))
    total = 0.0
    for i in range(0, len(centers), chunk):
        mag = stft_magnitude(f, window, centers[i : i + chunk])
        total += float(mag[:, keep].sum())
    return total * (lattice.x_step * lattice.xi_step) ** g.dim


def _m11_segmented(f, window, lattice, centers, stride):
    """1-D Gaussian-window fast path.

    The windowed signal vanishes (to double precision) outside a periodic
    segment of length L/stride around each centre, so an FFT of that segment
    returns exactly the full-grid STFT at every ``stride``-th frequency.
    """
    g = f.grid
    N = g.points_per_axis
    n_seg = N // stride
    dx = g.spacing
    L = g.box_length
    offsets = np.arange(-(n_seg // 2), n_seg // 2)
    xi_seg = 2.0 * np.pi * np.fft.fftfreq(n_seg, dx)
    keep = np.abs(xi_seg) <= lattice.xi_extent + 1e-12
    sig = window.scale
    norm_w = (np.pi * sig**2) ** (-0.25)
    scale = dx / np.sqrt(2.0 * np.pi)
    total = 0.0
    chunk = max(1, 2**22 // n_seg)
    for i in range(0, len(centers), chunk):
        c = centers[i : i + chunk, None]
        j0 = np.rint((c + 0.5 * L) / dx).astype(int)
        idx = (j0 + offsets) % N
        d = (g.axis[idx] - c + 0.5 * L) % L - 0.5 * L
        win = norm_w * np.exp(-(d**2) / (2.0 * sig**2))
        mag = np.abs(np.fft.fft(win * f.samples[idx], axis=1)) * scale
        total += float(mag[:, keep].sum())
    return total * lattice.x_step * lattice.xi_step


# ---------------------------------------------------------------------------
# Counterexample family f_N = phi(x) sum_{k<=N} k^{-3/2} e^{i k x_1}


def counterexample_field(N_terms: int, bump: WindowSpec | None, grid: Grid) -> Field:
    """Partial sum f_N on ``grid``, built exactly through its spectrum.

    phi has Fourier transform equal to the (unit L^2) bump, so
    f_N^(xi) = sum_k k^{-3/2} phi^(xi - k e_1).
    """
    bump = bump or WindowSpec.band_limited_bump(0.25)
    if bump.shape != BUMP:
        raise ValueError("counterexample needs a band-limited bump")
    if bump.scale > 0.5:
        raise ValueError("bump radius must be at most 1/2 so shifted copies stay disjoint")
    if int(N_terms) != N_terms or N_terms < 0:
        raise ValueError("N_terms must be a nonnegative integer")
    xi_max = grid.dual_spacing * grid.points_per_axis / 2
    if xi_max < N_terms + 1:
        raise ValueError(
            f"grid resolves |xi| <= {xi_max:.4g} but the partial sum needs {N_terms + 1}"
        )
    spec = np.zeros(grid.shape, dtype=complex)
    shift = np.zeros(grid.dim)
    for k in range(1, int(N_terms) + 1):
        shift[0] = k
        spec += k**-1.5 * bump.spectrum(grid, shift)
    return Field(grid, inverse_samples(grid, spec), PHYSICAL)


def xi1_moment_sq(f: Field) -> float:
    """||xi_1 f^(xi)||^2_{L^2} on the dual grid."""
    if f.space != PHYSICAL:
        raise ValueError("xi1_moment_sq needs a physical-space field")
    g = f.grid
    spec = forward_samples(g, f.samples)
    shape = [1] * g.dim
    shape[0] = -1
    xi1 = g.dual_axis.reshape(shape)
    return float(np.sum(xi1**2 * np.abs(spec) ** 2) * g.dual_cell_volume)


def moment_expansion(N_terms: int, bump: WindowSpec | None = None, dim: int = 1) -> dict:
    """Three-sum expansion of ||xi_1 f_N^||^2 with the bump integrals by quadrature.

    Returns the pieces ``{"second_moment", "first_moment", "mass", "value"}``
    where value = m2 * sum k^-3 + 2 m1 * sum k^-2 + mass * sum k^-1.
    """
    bump = bump or WindowSpec.band_limited_bump(0.25)
    r = bump.scale
    norm2 = bump.bump_l2(dim) ** 2
    # radial symmetry: int xi_1^2 |phi^|^2 = (1/n) int |xi|^2 |phi^|^2, first moment 0
    m2 = _radial_integral(lambda rho: rho**2 * bump_profile(rho, r) ** 2, r, dim) / dim / norm2
    m1 = 0.0
    mass = 1.0
    k = np.arange(1, int(N_terms) + 1, dtype=float)
    value = m2 * np.sum(k**-3) + 2 * m1 * np.sum(k**-2) + mass * np.sum(1.0 / k)
    return {"second_moment": m2, "first_moment": m1, "mass": mass, "value": float(value)}


# ---------------------------------------------------------------------------
# Kato-Ponce ratio


def kato_ponce_ratio(u: Field, p: float, s: int, sign: int = 1) -> float:
    """||F(u)||_{H^s} / (||u||_inf^{p-1} ||u||_{H^s}) with F(u) = sign |u|^{p-1} u."""
    if not (is_odd_integer(p) or p > s):
        raise ValueError(f"Kato-Ponce bound needs p odd or p > s (p={p}, s={s})")
    if u.space == FREQUENCY:
        u = Field(u.grid, inverse_samples(u.grid, u.samples), PHYSICAL)
    sup = float(np.abs(u.samples).max())
    if sup == 0:
        raise ValueError("Kato-Ponce ratio is undefined for the zero field")
    spec = NormSpec("Hs", s)
    Fu = u.with_samples(sign * np.abs(u.samples) ** (p - 1) * u.samples)
    return norm(Fu, spec) / (sup ** (p - 1) * norm(u, spec))
