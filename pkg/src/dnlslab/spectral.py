"""Periodic grids, the unitary Fourier transform and the norms used throughout.

The continuum convention is

    F f(xi) = (2 pi)^(-n/2) \\int f(x) exp(-i x.xi) dx,

and the discrete transform reproduces it on a symmetric box: physical samples
sit at ``x_j = -L/2 + j dx`` and frequency samples at ``xi_k = k dxi`` for
``k = -N/2 .. N/2 - 1`` (stored in ascending order along every axis).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from ._validation import check_positive

#: Default cap on the spatial dimension; raise it explicitly for bigger runs.
MAX_DIM = 3

PHYSICAL = "physical"
FREQUENCY = "frequency"

Space = Literal["physical", "frequency"]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic sampling of the cube ``[-L/2, L/2)^n``."""

    dim: int
    points_per_axis: int
    box_length: float

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def dual_spacing(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def dual_cell_volume(self) -> float:
        return self.dual_spacing**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.box_length + self.spacing * np.arange(self.points_per_axis)

    @cached_property
    def dual_axis(self) -> np.ndarray:
        n = self.points_per_axis
        return self.dual_spacing * np.arange(-n // 2, n // 2)

    @cached_property
    def fft_axis(self) -> np.ndarray:
        """Angular frequencies in raw FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, self.spacing)

    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True))

    def dual_coords(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.meshgrid(*([self.dual_axis] * self.dim), indexing="ij", sparse=True)
        )

    @cached_property
    def x_sq(self) -> np.ndarray:
        """|x|^2 on the physical grid."""
        return _radial_sq(self.axis, self.dim)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        """|xi|^2 on the dual grid, ascending order."""
        return _radial_sq(self.dual_axis, self.dim)

    @cached_property
    def fft_xi_sq(self) -> np.ndarray:
        """|xi|^2 in raw FFT order, for multipliers applied to ``np.fft`` output."""
        return _radial_sq(self.fft_axis, self.dim)

    @cached_property
    def centering_phase(self) -> np.ndarray:
        """(-1)^(k_1 + ... + k_n) on the dual grid (ascending order)."""
        k = np.arange(-self.points_per_axis // 2, self.points_per_axis // 2)
        sign = np.where(k % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for ax in range(self.dim):
            shape = [1] * self.dim
            shape[ax] = -1
            out = out * sign.reshape(shape)
        return out


def _radial_sq(axis: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros((axis.size,) * dim)
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = -1
        out = out + (axis**2).reshape(shape)
    return out


def make_grid(n: int, N: int, L: float, *, max_dim: int | None = None) -> Grid:
    """Build a :class:`Grid` after checking the sampling preconditions.

    >>> g = make_grid(1, 8, 2 * np.pi)
    >>> g.spacing, g.dual_spacing
    (0.7853981633974483, 1.0)
    """
    cap = MAX_DIM if max_dim is None else max_dim
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    if n > cap:
        raise ValueError(f"dimension {n} exceeds the configured cap of {cap}")
    if int(N) != N or N < 4:
        raise ValueError(f"points per axis must be an integer >= 4, got {N}")
    if N % 2:
        raise ValueError(f"points per axis must be even, got {N}")
    check_positive("box length", L)
    return Grid(int(n), int(N), float(L))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, tagged with the space they live in.

    Samples are copied to a read-only complex array at construction.
    """

    grid: Grid
    samples: np.ndarray
    space: Space = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown space tag {self.space!r}")
        arr = np.array(self.samples, dtype=complex, copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"samples have shape {arr.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __mul__(self, c):
        if isinstance(c, Field):
            _require_same(self, c)
            return Field(self.grid, self.samples * c.samples, self.space)
        return Field(self.grid, self.samples * c, self.space)

    __rmul__ = __mul__

    def __add__(self, other: Field) -> Field:
        _require_same(self, other)
        return Field(self.grid, self.samples + other.samples, self.space)

    def __sub__(self, other: Field) -> Field:
        _require_same(self, other)
        return Field(self.grid, self.samples - other.samples, self.space)

    def __neg__(self) -> Field:
        return Field(self.grid, -self.samples, self.space)

    def with_samples(self, samples: np.ndarray) -> Field:
        return Field(self.grid, samples, self.space)

    @classmethod
    def zeros(cls, grid: Grid, space: Space = PHYSICAL) -> Field:
        return cls(grid, np.zeros(grid.shape, dtype=complex), space)

    @classmethod
    def from_function(cls, grid: Grid, func) -> Field:
        """Sample ``func(*coords)`` on the physical grid."""
        values = np.broadcast_to(func(*grid.coords()), grid.shape)
        return cls(grid, values, PHYSICAL)


def _require_same(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    if f.space != g.space:
        raise ValueError(f"space mismatch: {f.space} vs {g.space}")


# ---------------------------------------------------------------------------
# Fourier transform


def _fft_axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(-grid.dim, 0))


def raw_to_spectrum(grid: Grid, raw: np.ndarray) -> np.ndarray:
    """Map unnormalised ``np.fft.fftn`` output to continuum-normalised f^(xi_k).

    Works on stacked arrays as long as the grid axes come last.
    """
    axes = _fft_axes(grid)
    scale = grid.cell_volume / (2.0 * np.pi) ** (grid.dim / 2)
    return np.fft.fftshift(raw, axes=axes) * (scale * grid.centering_phase)


def spectrum_to_raw(grid: Grid, spec: np.ndarray) -> np.ndarray:
    axes = _fft_axes(grid)
    scale = (2.0 * np.pi) ** (grid.dim / 2) / grid.cell_volume
    return np.fft.ifftshift(spec * (scale * grid.centering_phase), axes=axes)


def forward_samples(grid: Grid, samples: np.ndarray) -> np.ndarray:
    return raw_to_spectrum(grid, np.fft.fftn(samples, axes=_fft_axes(grid)))


def inverse_samples(grid: Grid, spec: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(spectrum_to_raw(grid, spec), axes=_fft_axes(grid))


def fourier_transform(f: Field, direction: Literal["forward", "inverse"] = "forward") -> Field:
    """Unitary Fourier transform between the physical and dual grids.

    A continuum function sampled on the grid is mapped to its continuum
    transform sampled on the dual grid, up to aliasing and truncation.
    """
    if direction == "forward":
        if f.space != PHYSICAL:
            raise ValueError("forward transform needs a physical-space field")
        return Field(f.grid, forward_samples(f.grid, f.samples), FREQUENCY)
    if direction == "inverse":
        if f.space != FREQUENCY:
            raise ValueError("inverse transform needs a frequency-space field")
        return Field(f.grid, inverse_samples(f.grid, f.samples), PHYSICAL)
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# Norms


_KINDS = ("L1", "L2", "Linf", "Hs", "FHs", "Sigma")


@dataclass(frozen=True)
class NormSpec:
    """Which norm to take; ``s`` is the smoothness/weight index for Hs, FHs."""

    kind: str
    s: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {_KINDS}")
        if self.s < 0 or int(self.s) != self.s:
            raise ValueError(f"norm index must be a nonnegative integer, got {self.s}")

    @classmethod
    def parse(cls, text: str) -> NormSpec:
        """Parse ``"L2"``, ``"Linf"``, ``"H1"``, ``"FH2"``, ``"Sigma"`` and the like."""
        t = text.strip()
        if t in ("L1", "L2", "Linf", "Sigma"):
            return cls(t)
        if t.startswith("FH") and t[2:].isdigit():
            return cls("FHs", int(t[2:]))
        if t.startswith("H") and t[1:].isdigit():
            return cls("Hs", int(t[1:]))
        raise ValueError(f"cannot parse norm spec {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "Hs":
            return f"H{self.s}"
        if self.kind == "FHs":
            return f"FH{self.s}"
        return self.kind


L1 = NormSpec("L1")
L2 = NormSpec("L2")
LINF = NormSpec("Linf")
SIGMA = NormSpec("Sigma")
H1 = NormSpec("Hs", 1)


def sigma_index(dim: int) -> int:
    """Regularity/weight index ``[n/2] + 1`` of the space Sigma."""
    return dim // 2 + 1


def _japanese(sq: np.ndarray, s: int) -> np.ndarray:
    return (1.0 + sq) ** s


def sobolev_norm(grid: Grid, spectrum: np.ndarray, s: int) -> float:
    w = _japanese(grid.xi_sq, s)
    return float(np.sqrt(np.sum(w * np.abs(spectrum) ** 2) * grid.dual_cell_volume))


def weighted_norm(grid: Grid, samples: np.ndarray, s: int) -> float:
    w = _japanese(grid.x_sq, s)
    return float(np.sqrt(np.sum(w * np.abs(samples) ** 2) * grid.cell_volume))


def norm(f: Field, spec: NormSpec | str) -> float:
    """Discretised norm of ``f``.

    L1/L2/Linf are Riemann sums over the samples of ``f`` in whichever space
    it lives (weight ``dx^n`` or ``dxi^n``). Hs, FHs and Sigma always refer
    to the physical-space function.
    """
    if isinstance(spec, str):
        spec = NormSpec.parse(spec)
    g = f.grid
    if spec.kind in ("L1", "L2", "Linf"):
        a = np.abs(f.samples)
        if spec.kind == "Linf":
            return float(a.max())
        w = g.cell_volume if f.space == PHYSICAL else g.dual_cell_volume
        if spec.kind == "L1":
            return float(a.sum() * w)
        return float(np.sqrt(np.sum(a**2) * w))

    if f.space == PHYSICAL:
        phys, spect = f.samples, None
    else:
        phys, spect = None, f.samples

    def spectrum():
        return spect if spect is not None else forward_samples(g, phys)

    def physical():
        return phys if phys is not None else inverse_samples(g, spect)

    if spec.kind == "Hs":
        return sobolev_norm(g, spectrum(), spec.s)
    if spec.kind == "FHs":
        return weighted_norm(g, physical(), spec.s)
    s = sigma_index(g.dim)
    return max(sobolev_norm(g, spectrum(), s), weighted_norm(g, physical(), s))


def raw_sobolev_norm(grid: Grid, raw: np.ndarray, s: int = 0) -> float:
    """H^s norm straight from unnormalised FFT coefficients (L2 when s = 0)."""
    a2 = np.abs(raw) ** 2
    if s:
        a2 = a2 * _japanese(grid.fft_xi_sq, s)
    return float(np.sqrt(np.sum(a2) * grid.cell_volume / grid.size))
