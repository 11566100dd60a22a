"""Free Schrodinger evolution: multiplier form, factorised (chirp-dilation) form,
and the dispersive-estimate ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    PHYSICAL,
    Field,
    Grid,
    forward_samples,
    L1,
    LINF,
    norm,
)


class BoxEscapeError(ValueError):
    """Dilated sample points carrying non-negligible mass left the box."""


def free_propagate(f: Field, t: float) -> Field:
    """Apply exp(it Delta) as the exact Fourier multiplier exp(-it|xi|^2)."""
    if f.space != PHYSICAL:
        raise ValueError("free_propagate needs a physical-space field")
    if t == 0:
        return f
    return Field(f.grid, propagate_samples(f.grid, f.samples, t), PHYSICAL)


def propagate_samples(grid: Grid, samples: np.ndarray, t: float) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    mult = np.exp(-1j * t * grid.fft_xi_sq)
    return np.fft.ifftn(mult * np.fft.fftn(samples, axes=axes), axes=axes)


def dilation_prefactor(dim: int, t: float) -> complex:
    """(2it)^(-n/2) on the principal branch, i.e. (2t)^(-n/2) exp(-i n pi/4)."""
    return (2.0 * t) ** (-dim / 2) * np.exp(-0.25j * np.pi * dim)


@dataclass(frozen=True, eq=False)
class DilatedField:
    """Samples of a function at the dilated lattice ``x = 2t xi_k``."""

    base_grid: Grid
    time: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError("dilation time must be positive")
        arr = np.array(self.samples, dtype=complex, copy=True)
        if arr.shape != self.base_grid.shape:
            raise ValueError("dilated samples must match the dual grid shape")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def axis(self) -> np.ndarray:
        """Dilated points along one axis."""
        return 2.0 * self.time * self.base_grid.dual_axis

    @property
    def cell_volume(self) -> float:
        return (2.0 * self.time * self.base_grid.dual_spacing) ** self.base_grid.dim

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.cell_volume))


def mdfm_propagate(f: Field, t: float) -> DilatedField:
    """exp(it Delta) f at the points 2t xi_k via the factorisation M D F M.

    No interpolation happens: the dilation D(t) maps the dual lattice onto
    the dilated lattice exactly.
    """
    if f.space != PHYSICAL:
        raise ValueError("mdfm_propagate needs a physical-space field")
    if not t > 0:
        raise ValueError(f"mdfm_propagate needs t > 0, got {t}")
    g = f.grid
    chirped = np.exp(1j * g.x_sq / (4.0 * t)) * f.samples
    spec = forward_samples(g, chirped)
    # M(t) at x = 2t xi is exp(i t |xi|^2)
    outer = np.exp(1j * t * g.xi_sq)
    return DilatedField(g, t, outer * dilation_prefactor(g.dim, t) * spec)


def trig_interpolate(f: Field, points: np.ndarray) -> np.ndarray:
    """Band-limited interpolant of ``f`` on the tensor lattice ``points``^n.

    ``points`` is a 1-D array used along every axis.
    """
    if f.space != PHYSICAL:
        raise ValueError("interpolation needs a physical-space field")
    g = f.grid
    coeff = forward_samples(g, f.samples)
    basis = np.exp(1j * np.outer(points, g.dual_axis))
    scale = g.dual_spacing / np.sqrt(2.0 * np.pi)
    out = coeff
    for ax in range(g.dim):
        out = np.moveaxis(np.tensordot(basis, out, axes=([1], [ax])), 0, ax) * scale
    return out


def _significant_axis_mask(samples: np.ndarray, tol: float) -> np.ndarray:
    """Per-axis mask of indices where some sample exceeds ``tol`` times the peak."""
    a = np.abs(samples)
    peak = a.max()
    if peak == 0:
        return np.zeros(a.shape[0], dtype=bool)
    big = a > tol * peak
    other = tuple(range(1, a.ndim))
    mask = np.zeros(a.shape[0], dtype=bool)
    for ax in range(a.ndim):
        mask |= np.any(np.moveaxis(big, ax, 0), axis=other)
    return mask


def mdfm_consistency(f: Field, t: float, *, escape_tol: float = 1e-12) -> float:
    """Max discrepancy between the factorised and multiplier propagators.

    Compares ``mdfm_propagate(f, t)`` with the trigonometric interpolant of
    ``free_propagate(f, t)`` at every dilated point inside the box. Dilated
    points outside the box must carry less than ``escape_tol`` of the peak
    modulus; otherwise :class:`BoxEscapeError` is raised. Requires
    ``t >= dx^2 / (4 pi)`` so the chirp is resolved on the grid.
    """
    g = f.grid
    if not t > 0:
        raise ValueError(f"mdfm_consistency needs t > 0, got {t}")
    if t < g.spacing**2 / (4.0 * np.pi):
        raise ValueError(f"t={t} is below the chirp resolution limit dx^2/(4 pi)")
    dil = mdfm_propagate(f, t)
    pts = dil.axis
    half = 0.5 * g.box_length
    inside = (pts >= -half) & (pts < half)
    significant = _significant_axis_mask(dil.samples, escape_tol)
    escaped = significant & ~inside
    if np.any(escaped):
        reach = np.abs(pts[escaped]).max()
        raise BoxEscapeError(
            f"dilated points up to |x|={reach:.4g} carry mass but the box half-width is {half:.4g}"
        )
    if not np.any(inside):
        return 0.0
    idx = np.flatnonzero(inside)
    reference = trig_interpolate(free_propagate(f, t), pts[idx])
    sub = dil.samples[np.ix_(*([idx] * g.dim))]
    return float(np.abs(reference - sub).max())


def dispersive_ratio(f: Field, t: float) -> float:
    """||exp(it Delta) f||_inf (4 pi t)^(n/2) / ||f||_1, which is at most 1."""
    if not t > 0:
        raise ValueError(f"dispersive_ratio needs t > 0, got {t}")
    l1 = norm(f, L1)
    if l1 == 0:
        raise ValueError("dispersive_ratio is undefined for the zero field")
    sup = norm(free_propagate(f, t), LINF)
    return sup * (4.0 * np.pi * t) ** (f.grid.dim / 2) / l1


__all__ = [
    "BoxEscapeError",
    "DilatedField",
    "dispersive_ratio",
    "free_propagate",
    "mdfm_consistency",
    "mdfm_propagate",
    "trig_interpolate",
]
