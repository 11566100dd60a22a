"""Scattering state, error curves against the free profile, and rate fits.

Everything is expressed for the gauged solution v = e^{at} u. The scattering
state is phi = lim e^{-itD} v(t); the error curve E(t) = ||v(t) - e^{itD} phi||
decays like t^{-n(p-1)/2} e^{-a(p-1)t}, and multiplying by e^{-at} gives the
error of the original solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .propagators import free_propagate
from .solver import M11, MODES, SIGMA, ModelParams, Trajectory
from .spectral import (
    PHYSICAL,
    Field,
    NormSpec,
    forward_samples,
    norm,
    raw_sobolev_norm,
    sigma_index,
    weighted_norm,
)
from .special import upper_incomplete_gamma


class ExtractionError(RuntimeError):
    """The Cauchy gap of the pullback is above tolerance."""


def pullback_state(v: Field, t: float) -> Field:
    """phi_t = e^{-itD} v(t)."""
    if v.space != PHYSICAL:
        raise ValueError("pullback_state needs a physical-space field")
    return free_propagate(v, -t)


def _compensated_difference(traj: Trajectory, i: int, j: int) -> np.ndarray:
    """Raw FFT coefficients of phi_{t_i} - phi_{t_j}, summed hi/lo separately."""
    return (traj.pullback_raw[i] - traj.pullback_raw[j]) + (
        traj.pullback_correction[i] - traj.pullback_correction[j]
    )


def _raw_to_field(traj: Trajectory, raw: np.ndarray) -> Field:
    axes = tuple(range(-traj.grid.dim, 0))
    return Field(traj.grid, np.fft.ifftn(raw, axes=axes), PHYSICAL)


def _mode_norm(f: Field, mode: str, m11_kwargs: dict | None) -> float:
    if mode == SIGMA:
        return norm(f, NormSpec("Sigma"))
    from .modspace import m11_norm

    return m11_norm(f, **(m11_kwargs or {}))


@dataclass(frozen=True, eq=False)
class ScatteringState:
    """Pullback of the final state with its Cauchy certificate.

    ``cauchy_gap`` is ||phi_T - phi_{T/2}|| in the working norm of ``mode``;
    ``relative_gap`` divides it by ||phi_T||.
    """

    phi: Field
    extraction_time: float
    cauchy_gap: float
    relative_gap: float
    mode: str
    source_index: int
    half_index: int

    @property
    def trusted_until(self) -> float:
        return 0.5 * self.extraction_time


def extract_phi(
    traj: Trajectory,
    mode: str = SIGMA,
    tol: float = 1e-6,
    *,
    m11_kwargs: dict | None = None,
) -> ScatteringState:
    """Scattering state from the last recorded pullback.

    Raises :class:`ExtractionError` when the relative Cauchy gap between the
    pullbacks at T and T/2 exceeds ``tol``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    traj.params.check_mode(mode)
    last = len(traj) - 1
    if last < 1:
        raise ExtractionError("trajectory has no time steps; run longer")
    T = float(traj.times[last])
    half = int(np.argmin(np.abs(traj.times - 0.5 * T)))
    phi = traj.pullback(last)
    gap = _mode_norm(_raw_to_field(traj, _compensated_difference(traj, last, half)), mode, m11_kwargs)
    size = _mode_norm(phi, mode, m11_kwargs)
    rel = gap / size if size > 0 else 0.0
    if not math.isfinite(rel) or rel > tol:
        raise ExtractionError(
            f"Cauchy gap {rel:.3g} (relative, {mode}) between t={T:g} and t={traj.times[half]:g} "
            f"exceeds tol={tol:g}; simulate to a longer final time"
        )
    return ScatteringState(phi, T, float(gap), float(rel), mode, last, half)


# ---------------------------------------------------------------------------
# Tail integrals and the leading profile


def tail_integral(alpha: float, beta: float, t: float) -> float:
    """integral_t^inf s^alpha e^{-beta s} ds = beta^{-(alpha+1)} Gamma(alpha+1, beta t)."""
    check_positive("beta", beta)
    check_positive("t", t)
    return beta ** (-(alpha + 1.0)) * upper_incomplete_gamma(alpha + 1.0, beta * t)


def profile_norm(phi: Field, params: ModelParams) -> float:
    """2^{-n(p-1)/2} || |phi_hat|^p ||_{L2}, the time-independent factor of i2_norm."""
    g = phi.grid
    spec = phi.samples if phi.space != PHYSICAL else forward_samples(g, phi.samples)
    mod = np.abs(spec) ** params.power
    l2 = math.sqrt(float(np.sum(mod**2)) * g.dual_cell_volume)
    return 2.0 ** (-params.algebraic_rate) * l2


def i2_norm(phi: Field, t: float, params: ModelParams) -> float:
    """Norm of the leading Duhamel tail built from the free profile of ``phi``.

    For large s, e^{isD} phi ~ M(s) D(s) phi_hat, so the nonlinearity of the
    free profile has modulus (2s)^{-n(p-1)/2} |phi_hat|^p at the dilated
    point; integrating the tail gives this closed form.
    """
    check_positive("t", t)
    return tail_integral(-params.algebraic_rate, params.nonlinear_rate, t) * profile_norm(phi, params)


def elemlem_check(alpha: float, beta: float, t_grid) -> np.ndarray:
    """r(t) = tail_integral(alpha, beta, t) / (t^alpha e^{-beta t}) on ``t_grid``."""
    check_positive("beta", beta)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a nonempty 1-D sequence")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be positive and increasing")
    # divide in log space: both numerator and denominator underflow for large beta t
    out = np.empty_like(t)
    for k, tk in enumerate(t):
        num = tail_integral(alpha, beta, tk)
        out[k] = num * math.exp(beta * tk - alpha * math.log(tk)) if num > 0 else _ratio_asymptotic(alpha, beta, tk)
    return out


def _ratio_asymptotic(alpha: float, beta: float, t: float) -> float:
    # Gamma(a, x) ~ x^{a-1} e^{-x} sum_k (a-1)...(a-k)/x^k, used only on underflow
    x = beta * t
    total, term = 1.0, 1.0
    for k in range(1, 30):
        new = term * (alpha + 1 - k) / x
        if abs(new) >= abs(term):
            break
        term = new
        total += term
    return total / beta


# ---------------------------------------------------------------------------
# Error curves


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    times: np.ndarray
    values: np.ndarray
    norm_spec: NormSpec
    gauged: bool = True

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        e = np.asarray(self.values, dtype=float)
        if t.shape != e.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(e < 0):
            raise ValueError("error values must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", e)

    def __len__(self) -> int:
        return len(self.times)

    def ungauged(self, damping: float) -> ErrorCurve:
        """||u(t) - e^{-at} e^{itD} phi|| = e^{-at} E(t)."""
        if not self.gauged:
            raise ValueError("curve is already ungauged")
        return ErrorCurve(self.times, np.exp(-damping * self.times) * self.values, self.norm_spec, False)

    def restrict(self, t_from: float, t_to: float) -> ErrorCurve:
        keep = (self.times >= t_from - 1e-9) & (self.times <= t_to + 1e-9)
        return ErrorCurve(self.times[keep], self.values[keep], self.norm_spec, self.gauged)


def error_curve(
    traj: Trajectory,
    state: ScatteringState,
    spec: NormSpec | str = "L2",
    *,
    trust_factor: float = 2.0,
    t_min: float = 0.0,
) -> ErrorCurve:
    """E(t_j) = ||v(t_j) - e^{it_j D} phi|| for t_min <= t_j <= T / trust_factor.

    When ``phi`` is the trajectory's own final pullback, the difference is
    formed from the compensated pullback coefficients, so E stays accurate
    down to ~1e-16 relative instead of the ~1e-14 floor of subtracting two
    rounded states.
    """
    spec = NormSpec.parse(spec) if isinstance(spec, str) else spec
    check_positive("trust_factor", trust_factor)
    g = traj.grid
    t_end = state.extraction_time / trust_factor
    own = state.source_index < len(traj) and np.isclose(traj.times[state.source_index], state.extraction_time)
    phi_raw = None if own else np.fft.fftn(state.phi.samples, axes=tuple(range(-g.dim, 0)))
    times, values = [], []
    for j, t in enumerate(traj.times):
        if t < t_min - 1e-12 or t > t_end + 1e-9:
            continue
        if own:
            raw = _compensated_difference(traj, state.source_index, j)
        else:
            raw = phi_raw - (traj.pullback_raw[j] + traj.pullback_correction[j])
        times.append(float(t))
        values.append(_propagated_norm(g, raw, float(t), spec))
    return ErrorCurve(np.array(times), np.array(values), spec)


def _propagated_norm(grid, pull_raw: np.ndarray, t: float, spec: NormSpec) -> float:
    """Norm of e^{itD} applied to the field with raw coefficients ``pull_raw``."""
    if spec.kind == "L2":
        return raw_sobolev_norm(grid, pull_raw, 0)
    if spec.kind == "Hs":
        return raw_sobolev_norm(grid, pull_raw, spec.s)
    raw = np.exp(-1j * t * grid.fft_xi_sq) * pull_raw
    phys = np.fft.ifftn(raw, axes=tuple(range(-grid.dim, 0)))
    if spec.kind == "FHs":
        return weighted_norm(grid, phys, spec.s)
    if spec.kind == "Sigma":
        s = sigma_index(grid.dim)
        return max(raw_sobolev_norm(grid, raw, s), weighted_norm(grid, phys, s))
    return norm(Field(grid, phys, PHYSICAL), spec)


# ---------------------------------------------------------------------------
# Rate fits


@dataclass(frozen=True)
class RateFit:
    """log E(t) = log C - gamma log t - delta t on ``window``."""

    C: float
    gamma: float
    delta: float
    residual: float
    window: tuple[float, float]
    samples: int

    def predict(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.C * t ** (-self.gamma) * np.exp(-self.delta * t)

    def log_misfit(self, curve: ErrorCurve) -> np.ndarray:
        c = curve.restrict(*self.window)
        return np.log(c.values) - np.log(self.predict(c.times))

    def max_log_misfit(self, curve: ErrorCurve) -> float:
        return float(np.max(np.abs(self.log_misfit(curve))))

    def sandwich_onset(self, curve: ErrorCurve, tol: float = 0.1) -> float | None:
        """Earliest t such that |log E - log model| <= tol on [t, window end].

        Scans the whole curve up to the window end, so the onset can precede
        the fit window. Returns None if even the last point misses.
        """
        c = curve.restrict(float(curve.times[0]), self.window[1])
        ok = (c.values > 0) & (c.times > 0)
        c = ErrorCurve(c.times[ok], c.values[ok], c.norm_spec, c.gauged)
        if len(c) == 0:
            return None
        bad = np.abs(np.log(c.values) - np.log(self.predict(c.times))) > tol
        if bad[-1]:
            return None
        idx = np.flatnonzero(bad)
        return float(c.times[idx[-1] + 1] if idx.size else c.times[0])


MIN_FIT_SAMPLES = 10


def fit_rate(curve: ErrorCurve, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares fit of log E against [1, -log t, -t] on ``window``.

    The default window is [0.4 t_max, t_max] with t_max the last curve time.
    """
    if len(curve) == 0:
        raise ValueError("empty error curve")
    if window is None:
        t_max = float(curve.times[-1])
        window = (0.4 * t_max, t_max)
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise ValueError(f"fit window must satisfy 0 < start < end, got {window}")
    c = curve.restrict(lo, hi)
    if len(c) < MIN_FIT_SAMPLES:
        raise ValueError(f"fit window {window} holds {len(c)} samples; need at least {MIN_FIT_SAMPLES}")
    if np.any(c.values <= 0):
        raise ValueError("error curve has nonpositive values inside the fit window")
    A = np.column_stack([np.ones(len(c)), -np.log(c.times), -c.times])
    y = np.log(c.values)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return RateFit(
        C=float(np.exp(coef[0])),
        gamma=float(coef[1]),
        delta=float(coef[2]),
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(lo, hi),
        samples=len(c),
    )


__all__ = [
    "ErrorCurve",
    "ExtractionError",
    "M11",
    "RateFit",
    "SIGMA",
    "ScatteringState",
    "elemlem_check",
    "error_curve",
    "extract_phi",
    "fit_rate",
    "i2_norm",
    "profile_norm",
    "pullback_state",
    "tail_integral",
]
