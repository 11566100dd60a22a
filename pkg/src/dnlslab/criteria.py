"""Acceptance criteria as reusable checks.

Each ``criterion_*`` function takes already computed inputs where they are
expensive (the reference trajectory), runs its own cheap computations
otherwise, and returns a :class:`CriterionResult`. The harness and the test
suite share these functions, so a criterion means the same thing in both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .modspace import (
    TFLattice,
    WindowSpec,
    counterexample_field,
    m11_norm,
    moment_expansion,
    xi1_moment_sq,
)
from .propagators import mdfm_consistency
from .scattering import (
    ErrorCurve,
    ScatteringState,
    elemlem_check,
    error_curve,
    extract_phi,
    fit_rate,
    i2_norm,
    tail_integral,
)
from .solver import M11, SIGMA, ModelParams, Trajectory, decay_check, picard_iterate, simulate
from .spectral import H1, L2, Field, Grid, make_grid, norm


@dataclass
class CriterionResult:
    """Outcome of one check; ``number`` 0 marks an auxiliary check."""

    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        tag = f"criterion {self.number:>2}" if self.number else "check"
        return f"{tag} [{flag}] {self.name}: {self.detail}"

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": bool(self.passed),
            "measured": {k: _plain(v) for k, v in self.measured.items()},
            "detail": self.detail,
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


# ---------------------------------------------------------------------------
# Reference configuration


@dataclass(frozen=True)
class ReferenceSetup:
    dim: int = 1
    points: int = 4096
    box: float = 256.0
    amplitude: float = 0.1
    width: float = 1.0
    T: float = 16.0
    dt: float = 1e-3
    monitor_every: float = 0.1
    params: ModelParams = field(default_factory=ModelParams)
    rate_window: tuple[float, float] = (5.0, 8.0)
    extraction_tol: float = 1e-6

    def grid(self) -> Grid:
        return make_grid(self.dim, self.points, self.box)

    def initial(self, amplitude: float | None = None) -> Field:
        amp = self.amplitude if amplitude is None else amplitude
        w = self.width
        return Field.from_function(self.grid(), lambda *x: amp * np.exp(-sum(c**2 for c in x) / w**2))


@dataclass(frozen=True, eq=False)
class ReferenceRun:
    setup: ReferenceSetup
    trajectory: Trajectory
    state: ScatteringState
    curve_l2: ErrorCurve
    curve_h1: ErrorCurve


def reference_run(setup: ReferenceSetup | None = None, *, monitors=None) -> ReferenceRun:
    setup = setup or ReferenceSetup()
    g = setup.grid()
    kwargs = {} if monitors is None else {"monitors": monitors}
    traj = simulate(
        setup.initial(),
        setup.params,
        setup.T,
        setup.dt,
        monitor_every=setup.monitor_every,
        lattice=TFLattice.for_grid(g, WindowSpec.gaussian()),
        **kwargs,
    )
    state = extract_phi(traj, SIGMA, setup.extraction_tol)
    return ReferenceRun(
        setup, traj, state, error_curve(traj, state, L2), error_curve(traj, state, H1)
    )


# ---------------------------------------------------------------------------
# Criteria on the reference run


def criterion_rate(curve: ErrorCurve, params: ModelParams, window=(5.0, 8.0)) -> CriterionResult:
    fit = fit_rate(curve, window)
    ufit = fit_rate(curve.ungauged(params.damping), window)
    g_target, d_target = params.algebraic_rate, params.nonlinear_rate
    g_ok = 0.9 * g_target <= fit.gamma <= 1.1 * g_target
    d_ok = 0.98 * d_target <= fit.delta <= 1.02 * d_target
    gauge_ok = abs((ufit.delta - fit.delta) - params.damping) <= 1e-8
    return CriterionResult(
        1,
        "sharp rate",
        g_ok and d_ok and gauge_ok,
        {"C": fit.C, "gamma": fit.gamma, "delta": fit.delta, "residual": fit.residual,
         "ungauged_delta": ufit.delta, "gamma_target": g_target, "delta_target": d_target},
        f"gamma={fit.gamma:.4f} (target {g_target:g} +-10%), delta={fit.delta:.4f} "
        f"(target {d_target:g} +-2%), ungauged delta={ufit.delta:.4f}",
    )


def criterion_profile_ratio(
    curve: ErrorCurve, phi: Field, params: ModelParams, window=(5.0, 8.0)
) -> CriterionResult:
    c = curve.restrict(*window)
    if len(c) < 2:
        return CriterionResult(2, "leading-profile ratio", False, {}, f"fewer than 2 samples in {window}")
    ratio = np.array([e / i2_norm(phi, t, params) for t, e in zip(c.times, c.values)])
    dev = np.abs(ratio - 1.0)
    in_band = bool(np.all((ratio >= 0.8) & (ratio <= 1.2)))
    shrinking = bool(dev[-1] < dev[0])
    return CriterionResult(
        2,
        "leading-profile ratio",
        in_band and shrinking,
        {"times": c.times, "ratio": ratio},
        f"ratio in [{ratio.min():.5f}, {ratio.max():.5f}], |ratio-1| {dev[0]:.2e} -> {dev[-1]:.2e}",
    )


def criterion_h1_plateau(curve_h1: ErrorCurve, params: ModelParams, window=(5.0, 8.0)) -> CriterionResult:
    c = curve_h1.restrict(*window)
    if len(c) < 2 or np.any(c.values <= 0):
        return CriterionResult(3, "H1 upper bound plateau", False, {}, f"no positive samples in {window}")
    scaled = c.values * c.times**params.algebraic_rate * np.exp(params.nonlinear_rate * c.times)
    variation = float((scaled.max() - scaled.min()) / scaled.min())
    return CriterionResult(
        3,
        "H1 upper bound plateau",
        bool(np.all(np.isfinite(scaled))) and variation < 0.25,
        {"min": scaled.min(), "max": scaled.max(), "variation": variation},
        f"E_H1 t^g e^(d t) in [{scaled.min():.4e}, {scaled.max():.4e}], variation {variation:.2%}",
    )


def criterion_sandwich(curve: ErrorCurve, window=(5.0, 8.0), tol: float = 0.1) -> CriterionResult:
    fit = fit_rate(curve, window)
    misfit = fit.max_log_misfit(curve)
    onset = fit.sandwich_onset(curve, tol)
    return CriterionResult(
        4,
        "two-sided sandwich",
        misfit <= tol,
        {"max_log_misfit": misfit, "onset": onset},
        f"max |log E - log fit| = {misfit:.2e} on {fit.window}, bound holds from t={onset}",
    )


def mass_drift(traj: Trajectory) -> float:
    m0 = norm(traj.state(0), L2)
    drift = max(abs(norm(traj.state(i), L2) - m0) for i in range(len(traj)))
    return drift / m0 if m0 > 0 else drift


def criterion_mass(traj: Trajectory) -> CriterionResult:
    drift = mass_drift(traj)
    return CriterionResult(
        5, "exact decay law", drift <= 1e-10, {"relative_drift": drift},
        f"max relative L2 drift of v = {drift:.2e}",
    )


def criterion_decay(traj: Trajectory, window=(2.0, 16.0)) -> CriterionResult:
    mid = 0.5 * (window[0] + window[1])
    m = decay_check(traj, M11, envelope="assumption", window=window)
    s = decay_check(traj, SIGMA, envelope="assumption", window=window)
    gm, gs = m.growth(mid, window[1]), s.growth(mid, window[1])
    ok = all(math.isfinite(x) for x in (m.sup, s.sup)) and gm < 0.1 and gs < 0.1
    return CriterionResult(
        7,
        "decay hypotheses",
        ok,
        {"m11_sup": m.sup, "m11_growth": gm, "sigma_sup": s.sup, "sigma_growth": gs},
        f"M11 sup {m.sup:.4g} (growth {gm:.2%}), Sigma sup {s.sup:.4g} (growth {gs:.2%})",
    )


# ---------------------------------------------------------------------------
# Self-contained criteria


def criterion_contraction(
    initial: Callable[[float], Field],
    params: ModelParams,
    amplitudes=(0.1, 0.05),
    *,
    K: int = 6,
    horizon: float = 8.0,
    dt: float = 0.01,
) -> CriterionResult:
    """``initial(a)`` builds the data at amplitude ``a``."""
    reports = [
        picard_iterate(initial(a), params, K, horizon, dt, snapshot_times=[horizon])
        for a in amplitudes
    ]
    factors = [r.contraction_factor for r in reports]
    scaling = factors[0] / factors[1] if factors[1] > 0 else float("nan")
    target = (amplitudes[0] / amplitudes[1]) ** (params.power - 1)
    steps = reports[0].geometric_steps
    ok = steps >= 4 and abs(scaling / target - 1) <= 0.3 and factors[0] < 1
    return CriterionResult(
        6,
        "small-data contraction",
        ok,
        {"factors": factors, "scaling": scaling, "target": target, "steps": steps,
         "residuals": [r.residuals for r in reports]},
        f"{steps} geometric decreases, factors {factors[0]:.3e}/{factors[1]:.3e}, "
        f"scaling {scaling:.3f} (target {target:g} +-30%)",
    )


LEMMA_PAIRS = ((-1.0, 2.0), (0.0, 1.0), (3.0, 1.0))


def _quad_tail(alpha, beta, t):
    val, _ = integrate.quad(
        lambda s: s**alpha * math.exp(-beta * (s - t)), t, math.inf, epsabs=0.0, epsrel=1e-13, limit=500
    )
    return val * math.exp(-beta * t)


def criterion_tail_lemma(pairs=LEMMA_PAIRS) -> CriterionResult:
    measured, failures = {}, []
    for alpha, beta in pairs:
        t = np.linspace(10.0 / beta, 40.0 / beta, 61)
        rb = elemlem_check(alpha, beta, t) * beta
        at30 = float(elemlem_check(alpha, beta, [30.0 / beta])[0] * beta)
        quad_err = max(
            abs(tail_integral(alpha, beta, s) / _quad_tail(alpha, beta, s) - 1) for s in (1.0, 3.0, 10.0 / beta)
        )
        key = f"alpha={alpha:g},beta={beta:g}"
        measured[key] = {"min": rb.min(), "max": rb.max(), "at_30_over_beta": at30, "quad_rel_err": quad_err}
        if not (rb.min() >= 0.5 and rb.max() <= 2.0):
            failures.append(f"{key}: r*beta leaves [0.5, 2]")
        if abs(at30 - 1) > 0.05:
            failures.append(f"{key}: |r*beta - 1| = {abs(at30 - 1):.4f} at t=30/beta")
        if quad_err > 1e-10:
            failures.append(f"{key}: quadrature mismatch {quad_err:.1e}")
    return CriterionResult(
        8,
        "tail-integral lemma",
        not failures,
        measured,
        "; ".join(failures) if failures else "all pairs within bounds",
    )


def mdfm_test_field(points: int = 1024, box: float = 64.0) -> Field:
    g = make_grid(1, points, box)
    return Field.from_function(g, lambda x: np.exp(-(x**2) / 2))


def criterion_mdfm(f: Field | None = None, times=(0.5, 1.0, 2.0)) -> CriterionResult:
    f = mdfm_test_field() if f is None else f
    scale = norm(f, L2)
    disc = [mdfm_consistency(f, t) / scale for t in times]
    return CriterionResult(
        9,
        "MDFM factorization",
        max(disc) <= 1e-8,
        {"times": list(times), "relative_discrepancy": disc},
        f"max discrepancy / ||f|| = {max(disc):.2e}",
    )


COUNTEREXAMPLE_TERMS = (16, 32, 64, 128)


def counterexample_grid() -> Grid:
    # dual spacing 1/256 resolves the radius-1/4 bump; xi_max = 256 > 129
    return make_grid(1, 131072, 2 * np.pi * 256)


def criterion_counterexample(
    terms=COUNTEREXAMPLE_TERMS, window: WindowSpec | None = None, grid: Grid | None = None
) -> CriterionResult:
    g = counterexample_grid() if grid is None else grid
    bump = WindowSpec.band_limited_bump(0.25)
    window = window or WindowSpec.gaussian()
    lattice = TFLattice.for_grid(g, window)
    moments, expansions, m11 = [], [], []
    for n in terms:
        f = counterexample_field(n, bump, g)
        moments.append(xi1_moment_sq(f))
        expansions.append(moment_expansion(n, bump)["value"])
        m11.append(m11_norm(f, window, lattice))
    phi_sq = norm(counterexample_field(1, bump, g), L2) ** 2
    slope = float(np.polyfit(np.log(terms), moments, 1)[0])
    slope_err = abs(slope / phi_sq - 1)
    match = max(abs(m / e - 1) for m, e in zip(moments, expansions))
    change = abs(m11[-1] / m11[-2] - 1)
    failures = []
    if slope_err > 0.05:
        failures.append(f"slope off by {slope_err:.2%}")
    if change >= 0.01:
        failures.append(f"M11 changes {change:.2%} from N={terms[-2]} to {terms[-1]}")
    if match > 1e-8:
        failures.append(f"three-term mismatch {match:.1e}")
    return CriterionResult(
        10,
        "counterexample dichotomy",
        not failures,
        {"terms": list(terms), "xi1_moment_sq": moments, "expansion": expansions, "m11": m11,
         "slope": slope, "phi_l2_sq": phi_sq, "m11_change": change, "expansion_mismatch": match},
        f"slope {slope:.4f} vs {phi_sq:.4f}, M11 change {change:.2%}, mismatch {match:.1e}"
        + ("; " + "; ".join(failures) if failures else ""),
    )


def criterion_order(
    u0: Field, params: ModelParams, steps=(0.04, 0.02, 0.01), t_end: float = 2.0
) -> CriterionResult:
    finals = []
    for dt in steps:
        traj = simulate(u0, params, t_end, dt, monitor_every=t_end, monitors=())
        finals.append(traj.state(len(traj) - 1))
    errs = [norm(finals[i] - finals[i + 1], L2) for i in range(len(finals) - 1)]
    measured = {"dt": list(steps), "self_convergence_errors": errs}
    if errs[0] == 0 and errs[1] == 0:
        # every step size gives the same state: the splitting is exact here
        return CriterionResult(11, "splitting order", True, {**measured, "factor": None},
                               f"no splitting error for dt {steps} (exact on these data)")
    factor = errs[0] / errs[1] if errs[1] > 0 else float("nan")
    return CriterionResult(
        11,
        "splitting order",
        3.2 <= factor <= 4.8,
        {**measured, "factor": factor},
        f"error ratio {factor:.3f} for dt {steps}",
    )


__all__ = [
    "COUNTEREXAMPLE_TERMS",
    "CriterionResult",
    "LEMMA_PAIRS",
    "ReferenceRun",
    "ReferenceSetup",
    "counterexample_grid",
    "criterion_contraction",
    "criterion_counterexample",
    "criterion_decay",
    "criterion_h1_plateau",
    "criterion_mass",
    "criterion_mdfm",
    "criterion_order",
    "criterion_profile_ratio",
    "criterion_rate",
    "criterion_sandwich",
    "criterion_tail_lemma",
    "mass_drift",
    "reference_run",
]
