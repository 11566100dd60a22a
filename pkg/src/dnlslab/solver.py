"""Time integration of the gauged damped NLS and the small-data Picard map.

With v = e^{at} u the damped equation becomes

    i v_t + Delta v = mu e^{-a(p-1)t} |v|^{p-1} v,     v(0) = u0,

which is what every routine here integrates. The nonlinear sub-flow leaves
|v| pointwise invariant, so it is solved exactly by a phase rotation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    HypothesisError,
    check_multiple,
    check_positive,
    is_odd_integer,
)
from .propagators import free_propagate
from .spectral import (
    PHYSICAL,
    Field,
    Grid,
    raw_sobolev_norm,
    sigma_index,
    weighted_norm,
)

logger = logging.getLogger(__name__)

M11 = "M11"
SIGMA = "Sigma"
MODES = (M11, SIGMA)

MONITORS = ("L2", "Linf", "Hs", "sigma_pullback", "M11")


@dataclass(frozen=True)
class ModelParams:
    """Constants of i u_t + Delta u + i a u = mu |u|^{p-1} u.

    ``sign`` may be 0 to switch the nonlinearity off (linear runs and tests).
    ``margin`` is the epsilon in the decay hypothesis on the M^{1,1} norm;
    it defaults to ``0.01 * damping``.
    """

    dim: int = 1
    power: float = 3.0
    damping: float = 1.0
    sign: int = 1
    margin: float | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.power > 1:
            raise ValueError(f"power must exceed 1, got {self.power}")
        check_positive("damping", self.damping)
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be +1, -1 (or 0 to disable), got {self.sign}")
        if self.margin is None:
            object.__setattr__(self, "margin", 0.01 * self.damping)
        check_positive("margin", self.margin, strict=False)

    @property
    def nonlinear_rate(self) -> float:
        """a(p - 1), the decay rate of the gauged nonlinear coefficient."""
        return self.damping * (self.power - 1)

    @property
    def algebraic_rate(self) -> float:
        """n(p - 1)/2, the dispersive exponent of the sharp rate."""
        return self.dim * (self.power - 1) / 2

    @property
    def assumption_rate(self) -> float:
        """(ap + eps)/(2p - 1), the required exponential decay of ||u||_{M11}."""
        p = self.power
        return (self.damping * p + self.margin) / (2 * p - 1)

    def check_mode(self, mode: str) -> None:
        """Raise :class:`HypothesisError` if ``power`` is not admissible for ``mode``."""
        p = self.power
        if mode == M11:
            if not is_odd_integer(p):
                raise HypothesisError(
                    f"M11 mode requires an odd integer power p (rough-data sharp-rate "
                    f"theorem hypothesis), got p={p}"
                )
        elif mode == SIGMA:
            s = sigma_index(self.dim)
            if not (is_odd_integer(p) or p > s):
                raise HypothesisError(
                    f"Sigma mode requires p odd or p > [n/2]+1 = {s} (energy-space "
                    f"sharp-rate theorem hypothesis), got p={p}"
                )
        else:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _modulus_power(w: np.ndarray, q: float) -> np.ndarray:
    """|w|^q, using integer powers of |w|^2 when q is an even integer."""
    if q == 0:
        return np.ones(w.shape)
    if float(q).is_integer() and int(q) % 2 == 0:
        return (w.real**2 + w.imag**2) ** (int(q) // 2)
    return np.abs(w) ** q


def nonlinearity(w: np.ndarray, params: ModelParams) -> np.ndarray:
    """F(w) = mu |w|^{p-1} w."""
    return params.sign * _modulus_power(w, params.power - 1) * w


def phase_weight(t: float, dt: float, params: ModelParams) -> float:
    """W = integral_t^{t+dt} exp(-a(p-1)s) ds in closed form."""
    c = params.nonlinear_rate
    return math.exp(-c * t) * (-math.expm1(-c * dt)) / c


def _phase_increment(w: np.ndarray, theta: np.ndarray) -> np.ndarray:
    # w (e^{-i theta} - 1) without cancellation for small theta
    s = np.sin(0.5 * theta)
    return w * (-2.0 * s * s - 1j * np.sin(theta))


def strang_step(v: Field, t: float, dt: float, params: ModelParams) -> Field:
    """One Strang step: half kinetic, exact nonlinear phase, half kinetic."""
    if v.space != PHYSICAL:
        raise ValueError("strang_step needs a physical-space field")
    check_positive("dt", dt)
    half = free_propagate(v, 0.5 * dt)
    w = half.samples
    if params.sign != 0:
        theta = params.sign * _modulus_power(w, params.power - 1) * phase_weight(t, dt, params)
        w = w * np.exp(-1j * theta)
    return free_propagate(half.with_samples(w), 0.5 * dt)


# ---------------------------------------------------------------------------
# Trajectories


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Gauged states v(t_j) at the monitor times plus monitor series.

    ``pullback_raw`` and ``pullback_correction`` hold the unnormalised FFT
    coefficients of the pulled-back state exp(-i t_j Delta) v(t_j) as a
    compensated (high, low) pair; their sum is accurate to far better than
    one ulp of the high part, which keeps differences between late pullbacks
    meaningful even when they are ~1e-12 of the state itself.
    """

    params: ModelParams
    grid: Grid
    times: np.ndarray
    samples: np.ndarray
    monitors: dict[str, np.ndarray]
    pullback_raw: np.ndarray
    pullback_correction: np.ndarray
    dt: float
    aborted: bool = False
    last_good_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[Field]:
        return [self.state(i) for i in range(len(self))]

    def state(self, i: int) -> Field:
        return Field(self.grid, self.samples[i], PHYSICAL)

    def ungauged(self, i: int) -> Field:
        """u(t_i) = exp(-a t_i) v(t_i)."""
        return Field(self.grid, math.exp(-self.params.damping * self.times[i]) * self.samples[i])

    def pullback(self, i: int) -> Field:
        axes = tuple(range(-self.grid.dim, 0))
        raw = self.pullback_raw[i] + self.pullback_correction[i]
        return Field(self.grid, np.fft.ifftn(raw, axes=axes), PHYSICAL)

    def index_of(self, t: float, *, atol: float | None = None) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        tol = 0.5 * self.dt if atol is None else atol
        if abs(self.times[i] - t) > tol:
            raise KeyError(f"no monitor time near t={t}")
        return i

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


def _monitor_values(grid, names, v, raw_v, pull_raw, m11_fn):
    s = sigma_index(grid.dim)
    out = {}
    for name in names:
        if name == "L2":
            out[name] = raw_sobolev_norm(grid, raw_v, 0)
        elif name == "Linf":
            out[name] = float(np.abs(v).max())
        elif name == "Hs":
            out[name] = raw_sobolev_norm(grid, raw_v, s)
        elif name == "sigma_pullback":
            axes = tuple(range(-grid.dim, 0))
            phys = np.fft.ifftn(pull_raw, axes=axes)
            out[name] = max(raw_sobolev_norm(grid, pull_raw, s), weighted_norm(grid, phys, s))
        elif name == "M11":
            out[name] = m11_fn(Field(grid, v, PHYSICAL))
        else:
            raise ValueError(f"unknown monitor {name!r}; expected a subset of {MONITORS}")
    return out


def simulate(
    u0: Field,
    params: ModelParams,
    T: float,
    dt: float,
    *,
    monitor_every: float = 0.1,
    monitors: tuple[str, ...] = MONITORS,
    window=None,
    lattice=None,
) -> Trajectory:
    """Integrate the gauged equation from v(0) = u0 up to time ``T``.

    The scheme is the Strang composition of :func:`strang_step`, written in
    the interaction picture psi = exp(-it Delta) v: each step adds the
    pulled-back nonlinear phase increment to psi with compensated summation.
    States and monitors are recorded every ``monitor_every``.

    A non-finite value aborts the run; the returned trajectory then ends at
    the last good monitor time and has ``aborted`` set.
    """
    if u0.space != PHYSICAL:
        raise ValueError("initial data must be a physical-space field")
    check_positive("T", T)
    check_positive("dt", dt)
    per = check_multiple("monitor_every", monitor_every, dt)
    blocks = check_multiple("T", T, monitor_every)
    for name in monitors:
        if name not in MONITORS:
            raise ValueError(f"unknown monitor {name!r}; expected a subset of {MONITORS}")

    grid = u0.grid
    axes = tuple(range(-grid.dim, 0))
    xi2 = grid.fft_xi_sq
    mu = params.sign
    q = params.power - 1

    m11_fn = None
    if "M11" in monitors:
        from .modspace import WindowSpec, m11_norm

        win = window if window is not None else WindowSpec.gaussian(1.0)
        m11_fn = lambda f: m11_norm(f, win, lattice)  # noqa: E731

    hi = np.fft.fftn(u0.samples, axes=axes)
    lo = np.zeros_like(hi)

    times = [0.0]
    states = [np.array(u0.samples)]
    his = [hi.copy()]
    los = [lo.copy()]
    series = {name: [] for name in monitors}
    first = _monitor_values(grid, monitors, u0.samples, hi, hi, m11_fn)
    for k, val in first.items():
        series[k].append(val)

    advance = np.exp(-1j * dt * xi2)
    aborted = False
    # overflow is caught by the finiteness checks and turned into an abort
    with np.errstate(over="ignore", invalid="ignore"):
        for block in range(blocks):
            t0 = block * per * dt
            frame = np.exp(-1j * (t0 + 0.5 * dt) * xi2)
            for j in range(per if mu != 0 else 0):
                t = t0 + j * dt
                w = np.fft.ifftn(frame * hi, axes=axes)
                theta = (mu * phase_weight(t, dt, params)) * _modulus_power(w, q)
                inc = np.fft.fftn(_phase_increment(w, theta), axes=axes) * frame.conj()
                if not np.all(np.isfinite(inc)):
                    aborted = True
                    break
                y = inc - lo
                total = hi + y
                lo = (total - hi) - y
                hi = total
                frame *= advance
            if aborted:
                logger.warning("non-finite values after t=%.6g; run aborted", times[-1])
                break
            t_rec = (block + 1) * per * dt
            pull = hi + lo
            raw_v = np.exp(-1j * t_rec * xi2) * pull
            v = np.fft.ifftn(raw_v, axes=axes)
            if not np.all(np.isfinite(v)):
                aborted = True
                logger.warning("non-finite state at t=%.6g; run aborted", t_rec)
                break
            times.append(t_rec)
            states.append(v)
            his.append(hi.copy())
            los.append(lo.copy())
            for k, val in _monitor_values(grid, monitors, v, raw_v, pull, m11_fn).items():
                series[k].append(val)

    return Trajectory(
        params=params,
        grid=grid,
        times=_readonly(np.array(times)),
        samples=_readonly(np.array(states)),
        monitors={k: _readonly(np.array(v, dtype=float)) for k, v in series.items()},
        pullback_raw=_readonly(np.array(his)),
        pullback_correction=_readonly(np.array(los)),
        dt=float(dt),
        aborted=aborted,
        last_good_time=float(times[-1]),
        meta={"monitor_every": float(monitor_every), "horizon": float(T)},
    )


# ---------------------------------------------------------------------------
# Picard iteration for the Duhamel map


@dataclass(frozen=True, eq=False)
class PicardReport:
    """Outcome of iterating the Duhamel map.

    ``iterates[k]`` holds v^(k) at ``snapshot_times``; ``residuals[k]`` is
    ||v^(k+1) - v^(k)||_X with X = sup_t <t>^{-n/2} ||.||.
    """

    grid: Grid
    snapshot_times: np.ndarray
    iterates: list[np.ndarray]
    residuals: np.ndarray
    contraction_factor: float
    geometric_steps: int
    working_norm: str

    def iterate(self, k: int, t: float) -> Field:
        i = int(np.argmin(np.abs(self.snapshot_times - t)))
        if not np.isclose(self.snapshot_times[i], t):
            raise KeyError(f"t={t} is not a snapshot time")
        return Field(self.grid, self.iterates[k][i], PHYSICAL)

    @property
    def diverged(self) -> bool:
        return not self.contraction_factor < 1


def _working_norm(grid: Grid, raw: np.ndarray, kind: str) -> float:
    if kind == "L2":
        return raw_sobolev_norm(grid, raw, 0)
    s = sigma_index(grid.dim)
    if kind == "Hs":
        return raw_sobolev_norm(grid, raw, s)
    if kind == "Sigma":
        phys = np.fft.ifftn(raw, axes=tuple(range(-grid.dim, 0)))
        return max(raw_sobolev_norm(grid, raw, s), weighted_norm(grid, phys, s))
    raise ValueError(f"unsupported Picard working norm {kind!r}")


def fit_contraction(residuals: np.ndarray, floor: float) -> tuple[float, int]:
    """Contraction factor from the leading run of decreasing residuals above ``floor``.

    Returns ``(factor, steps)``: ``steps`` counts the consecutive decreases in
    the run and ``factor`` is the largest ratio r_{k+1}/r_k inside it, an
    empirical Lipschitz constant of the map along the iterates. With no
    decrease at all the first ratio is returned (possibly > 1).
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0 or r[0] == 0:
        return 0.0, 0
    keep = 1
    while keep < r.size and floor < r[keep] < r[keep - 1]:
        keep += 1
    if keep < 2:
        if r.size >= 2:
            return float(r[1] / r[0]), 0
        return float("nan"), 0
    ratios = r[1:keep] / r[: keep - 1]
    return float(ratios.max()), keep - 1


def picard_iterate(
    u0: Field,
    params: ModelParams,
    K: int,
    T: float,
    dt: float,
    *,
    snapshot_times=None,
    working_norm: str = "L2",
) -> PicardReport:
    """Iterate v -> Phi(v) = e^{itD} u0 - i int_0^t e^{-a(p-1)s} e^{i(t-s)D} F(v(s)) ds.

    The time integral is the trapezoid rule on the grid ``0, dt, ..., T``.
    Divergence is reported through the residuals, never raised.
    """
    if K < 2:
        raise ValueError(f"need at least 2 Picard iterations, got {K}")
    if u0.space != PHYSICAL:
        raise ValueError("initial data must be a physical-space field")
    M = check_multiple("T", T, dt)
    grid = u0.grid
    axes = tuple(range(-grid.dim, 0))
    xi2 = grid.fft_xi_sq
    times = dt * np.arange(M + 1)
    snaps = np.atleast_1d(np.asarray(T if snapshot_times is None else snapshot_times, float))
    snap_idx = [int(round(s / dt)) for s in snaps]
    if any(i < 0 or i > M or not np.isclose(i * dt, s) for i, s in zip(snap_idx, snaps)):
        raise ValueError("snapshot times must lie on the quadrature grid")
    weight = (1.0 + times**2) ** (-grid.dim / 2)
    c = params.nonlinear_rate

    u0_raw = np.fft.fftn(u0.samples, axes=axes)
    V = np.empty((M + 1,) + grid.shape, dtype=complex)
    for m, t in enumerate(times):
        V[m] = np.exp(-1j * t * xi2) * u0_raw

    def snapshot(arr):
        return np.array([np.fft.ifftn(arr[i], axes=axes) for i in snap_idx])

    iterates = [snapshot(V)]
    residuals = []
    for _ in range(K):
        new = np.empty_like(V)
        acc = np.zeros(grid.shape, dtype=complex)
        prev = None
        for m, t in enumerate(times):
            frame = np.exp(-1j * t * xi2)
            w = np.fft.ifftn(V[m], axes=axes)
            g = math.exp(-c * t) * frame.conj() * np.fft.fftn(nonlinearity(w, params), axes=axes)
            if prev is not None:
                acc += 0.5 * dt * (prev + g)
            prev = g
            new[m] = frame * (u0_raw - 1j * acc)
        res = max(weight[m] * _working_norm(grid, new[m] - V[m], working_norm) for m in range(M + 1))
        residuals.append(res)
        V = new
        iterates.append(snapshot(V))
        if not np.isfinite(res):
            logger.warning("Picard iteration produced non-finite residual; stopping")
            break

    size = max(weight[m] * _working_norm(grid, V[m], working_norm) for m in range(M + 1))
    floor = 8 * np.finfo(float).eps * size
    factor, steps = fit_contraction(np.array(residuals), floor)
    return PicardReport(
        grid=grid,
        snapshot_times=snaps,
        iterates=iterates,
        residuals=np.array(residuals),
        contraction_factor=factor,
        geometric_steps=steps,
        working_norm=working_norm,
    )


# ---------------------------------------------------------------------------
# Decay monitors against their envelopes


@dataclass(frozen=True)
class DecayReport:
    mode: str
    envelope: str
    times: np.ndarray
    ratio: np.ndarray
    running_sup: np.ndarray

    @property
    def sup(self) -> float:
        return float(self.running_sup[-1]) if self.running_sup.size else 0.0

    def growth(self, t_from: float, t_to: float) -> float:
        """Relative increase of the running sup between two times."""
        i = int(np.argmin(np.abs(self.times - t_from)))
        j = int(np.argmin(np.abs(self.times - t_to)))
        a, b = self.running_sup[i], self.running_sup[j]
        if a == 0:
            return 0.0 if b == 0 else float("inf")
        return float(b / a - 1.0)


def decay_check(
    traj: Trajectory,
    mode: str,
    *,
    envelope: str = "sdge",
    window: tuple[float, float] | None = None,
) -> DecayReport:
    """Monitor divided by its theoretical envelope, with its running sup.

    ``envelope="sdge"`` uses the small-data bounds (<t>^{n/2} e^{-at} for the
    M11 norm of u, e^{-at} for the Sigma norm of the pullback of u);
    ``envelope="assumption"`` uses the decay hypotheses of the sharp-rate
    theorems (exp(-(ap+eps)/(2p-1) t) for M11, e^{-at} for Sigma).
    """
    p = traj.params
    t = np.asarray(traj.times)
    if mode == M11:
        if "M11" not in traj.monitors:
            raise ValueError("trajectory has no M11 monitor")
        u_norm = traj.monitors["M11"] * np.exp(-p.damping * t)
        if envelope == "sdge":
            env = (1 + t**2) ** (p.dim / 4) * np.exp(-p.damping * t)
        elif envelope == "assumption":
            env = np.exp(-p.assumption_rate * t)
        else:
            raise ValueError(f"unknown envelope {envelope!r}")
        ratio = u_norm / env
    elif mode == SIGMA:
        if "sigma_pullback" not in traj.monitors:
            raise ValueError("trajectory has no sigma_pullback monitor")
        if envelope not in ("sdge", "assumption"):
            raise ValueError(f"unknown envelope {envelope!r}")
        # ||e^{-itD} u||_Sigma / e^{-at} is the Sigma norm of the gauged pullback
        ratio = np.array(traj.monitors["sigma_pullback"], dtype=float)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if window is not None:
        keep = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, ratio = t[keep], ratio[keep]
    return DecayReport(mode, envelope, t, ratio, np.maximum.accumulate(ratio) if ratio.size else ratio)
