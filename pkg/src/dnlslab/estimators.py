"""scikit-learn style wrappers around the solver and analysis routines.

The numerical core works on :class:`~dnlslab.spectral.Field` objects; these
classes accept plain arrays so the lab plugs into pipelines, grid searches
and ``get_params``/``set_params`` tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .modspace import TFLattice, WindowSpec, m11_norm
from .propagators import propagate_samples
from .scattering import ErrorCurve, error_curve, extract_phi, fit_rate
from .solver import SIGMA, ModelParams, simulate
from .spectral import PHYSICAL, Field, NormSpec, make_grid


def _as_times(X) -> np.ndarray:
    t = np.asarray(X, dtype=float)
    if t.ndim == 2:
        if t.shape[1] != 1:
            raise ValueError(f"expected a single time column, got shape {t.shape}")
        t = t[:, 0]
    if t.ndim != 1:
        raise ValueError(f"expected times as a 1-D array or one column, got shape {t.shape}")
    return t


class DecayRateRegressor(RegressorMixin, BaseEstimator):
    """Fit E(t) = C t^-gamma e^-delta t by least squares in log space.

    ``X`` holds times (one column), ``y`` the positive error values.
    """

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y):
        t = _as_times(X)
        e = np.asarray(y, dtype=float)
        window = self.window if self.window is not None else (float(t.min()), float(t.max()))
        self.fit_ = fit_rate(ErrorCurve(t, e, NormSpec("L2")), window)
        self.C_ = self.fit_.C
        self.gamma_ = self.fit_.gamma
        self.delta_ = self.fit_.delta
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(_as_times(X))


class DampedNLSScattering(BaseEstimator):
    """Simulate from initial samples, extract the scattering state, fit the rate.

    ``fit(X)`` takes the initial data u0 sampled on the grid described by
    ``dim``, ``points_per_axis`` and ``box_length`` (a flat array or one of
    grid shape). After fitting, ``predict(t)`` returns the asymptotic profile
    e^{-at} e^{itD} phi at each requested time (shape ``(len(t),) + grid``).
    """

    def __init__(
        self,
        dim=1,
        power=3.0,
        damping=1.0,
        sign=1,
        margin=None,
        points_per_axis=4096,
        box_length=256.0,
        horizon=16.0,
        dt=1e-3,
        monitor_every=0.1,
        mode=SIGMA,
        extraction_tol=1e-6,
        fit_window=None,
        trust_factor=2.0,
    ):
        self.dim = dim
        self.power = power
        self.damping = damping
        self.sign = sign
        self.margin = margin
        self.points_per_axis = points_per_axis
        self.box_length = box_length
        self.horizon = horizon
        self.dt = dt
        self.monitor_every = monitor_every
        self.mode = mode
        self.extraction_tol = extraction_tol
        self.fit_window = fit_window
        self.trust_factor = trust_factor

    def _params(self) -> ModelParams:
        return ModelParams(self.dim, self.power, self.damping, self.sign, self.margin)

    def fit(self, X, y=None):
        params = self._params()
        params.check_mode(self.mode)
        grid = make_grid(self.dim, self.points_per_axis, self.box_length)
        u0 = Field(grid, np.asarray(X, dtype=complex).reshape(grid.shape), PHYSICAL)
        monitors = ("L2", "Linf", "Hs", "sigma_pullback")
        self.trajectory_ = simulate(
            u0, params, self.horizon, self.dt, monitor_every=self.monitor_every, monitors=monitors
        )
        self.scattering_state_ = extract_phi(self.trajectory_, self.mode, self.extraction_tol)
        self.error_curve_ = error_curve(
            self.trajectory_, self.scattering_state_, "L2", trust_factor=self.trust_factor
        )
        positive = self.error_curve_.values > 0
        if np.count_nonzero(positive[1:]) >= 10:
            self.rate_fit_ = fit_rate(self.error_curve_, self.fit_window)
        else:
            self.rate_fit_ = None
        self.grid_ = grid
        return self

    def predict(self, X):
        check_is_fitted(self, "scattering_state_")
        t = _as_times(X)
        phi = self.scattering_state_.phi.samples
        return np.array(
            [np.exp(-self.damping * s) * propagate_samples(self.grid_, phi, s) for s in t]
        )


class ModulationNormTransformer(TransformerMixin, BaseEstimator):
    """Map rows of samples (one field per row) to their M^{1,1} estimate."""

    def __init__(self, dim=1, points_per_axis=256, box_length=64.0, window_sigma=1.0, xi_stride=None):
        self.dim = dim
        self.points_per_axis = points_per_axis
        self.box_length = box_length
        self.window_sigma = window_sigma
        self.xi_stride = xi_stride

    def fit(self, X, y=None):
        self.grid_ = make_grid(self.dim, self.points_per_axis, self.box_length)
        self.window_ = WindowSpec.gaussian(self.window_sigma)
        self.lattice_ = TFLattice.for_grid(self.grid_, self.window_, xi_stride=self.xi_stride)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        rows = np.asarray(X, dtype=complex).reshape(-1, self.grid_.size)
        out = [
            m11_norm(Field(self.grid_, r.reshape(self.grid_.shape), PHYSICAL), self.window_, self.lattice_)
            for r in rows
        ]
        return np.array(out)[:, None]


__all__ = ["DampedNLSScattering", "DecayRateRegressor", "ModulationNormTransformer"]
