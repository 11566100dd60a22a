"""Pseudospectral laboratory for scattering of the damped nonlinear Schrodinger equation."""

__version__ = "0.1.0"

from ._validation import HypothesisError
from .modspace import (
    CoverageError,
    TFLattice,
    WindowSpec,
    counterexample_field,
    kato_ponce_ratio,
    m11_norm,
    moment_expansion,
    stft_magnitude,
    xi1_moment_sq,
)
from .propagators import (
    BoxEscapeError,
    DilatedField,
    dispersive_ratio,
    free_propagate,
    mdfm_consistency,
    mdfm_propagate,
    trig_interpolate,
)
from .scattering import (
    ErrorCurve,
    ExtractionError,
    RateFit,
    ScatteringState,
    elemlem_check,
    error_curve,
    extract_phi,
    fit_rate,
    i2_norm,
    pullback_state,
    tail_integral,
)
from .solver import (
    DecayReport,
    ModelParams,
    PicardReport,
    Trajectory,
    decay_check,
    picard_iterate,
    simulate,
    strang_step,
)
from .special import upper_incomplete_gamma
from .spectral import Field, Grid, NormSpec, fourier_transform, make_grid, norm

__all__ = [
    "BoxEscapeError",
    "CoverageError",
    "DecayReport",
    "DilatedField",
    "ErrorCurve",
    "ExtractionError",
    "Field",
    "Grid",
    "HypothesisError",
    "ModelParams",
    "NormSpec",
    "PicardReport",
    "RateFit",
    "ScatteringState",
    "TFLattice",
    "Trajectory",
    "WindowSpec",
    "counterexample_field",
    "decay_check",
    "dispersive_ratio",
    "elemlem_check",
    "error_curve",
    "extract_phi",
    "fit_rate",
    "fourier_transform",
    "free_propagate",
    "i2_norm",
    "kato_ponce_ratio",
    "m11_norm",
    "make_grid",
    "mdfm_consistency",
    "mdfm_propagate",
    "moment_expansion",
    "norm",
    "picard_iterate",
    "pullback_state",
    "simulate",
    "stft_magnitude",
    "strang_step",
    "tail_integral",
    "trig_interpolate",
    "upper_incomplete_gamma",
    "xi1_moment_sq",
]
