"""Soliton formation in coupled-cavity arrays of Dicke ensembles."""

from .analysis import (
    Branch,
    DispersionPoint,
    NLSCoefficients,
    SolitonSpec,
    band_gap,
    dispersion_continuous,
    dispersion_discrete,
    fit_sech,
    group_velocity,
    measure_spectrum,
    nls_coefficients,
    packet_center,
    packet_width,
    soliton_envelope,
)
from .dynamics import IntegratorConfig, Trajectory, integrate, linearized_integrate
from .initcond import gaussian_packet, plane_wave, soliton_state
from .model import HPSeries, LatticeState, ModelParams, energy, eom_rhs, hp_coefficient, hp_series, total_norm

__version__ = "0.1.0"
