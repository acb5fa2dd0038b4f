"""Semiclassical polariton-band machinery."""

from .bands import (
    BANDS,
    CRITICAL,
    DELOCALIZED,
    LOCALIZED,
    MIDDLE,
    ActionPair,
    BandGeometry,
    action_Q,
    action_S,
    actions,
    b0,
    band_of_energy,
    classify,
    critical_energy,
    envelope,
    momentum_allowed,
    momentum_forbidden,
    momentum_tilde,
    potential,
    turning_points,
    turning_points_closed_form,
    w_diag,
)
from .quantization import (
    ChiPair,
    Level,
    SplittingEstimate,
    complex_log_gamma,
    critical_chi,
    level_spacing,
    predicted_splitting,
    quantization_functional,
    quantization_residual,
    solve_levels,
)
from .orbits import (
    OrbitSummary,
    WkbProfile,
    b_first_order,
    barrier_position,
    classical_orbit,
    correction_profile,
    first_order_correction,
    phase_boundary,
    wkb_wavefunction,
)

__all__ = [
    "BANDS",
    "DELOCALIZED",
    "LOCALIZED",
    "CRITICAL",
    "MIDDLE",
    "BandGeometry",
    "ActionPair",
    "w_diag",
    "b0",
    "potential",
    "envelope",
    "critical_energy",
    "classify",
    "band_of_energy",
    "momentum_allowed",
    "momentum_forbidden",
    "momentum_tilde",
    "turning_points",
    "turning_points_closed_form",
    "action_S",
    "action_Q",
    "actions",
    "ChiPair",
    "Level",
    "SplittingEstimate",
    "complex_log_gamma",
    "critical_chi",
    "quantization_functional",
    "quantization_residual",
    "solve_levels",
    "level_spacing",
    "predicted_splitting",
    "OrbitSummary",
    "WkbProfile",
    "classical_orbit",
    "phase_boundary",
    "barrier_position",
    "b_first_order",
    "first_order_correction",
    "correction_profile",
    "wkb_wavefunction",
]
