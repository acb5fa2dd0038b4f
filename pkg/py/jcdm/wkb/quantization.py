"""
quantization.py
---------------
Bohr-Sommerfeld rules for the polariton bands and what follows from them.

Every rule is written as a functional F(eps) that is a multiple of pi at a
quantized energy:

    delocalized   F = dS/h - pi/2
    localized     F = dS_eff/h -+ p exp(-dQ/h)        p = 1/4 (band 4), 1 (band 1)
    middle        F = (dS_eff +- (pi/2) y) / h         + for band 2, - for band 3

Near the separatrix of the outer bands the rule involves a parabolic-cylinder
connection and is written as the phase of

    z = exp(-2i dS_half/h) sqrt(2 pi) / Gamma(1/2 - i chi') - exp(pi chi'/2)

which must equal pi/2 mod pi. The Stirling part of arg Gamma is taken out of
the Gamma factor so that z reduces to the delocalized and localized rules far
from the separatrix; `literal=True` keeps it in.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import loggamma

from ..config import ModelParams
from ..errors import DomainError, NumericalError
from .bands import (
    CRITICAL,
    DELOCALIZED,
    LOCALIZED,
    MIDDLE,
    REGIMES,
    _check_band,
    action_Q,
    action_S,
    critical_energy,
    critical_window,
    envelope,
    has_separatrix,
    middle_offset_point,
)

_log = logging.getLogger("jcdm.wkb")

POLE_GUARD = 1e-12
DEFAULT_SAMPLES = 400
MAX_REFINEMENT = 40
FD_STEP_FRACTION = 1e-6


def wrap_pi(angle):
    """Map an angle onto [-pi/2, pi/2)."""
    return (np.asarray(angle) + 0.5 * math.pi) % math.pi - 0.5 * math.pi


def tunneling_prefactor(band: int) -> float:
    if band == 4:
        return 0.25
    if band == 1:
        return 1.0
    raise DomainError(f"Band {band} has no tunneling doublets")


# ── Gamma function ───────────────────────────────────────────────────────── #

def complex_log_gamma(z: complex) -> complex:
    """Principal-branch log Gamma(z)."""
    z = complex(z)
    if z.real <= 0.0:
        nearest = round(z.real)
        if abs(z - nearest) < POLE_GUARD:
            raise DomainError(f"log Gamma has a pole at {nearest}; got z={z}")
    value = complex(loggamma(z))
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NumericalError(f"log Gamma overflowed at z={z}")
    return value


# ── Critical rule ────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class ChiPair:
    via_mu: float
    via_gap: float


def critical_chi(band: int, eps: float, params: ModelParams) -> ChiPair:
    """chi = lambda / (2 mu J), also written lambda / sqrt(2J(g' - 2J)).

    lambda = N (eps - eps_c), mu = sqrt(g'/2J - 1). The two forms are the same
    number written differently.
    """
    if not has_separatrix(params):
        raise DomainError(f"No separatrix for J/g'={params.J_over_gprime:.6g}; the critical rule needs J/g' < 1/2")
    lam = params.N * (eps - critical_energy(band, params))
    mu = math.sqrt(params.gprime / (2.0 * params.J) - 1.0)
    via_gap = lam / math.sqrt(2.0 * params.J * (params.gprime - 2.0 * params.J))
    return ChiPair(via_mu=lam / (2.0 * mu * params.J), via_gap=via_gap)


def critical_argument(band: int, eps: float, params: ModelParams, literal: bool = False,
                      chi_form: str = "mu") -> complex:
    """z scaled by exp(-pi|chi|/2); its real part vanishes at quantized energies."""
    pair = critical_chi(band, eps, params)
    chi = pair.via_mu if chi_form == "mu" else pair.via_gap
    chi = chi if band == 4 else -chi
    half = action_S(band, eps, params, CRITICAL)
    scale = -0.5 * math.pi * abs(chi)
    log_first = -2j * half / params.h + 0.5 * math.log(2.0 * math.pi) - complex_log_gamma(0.5 - 1j * chi) + scale
    if not literal and chi != 0.0:
        log_first -= 1j * (chi * math.log(abs(chi)) - chi)
    return cmath.exp(log_first) - math.exp(0.5 * math.pi * chi + scale)


# ── Functionals and residuals ────────────────────────────────────────────── #

def _check_regime(band: int, regime: str) -> None:
    _check_band(band)
    if regime not in REGIMES:
        raise DomainError(f"Unknown regime {regime!r}")
    if (regime == MIDDLE) != (band in (2, 3)):
        raise DomainError(f"Regime {regime!r} does not apply to band {band}")


def quantization_functional(band: int, regime: str, eps: float, params: ModelParams, branch: int = 1,
                            middle_scaled: bool = True, literal: bool = False,
                            chi_form: str = "mu") -> float:
    """F(eps), a multiple of pi at quantized energies (critical: Re z, zero there).

    `branch` picks the -+ sign of the tunneling term of the localized rule.
    `middle_scaled=False` drops the 1/h on the middle-band offset.
    """
    _check_regime(band, regime)
    h = params.h
    if regime == DELOCALIZED:
        return action_S(band, eps, params, DELOCALIZED) / h - 0.5 * math.pi
    if regime == LOCALIZED:
        dS = action_S(band, eps, params, LOCALIZED)
        dQ = action_Q(band, eps, params)
        return dS / h - math.copysign(1.0, branch) * tunneling_prefactor(band) * math.exp(-dQ / h)
    if regime == MIDDLE:
        sigma = 1.0 if band == 2 else -1.0
        offset = sigma * 0.5 * math.pi * middle_offset_point(band, eps, params)
        dS = action_S(band, eps, params, MIDDLE)
        return (dS + offset) / h if middle_scaled else dS / h + offset
    return critical_argument(band, eps, params, literal, chi_form).real


def quantization_residual(band: int, regime: str, eps: float, params: ModelParams,
                          middle_scaled: bool = True, literal: bool = False,
                          chi_form: str = "mu") -> float:
    """Distance (radians) of the regime's rule from its nearest quantized value."""
    _check_regime(band, regime)
    if regime == CRITICAL:
        z = critical_argument(band, eps, params, literal, chi_form)
        return float(abs(wrap_pi(cmath.phase(z) - 0.5 * math.pi)))
    if regime == LOCALIZED:
        return float(min(abs(wrap_pi(quantization_functional(band, regime, eps, params, b))) for b in (1, -1)))
    F = quantization_functional(band, regime, eps, params, middle_scaled=middle_scaled)
    return float(abs(wrap_pi(F)))


# ── Level solver ─────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class Level:
    band: int
    regime: str
    n: int
    eps: float
    branch: int = 0


def regime_window(band: int, regime: str, params: ModelParams, window_c: float = 1.0) -> Tuple[float, float]:
    """Energy interval in which a regime's rule is solved."""
    _check_regime(band, regime)
    lo, hi = envelope(band, params)
    if regime == MIDDLE:
        return lo, hi
    eps_c = critical_energy(band, params)
    if regime == CRITICAL:
        w = critical_window(params, window_c)
        return max(lo, eps_c - w), min(hi, eps_c + w)
    below = (lo, min(hi, eps_c))
    above = (max(lo, eps_c), hi)
    if band == 4:
        return below if regime == DELOCALIZED else above
    return above if regime == DELOCALIZED else below


def _safe(fn, eps: float) -> float:
    try:
        return fn(eps)
    except DomainError:
        return math.nan


def _edge_value(fn, eps: float, inward: float) -> Tuple[float, float]:
    """fn at a window edge, nudged inward when the edge itself is singular."""
    for step in (0.0, 1e-12, 1e-9, 1e-6):
        e = eps + step * inward
        value = _safe(fn, e)
        if math.isfinite(value):
            return e, value
    return eps, math.nan


def _sample_intervals(fn, lo: float, hi: float, samples: int, max_step: float):
    """Consecutive (a, F(a), b, F(b)) covering [lo, hi]; F changes by at most max_step across each."""
    a0, f0 = _edge_value(fn, lo, hi - lo)
    b0, g0 = _edge_value(fn, hi, lo - hi)
    inner = np.linspace(a0, b0, samples + 2)[1:-1]
    xs = [a0, *inner.tolist(), b0]
    fs = [f0, *[_safe(fn, float(e)) for e in inner], g0]
    stack = list(zip(xs[:-1], fs[:-1], xs[1:], fs[1:], [0] * (len(xs) - 1)))[::-1]
    while stack:
        a, fa, b, fb, depth = stack.pop()
        if (depth < MAX_REFINEMENT and math.isfinite(fa) and math.isfinite(fb)
                and abs(fb - fa) > max_step and b - a > 1e-13 * (hi - lo)):
            m = 0.5 * (a + b)
            fm = _safe(fn, m)
            stack.append((m, fm, b, fb, depth + 1))
            stack.append((a, fa, m, fm, depth + 1))
            continue
        yield a, fa, b, fb


def _critical_levels(band: int, params: ModelParams, lo: float, hi: float, samples: int,
                     literal: bool) -> List[Tuple[float, int]]:
    fn = lambda e: quantization_functional(band, CRITICAL, e, params, literal=literal)
    roots: List[Tuple[float, int]] = []
    for a, fa, b, fb in _sample_intervals(fn, lo, hi, samples, math.inf):
        if not (math.isfinite(fa) and math.isfinite(fb)) or fa * fb > 0.0 or fb == 0.0:
            continue
        root = a if fa == 0.0 else brentq(fn, a, b, xtol=1e-14, rtol=1e-13)
        roots.append((root, len(roots)))
    return roots


def _integer_crossings(fn, lo: float, hi: float, samples: int) -> List[Tuple[float, int]]:
    """Energies where fn / pi passes an integer n, with that n.

    A value landing exactly on n pi at the window edge (a vanishing action)
    is not a level.
    """
    intervals = list(_sample_intervals(fn, lo, hi, samples, 0.25 * math.pi))
    start, stop = intervals[0][0], intervals[-1][2]
    roots = {}
    for a, fa, b, fb in intervals:
        if not (math.isfinite(fa) and math.isfinite(fb)):
            continue
        low, high = min(fa, fb), max(fa, fb)
        for n in range(math.ceil(low / math.pi), math.floor(high / math.pi) + 1):
            target = n * math.pi
            if fa == target:
                if a == start:
                    continue
                root = a
            elif fb == target:
                if b == stop:
                    continue
                root = b
            else:
                try:
                    root = brentq(lambda e: fn(e) - target, a, b, xtol=1e-14, rtol=1e-13)
                except DomainError:
                    continue
            roots.setdefault((n, round(root, 11)), root)
    return [(root, n) for (n, _), root in roots.items()]


def solve_levels(band: int, regime: str, params: ModelParams, n_range: Optional[Tuple[int, int]] = None,
                 samples: int = DEFAULT_SAMPLES, window: Optional[Tuple[float, float]] = None,
                 middle_scaled: bool = True, literal: bool = False) -> List[Level]:
    """Energies satisfying the regime's rule.

    F is sampled from edge to edge, refined until no step changes it by more
    than pi/4, and every crossing of an integer multiple of pi is solved with
    Brent's method. The critical rule is bracketed on sign changes of Re z.
    """
    _check_regime(band, regime)
    lo, hi = window or regime_window(band, regime, params)
    if not hi > lo:
        raise NumericalError(f"Band {band} {regime} window is empty: [{lo:.12g}, {hi:.12g}]")

    levels: List[Level] = []
    if regime == CRITICAL:
        for root, n in _critical_levels(band, params, lo, hi, samples, literal):
            levels.append(Level(band, regime, n, root, 0))
    else:
        for b in ([1, -1] if regime == LOCALIZED else [0]):
            fn = lambda e, b=b: quantization_functional(band, regime, e, params, branch=b or 1,
                                                        middle_scaled=middle_scaled)
            for root, n in _integer_crossings(fn, lo, hi, samples):
                levels.append(Level(band, regime, n, root, b))
    if n_range is not None:
        levels = [lv for lv in levels if n_range[0] <= lv.n <= n_range[1]]

    if not levels and n_range is None:
        raise NumericalError(f"Band {band} {regime}: the rule has no solution on [{lo:.12g}, {hi:.12g}]")
    levels.sort(key=lambda lv: lv.eps)
    _log.debug("band %d %s: %d levels on [%.6g, %.6g]", band, regime, len(levels), lo, hi)
    return levels


# ── Derivatives, spacing, splitting ──────────────────────────────────────── #

def action_derivative(band: int, regime: str, eps: float, params: ModelParams) -> float:
    """d(dS)/d(eps) by central difference with a step of 1e-6 band widths."""
    _check_regime(band, regime)
    lo, hi = envelope(band, params)
    step = FD_STEP_FRACTION * (hi - lo)
    base = LOCALIZED if regime == CRITICAL else regime
    return (action_S(band, eps + step, params, base) - action_S(band, eps - step, params, base)) / (2.0 * step)


def level_spacing(band: int, regime: str, eps: float, params: ModelParams) -> float:
    """Local level spacing pi h / |d(dS)/d(eps)| in eps units."""
    return math.pi * params.h / abs(action_derivative(band, regime, eps, params))


@dataclass(frozen=True)
class SplittingEstimate:
    eps: float
    dQ: float
    dS_prime: float
    delta_E: float
    delta_eps: float


def predicted_splitting(eps: float, params: ModelParams, band: int = 4) -> SplittingEstimate:
    """Tunneling splitting of the localized doublet at eps.

    delta_E = 2p exp(-dQ/h) / |d(dS_eff)/d(eps)| (p = 1/4 gives the familiar
    1/2 for band 4) and delta_eps = h delta_E.
    """
    dQ = action_Q(band, eps, params)
    dS_prime = action_derivative(band, LOCALIZED, eps, params)
    delta_E = 2.0 * tunneling_prefactor(band) * math.exp(-dQ / params.h) / abs(dS_prime)
    return SplittingEstimate(eps=eps, dQ=dQ, dS_prime=dS_prime, delta_E=delta_E, delta_eps=params.h * delta_E)
