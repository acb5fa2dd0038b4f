"""
orbits.py
---------
Classical motion inside a polariton band and the WKB states built on it.

`classical_orbit` follows the band-1 (or band-4) trajectory launched from x0
with zero band momentum, i.e. at eps = V^l_1(x0). Localized orbits stay on one
side of the barrier; the boundary between the two behaviours is x0 = x_m, the
hump of V^l_1, which gives the phase boundary in the (x0, g) plane.

`wkb_wavefunction` assembles the leading-order WKB profile of one band
component from its turning points: oscillating inside the allowed interval,
decaying outside it, with the staggered continuation e^{i pi x / 2h} on the
side where the momentum reaches pi/2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..config import ModelParams
from ..errors import DomainError
from .bands import (
    DELOCALIZED,
    LOCALIZED,
    MIDDLE,
    _check_band,
    _check_x,
    _phi,
    _phi_hat,
    _ratio,
    action_S,
    integrate_to_turning,
    potential,
    turning_points,
)
from .quantization import quantization_functional, wrap_pi

_log = logging.getLogger("jcdm.wkb")

_ORBIT_GRID = 4001
_EXTREMUM_SLOPE = 1e-7
_WALL = 1e-12


# ── Phase boundary ───────────────────────────────────────────────────────── #

def barrier_position(J_over_gprime: float) -> float:
    """x_m = sqrt((4r^2 - 1) / (4r^4)), the hump of V^l_1 for 1/2 < r <= 1/sqrt(2)."""
    r = J_over_gprime
    if not 0.5 < r <= 1.0 / math.sqrt(2.0) + 1e-12:
        raise DomainError(f"V^l_1 has an interior maximum only for 1/2 < J/g' <= 1/sqrt(2), got {r}")
    return min(1.0, math.sqrt((4.0 * r * r - 1.0) / (4.0 * r ** 4)))


def phase_boundary(x0: float) -> float:
    """Critical g/(J sqrt(2N)) above which an orbit started at x0 stays localized."""
    if not 0.0 < x0 <= 1.0:
        raise DomainError(f"Initial imbalance must lie in (0, 1], got {x0}")
    return ((1.0 - math.sqrt(1.0 - x0 * x0)) / (2.0 * x0 * x0)) ** -0.5


# ── Classical band orbits ────────────────────────────────────────────────── #

@dataclass(frozen=True)
class OrbitSummary:
    x0: float
    eps: float
    lower: float
    upper: float
    period: float
    mean_x: float

    @property
    def localized(self) -> bool:
        return self.lower * self.upper > 0.0


def _speed(band: int, eps: float, x: float, params: ModelParams) -> float:
    r = _ratio(band, eps, x, params)
    return 2.0 * params.J * math.sqrt(max(0.0, 1.0 - x * x)) * math.sqrt(max(0.0, 1.0 - r * r))


def _allowed(band: int, eps: float, xs: np.ndarray, params: ModelParams) -> np.ndarray:
    lo = potential(band, "l", xs, params)
    hi = potential(band, "h", xs, params)
    return (lo <= eps) & (eps <= hi)


def classical_orbit(x0: float, params: ModelParams, band: int = 1) -> OrbitSummary:
    """Period T and time-averaged x of the orbit at eps = V^l(x0) (band 4: V^h(x0))."""
    if band not in (1, 4):
        raise DomainError(f"Classical orbits are launched in band 1 or 4, not {band}")
    if not -1.0 < x0 < 1.0:
        raise DomainError(f"x0 must lie strictly inside (-1, 1), got {x0}")
    if params.J == 0.0:
        raise DomainError("Band orbits need J > 0")
    edge = "l" if band == 1 else "h"
    eps = potential(band, edge, x0, params)
    d = 1e-6
    slope = (potential(band, edge, min(x0 + d, 1.0), params) - potential(band, edge, max(x0 - d, -1.0), params)) / (2 * d)
    if abs(slope) < _EXTREMUM_SLOPE * max(1.0, params.gprime + params.J):
        raise DomainError(f"x0={x0} sits at an extremum of V^{edge}_{band}; the orbit is a fixed point")

    # band 1 is allowed above V^l, band 4 below V^h: move downhill
    direction = -1.0 if (slope > 0.0) == (band == 1) else 1.0
    xs = np.linspace(-1.0, 1.0, _ORBIT_GRID)
    mask = _allowed(band, eps, xs, params)
    ahead = xs[xs > x0] if direction > 0 else xs[xs < x0][::-1]
    ok = mask[xs > x0] if direction > 0 else mask[xs < x0][::-1]
    far = ahead[-1]
    for k in range(1, len(ahead)):
        if not ok[k]:
            last, first_bad = ahead[k - 1], ahead[k]
            lo_edge = potential(band, "l", first_bad, params) > eps
            fn = (lambda x: potential(band, "l", x, params) - eps) if lo_edge \
                else (lambda x: potential(band, "h", x, params) - eps)
            a, b = sorted((last, first_bad))
            far = brentq(fn, a, b, xtol=1e-14) if fn(a) * fn(b) < 0.0 else first_bad
            break
    lower, upper = sorted((x0, far))

    inv = lambda x: 1.0 / max(_speed(band, eps, x, params), 1e-300)
    half_period = integrate_to_turning(inv, lower, upper, True, True)
    first_moment = integrate_to_turning(lambda x: x * inv(x), lower, upper, True, True)
    return OrbitSummary(x0=x0, eps=eps, lower=lower, upper=upper,
                        period=2.0 * half_period, mean_x=first_moment / half_period)


# ── First-order interband coupling ───────────────────────────────────────── #

def b_first_order(x: float, params: ModelParams) -> np.ndarray:
    """h-order hopping matrix B^(1)(x) in the polariton basis (bands 1..4)."""
    x = float(_check_x(x))
    if abs(x) >= 1.0:
        raise DomainError("B^(1) diverges at the hard walls x = +-1")
    c = params.J / (4.0 * math.sqrt(1.0 - x * x))
    p, m = c * (1.0 + x), c * (1.0 - x)
    return np.array([[0.0, p, m, 0.0],
                     [p, 0.0, 0.0, m],
                     [m, 0.0, 0.0, p],
                     [0.0, m, p, 0.0]])


def first_order_correction(band: int, eps: float, x: float, params: ModelParams,
                           amplitudes: Optional[np.ndarray] = None) -> float:
    """Magnitude of d_x S^(1)_i from the interband coupling.

    |cos 2 d_x S_j| equals |ratio_j| in allowed and forbidden regions alike, and
    |sin 2 d_x S_i| = sqrt|1 - ratio_i^2|. `amplitudes[j]` are the ratios
    alpha_j / alpha_i (all 1 when omitted).
    """
    _check_band(band)
    B1 = b_first_order(x, params)
    weights = np.ones(4) if amplitudes is None else np.abs(np.asarray(amplitudes, dtype=float))
    r_i = _ratio(band, eps, x, params)
    sin_term = math.sqrt(abs(1.0 - r_i * r_i))
    if sin_term < 1e-8:
        raise DomainError(f"x={x:.6g} is at a band-{band} turning point; the correction is singular there")
    two_b0 = params.J * math.sqrt(1.0 - x * x)
    total = 0.0
    for j in range(4):
        if j == band - 1 or B1[band - 1, j] == 0.0:
            continue
        r_j = _ratio(j + 1, eps, x, params)
        total += B1[band - 1, j] * weights[j] * abs(r_j)
    return total / (two_b0 * sin_term)


def correction_profile(band: int, eps: float, xs, params: ModelParams) -> np.ndarray:
    """h |d_x S^(1)| along a grid; NaN at turning points and the walls."""
    out = np.full(len(xs), np.nan)
    for k, x in enumerate(np.asarray(xs, dtype=float)):
        try:
            out[k] = params.h * first_order_correction(band, eps, float(x), params)
        except DomainError:
            continue
    return out


# ── WKB wavefunctions ────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class WkbProfile:
    band: int
    eps: float
    regime: str
    x: np.ndarray
    psi: np.ndarray


def _amplitude(band: int, eps: float, x: float, turns, params: ModelParams, layer: float) -> float:
    """|v|^(-1/2) with x held a boundary layer away from turning points and walls."""
    for t in turns:
        if abs(x - t) < layer:
            x = t + math.copysign(layer, x - t) if x != t else t - layer
    x = min(max(x, -1.0 + layer), 1.0 - layer)
    r = _ratio(band, eps, x, params)
    speed = 2.0 * params.J * math.sqrt(1.0 - x * x) * math.sqrt(abs(1.0 - r * r))
    return speed ** -0.5 if speed > 0.0 else 0.0


def _integral(fn, a: float, b: float, singular_a: bool, singular_b: bool) -> float:
    a, b = max(a, -1.0 + _WALL), min(b, 1.0 - _WALL)
    if a <= b:
        return integrate_to_turning(fn, a, b, singular_a, singular_b)
    return integrate_to_turning(fn, b, a, singular_b, singular_a)


def _well(band: int, eps: float, params: ModelParams, xs: np.ndarray, z_in: float, z_out: float) -> np.ndarray:
    """One-well profile on [z_in, z_out] (V^h at z_in, V^l at z_out, either order)."""
    h = params.h
    layer = h ** (2.0 / 3.0)
    turns = (z_in, z_out)
    phi = lambda x: _phi(band, eps, x, params)
    rate = lambda x: _phi_hat(band, eps, x, params)
    span = _integral(phi, z_in, z_out, True, True) / h
    lo, hi = sorted(turns)
    out = np.empty(len(xs))
    for k, x in enumerate(xs):
        amp = _amplitude(band, eps, float(x), turns, params, layer)
        if lo <= x <= hi:
            out[k] = 2.0 * amp * math.cos(_integral(phi, float(x), z_out, False, True) / h - 0.25 * math.pi)
        elif (x - z_out) * (z_out - z_in) > 0.0:
            out[k] = amp * math.exp(-_integral(rate, z_out, float(x), True, False) / h)
        else:
            decay = math.exp(-_integral(rate, float(x), z_in, False, True) / h)
            out[k] = 2.0 * amp * decay * math.cos(span - 0.25 * math.pi - 0.5 * math.pi * (x - z_in) / h)
    return out


def _delocalized(band: int, eps: float, params: ModelParams, xs: np.ndarray, z_l: float) -> np.ndarray:
    h = params.h
    layer = h ** (2.0 / 3.0)
    turns = (-z_l, z_l)
    phi = lambda x: _phi(band, eps, x, params)
    rate = lambda x: _phi_hat(band, eps, x, params)
    n = int(round((action_S(band, eps, params, DELOCALIZED) / h - 0.5 * math.pi) / math.pi))
    out = np.empty(len(xs))
    for k, x in enumerate(xs):
        amp = _amplitude(band, eps, float(x), turns, params, layer)
        if -z_l <= x <= z_l:
            out[k] = 2.0 * amp * math.cos(_integral(phi, -z_l, float(x), True, False) / h - 0.25 * math.pi)
        elif x > z_l:
            out[k] = (-1) ** n * amp * math.exp(-_integral(rate, z_l, float(x), True, False) / h)
        else:
            out[k] = amp * math.exp(-_integral(rate, float(x), -z_l, False, True) / h)
    return out


def _band4(eps: float, params: ModelParams, xs: np.ndarray, parity: Optional[int]):
    geo = turning_points(4, eps, params)
    if geo.z_h is None:
        return DELOCALIZED, _delocalized(4, eps, params, xs, geo.z_l)
    if parity is None:
        plus = abs(wrap_pi(quantization_functional(4, LOCALIZED, eps, params, branch=1)))
        minus = abs(wrap_pi(quantization_functional(4, LOCALIZED, eps, params, branch=-1)))
        parity = -1 if plus < minus else 1
    right = _well(4, eps, params, xs, geo.z_h, geo.z_l)
    left = _well(4, eps, params, -xs, geo.z_h, geo.z_l)
    return LOCALIZED, right + parity * left


def stagger(xs: np.ndarray, params: ModelParams) -> np.ndarray:
    """e^{i pi Z/2} made real: +-1 alternating along the lattice."""
    phase = 0.5 * math.pi * np.asarray(xs) * params.N
    return np.cos(phase) + np.sin(phase)


def wkb_wavefunction(band: int, eps: float, params: ModelParams, xs=None,
                     parity: Optional[int] = None) -> WkbProfile:
    """Leading-order WKB profile of band component `band` at eps, unit sum of squares.

    Defaults to the lattice x = Z/N. Band 1 follows from band 4 at -eps by
    staggering; band 3 is band 2 reflected.
    """
    _check_band(band)
    if xs is None:
        xs = np.arange(-params.N, params.N + 1, 2) / params.N
    xs = np.asarray(xs, dtype=float)
    if band == 4:
        regime, psi = _band4(eps, params, xs, parity)
    elif band == 1:
        regime, psi = _band4(-eps, params, xs, parity)
        psi = stagger(xs, params) * psi
    else:
        geo = turning_points(2, eps, params)
        grid = xs if band == 2 else -xs
        regime, psi = MIDDLE, _well(2, eps, params, grid, geo.z_h, geo.z_l)
    norm = math.sqrt(float(np.sum(psi * psi)))
    if not norm > 0.0:
        raise DomainError(f"WKB profile of band {band} at eps={eps:.12g} vanishes on the grid")
    return WkbProfile(band=band, eps=eps, regime=regime, x=xs, psi=psi / norm)
