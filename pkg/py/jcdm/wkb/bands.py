"""
bands.py
--------
Classical polariton bands of the Fock-space tight-binding chain.

In the polariton basis |n,+-> the on-site term is diagonal,

    W_ii(x) = g' (s_L sqrt(1+x) + s_R sqrt(1-x)),   (s_L, s_R) per band,

and the hopping is B0(x) = (J/2) sqrt(1-x^2) to leading order in h = 1/N.
Each band i is then a one-dimensional classical system

    H_i(x, phi) = W_ii(x) - J sqrt(1-x^2) cos(2 phi)

confined between V^l = W - J sqrt(1-x^2) (phi = 0) and V^h = W + J sqrt(1-x^2)
(phi = pi/2).

Bands 1 and 4 are even in x and mirror each other under eps -> -eps; bands 2
and 3 are mirror images under x -> -x. Turning points follow an outer/inner
convention: `z_l` is the outer turning point and `z_h` the inner one, so band 1
geometry at eps equals band 4 geometry at -eps. For the middle bands `z_l` and
`z_h` are signed positions of the V^l and V^h crossings.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from ..config import ModelParams
from ..errors import DomainError, NumericalError

_log = logging.getLogger("jcdm.wkb")

BANDS = (1, 2, 3, 4)
BAND_NAMES = {1: "upper-upper", 2: "upper-lower", 3: "lower-upper", 4: "lower-lower"}
_SIGNS = {1: (1.0, 1.0), 2: (1.0, -1.0), 3: (-1.0, 1.0), 4: (-1.0, -1.0)}

DELOCALIZED, LOCALIZED, CRITICAL, MIDDLE = "delocalized", "localized", "critical", "middle"
REGIMES = (DELOCALIZED, LOCALIZED, CRITICAL, MIDDLE)

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
_RATIO_SLACK = 1e-12
_ROOT_SAMPLES = 512


def _check_band(band: int) -> int:
    if band not in _SIGNS:
        raise DomainError(f"Unknown band {band!r}; expected one of {BANDS}")
    return band


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise DomainError(f"Position x must lie in [-1, 1], got {x.min():.6g}..{x.max():.6g}")
    return np.clip(x, -1.0, 1.0)


def _as_output(value, like):
    return float(value) if np.ndim(like) == 0 else value


# ── Band functions ───────────────────────────────────────────────────────── #

def w_diag(band: int, x, params: ModelParams):
    """Polariton on-site energy W_ii(x)."""
    s_L, s_R = _SIGNS[_check_band(band)]
    xs = _check_x(x)
    value = params.gprime * (s_L * np.sqrt(1.0 + xs) + s_R * np.sqrt(1.0 - xs))
    return _as_output(value, x)


def b0(x, params: ModelParams):
    """Leading-order hopping B0(x) = (J/2) sqrt(1 - x^2)."""
    xs = _check_x(x)
    return _as_output(0.5 * params.J * np.sqrt(1.0 - xs * xs), x)


def potential(band: int, edge: str, x, params: ModelParams):
    """Band edges V^l (edge 'l', phi = 0) and V^h (edge 'h', phi = pi/2)."""
    if edge not in ("l", "h"):
        raise DomainError(f"Edge must be 'l' or 'h', got {edge!r}")
    sign = -1.0 if edge == "l" else 1.0
    xs = _check_x(x)
    value = np.asarray(w_diag(band, xs, params)) + sign * params.J * np.sqrt(1.0 - xs * xs)
    return _as_output(value, x)


def band_hamiltonian(band: int, x, phi, params: ModelParams):
    """Classical band energy H_i(x, phi); broadcasts over x and phi."""
    xs = _check_x(x)
    return np.asarray(w_diag(band, xs, params)) - params.J * np.sqrt(1.0 - xs * xs) * np.cos(2.0 * np.asarray(phi))


def velocity(band: int, eps: float, x: float, params: ModelParams) -> float:
    """|dx/dt| = 4 B0 |sin 2phi| on the energy shell."""
    r = _ratio(band, eps, x, params)
    return 4.0 * 0.5 * params.J * math.sqrt(max(0.0, 1.0 - x * x)) * math.sqrt(max(0.0, 1.0 - r * r))


def critical_energy(band: int, params: ModelParams) -> float:
    """Separatrix energy of the outer bands, +-(2g' - J)."""
    if band == 4:
        return params.J - 2.0 * params.gprime
    if band == 1:
        return 2.0 * params.gprime - params.J
    raise DomainError(f"Band {band} has no critical level")


def band_edge(params: ModelParams) -> float:
    """g' sqrt(2): where the outer bands meet the hard walls x = +-1."""
    return params.gprime * math.sqrt(2.0)


def envelope(band: int, params: ModelParams) -> Tuple[float, float]:
    """(min V^l, max V^h) over x in [-1, 1]."""
    gp, J = params.gprime, params.J
    if band == 4:
        return -2.0 * gp - J, -min(2.0 * gp - J, math.sqrt(2.0) * gp)
    if band == 1:
        return min(2.0 * gp - J, math.sqrt(2.0) * gp), 2.0 * gp + J
    _check_band(band)
    xs = np.linspace(-1.0, 1.0, 20001)
    lo = float(np.min(potential(band, "l", xs, params)))
    hi = float(np.max(potential(band, "h", xs, params)))
    return lo, hi


def quarter_phase_point(eps: float, params: ModelParams) -> Optional[float]:
    """|x| where W_ii(x) = eps, i.e. where phi = pi/4; None beyond |eps| = 2g'."""
    if params.gprime == 0.0:
        return None
    q = eps / (2.0 * params.gprime)
    if abs(q) > 1.0:
        return None
    return min(1.0, abs(eps) / params.gprime * math.sqrt(1.0 - q * q))


# ── Momenta ──────────────────────────────────────────────────────────────── #

def _ratio(band: int, eps: float, x: float, params: ModelParams) -> float:
    """(eps - W_ii) / (-2 B0): +1 on V^l, -1 on V^h."""
    s_L, s_R = _SIGNS[band]
    w = params.gprime * (s_L * math.sqrt(1.0 + x) + s_R * math.sqrt(max(0.0, 1.0 - x)))
    two_b0 = params.J * math.sqrt(max(0.0, 1.0 - x * x))
    if two_b0 == 0.0:
        diff = eps - w
        if diff == 0.0:
            return 0.0
        return math.copysign(math.inf, -diff)
    return (eps - w) / (-two_b0)


def _ratio_array(band: int, eps: float, x, params: ModelParams) -> np.ndarray:
    xs = _check_x(x)
    w = np.asarray(w_diag(band, xs, params))
    two_b0 = params.J * np.sqrt(1.0 - xs * xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (eps - w) / (-two_b0)
    return np.where(two_b0 == 0.0, np.where(eps == w, 0.0, np.copysign(np.inf, w - eps)), r)


def _phi(band: int, eps: float, x: float, params: ModelParams) -> float:
    return 0.5 * math.acos(min(1.0, max(-1.0, _ratio(band, eps, x, params))))


def _phi_tilde(band: int, eps: float, x: float, params: ModelParams) -> float:
    return 0.5 * math.acos(min(1.0, max(-1.0, -_ratio(band, eps, x, params))))


def _phi_hat(band: int, eps: float, x: float, params: ModelParams) -> float:
    return 0.5 * math.acosh(max(1.0, abs(_ratio(band, eps, x, params))))


def momentum_allowed(band: int, eps: float, x, params: ModelParams):
    """phi_i = 1/2 Arccos((eps - W_ii) / (-2 B0)) in [0, pi/2]."""
    r = _ratio_array(_check_band(band), eps, x, params)
    if np.any(np.abs(r) > 1.0 + _RATIO_SLACK):
        raise DomainError(f"Band {band} at eps={eps:.12g} is classically forbidden at some x")
    return _as_output(0.5 * np.arccos(np.clip(r, -1.0, 1.0)), x)


def momentum_tilde(band: int, eps: float, x, params: ModelParams):
    """phi~_i = 1/2 Arccos((eps - W_ii) / (+2 B0)); vanishes on V^h."""
    r = _ratio_array(_check_band(band), eps, x, params)
    if np.any(np.abs(r) > 1.0 + _RATIO_SLACK):
        raise DomainError(f"Band {band} at eps={eps:.12g} is classically forbidden at some x")
    return _as_output(0.5 * np.arccos(np.clip(-r, -1.0, 1.0)), x)


def momentum_forbidden(band: int, eps: float, x, params: ModelParams):
    """Decay rate phi^_i = 1/2 arccosh|ratio| where |ratio| >= 1.

    ratio >= 1 lies below V^l, ratio <= -1 above V^h (the outer-band barrier).
    """
    r = _ratio_array(_check_band(band), eps, x, params)
    if np.any(np.abs(r) < 1.0 - _RATIO_SLACK):
        raise DomainError(f"Band {band} at eps={eps:.12g} is classically allowed at some x")
    return _as_output(0.5 * np.arccosh(np.maximum(1.0, np.abs(r))), x)


# ── Turning points ───────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class BandGeometry:
    band: int
    eps: float
    z_l: float
    z_h: Optional[float]
    y_r: Optional[float]
    regime: str


def _roots(fn: Callable[[float], float], a: float, b: float) -> List[float]:
    """All sign changes of fn on [a, b], refined by Brent's method.

    fn must accept arrays; the scan is a single vectorized evaluation.
    """
    xs = np.linspace(a, b, _ROOT_SAMPLES + 1)
    fs = np.asarray(fn(xs), dtype=float)
    roots: List[float] = []
    for k in range(len(xs)):
        if fs[k] == 0.0:
            roots.append(float(xs[k]))
        elif k + 1 < len(xs) and fs[k] * fs[k + 1] < 0.0:
            roots.append(brentq(fn, xs[k], xs[k + 1], xtol=1e-15, rtol=4.0 * np.finfo(float).eps))
    return sorted(set(roots))


def critical_window(params: ModelParams, c: float = 1.0) -> float:
    """Half-width c (J/N) log N of the window where the critical rule applies."""
    return c * params.J / params.N * math.log(max(params.N, 2))


def has_separatrix(params: ModelParams) -> bool:
    """Hyperbolic point of the outer bands exists only for J/g' < 1/2."""
    return params.gprime > 2.0 * params.J > 0.0


def classify(band: int, eps: float, params: ModelParams, window_c: float = 1.0) -> str:
    """Regime of an energy within a band."""
    _check_band(band)
    if band in (2, 3):
        return MIDDLE
    eps_c = critical_energy(band, params)
    if has_separatrix(params) and abs(eps - eps_c) <= critical_window(params, window_c):
        return CRITICAL
    above = eps > eps_c
    return DELOCALIZED if above == (band == 1) else LOCALIZED


def band_of_energy(eps: float, params: ModelParams) -> int:
    """Outer band above/below +-g' sqrt(2), middle band (2) in between."""
    edge = band_edge(params)
    if eps > edge:
        return 1
    if eps < -edge:
        return 4
    return 2


def turning_points(band: int, eps: float, params: ModelParams, window_c: float = 1.0) -> BandGeometry:
    """Turning points, quarter-phase point and regime at energy eps."""
    _check_band(band)
    lo, hi = envelope(band, params)
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    if not lo - tol <= eps <= hi + tol:
        raise DomainError(f"eps={eps:.12g} is outside the band-{band} envelope [{lo:.12g}, {hi:.12g}]")
    y_r = quarter_phase_point(eps, params)

    if band in (1, 4):
        outer, inner = ("l", "h") if band == 4 else ("h", "l")
        sign = 1.0 if band == 4 else -1.0
        f_outer = lambda x: sign * (potential(band, outer, x, params) - eps)
        roots = _roots(f_outer, 0.0, 1.0)
        z_l = roots[0] if roots else 1.0
        f_inner = lambda x: sign * (potential(band, inner, x, params) - eps)
        inner_roots = [z for z in _roots(f_inner, 0.0, 1.0) if z <= z_l]
        # no inner crossing when eps is on the delocalized side of the barrier top
        z_h = inner_roots[-1] if inner_roots and sign * (critical_energy(band, params) - eps) < 0.0 else None
        if z_h is not None and z_h == 0.0:
            z_h = None
        return BandGeometry(band, eps, z_l, z_h, y_r, classify(band, eps, params, window_c))

    mirror = 1.0 if band == 2 else -1.0
    f_l = lambda x: potential(2, "l", x, params) - eps
    f_h = lambda x: potential(2, "h", x, params) - eps
    roots_l = _roots(f_l, -1.0, 1.0)
    roots_h = _roots(f_h, -1.0, 1.0)
    z_l2 = roots_l[-1] if roots_l else 1.0
    z_h2 = roots_h[0] if roots_h else -1.0
    return BandGeometry(band, eps, mirror * z_l2, mirror * z_h2, y_r, MIDDLE)


def turning_points_closed_form(band: int, edge: str, eps: float, params: ModelParams) -> List[float]:
    """|x| >= 0 solving V^edge_band(x) = eps from the quadratic in u = sqrt(1-x^2).

    Squaring eps = s g' D(x) + t J u with D^2 = 2 + 2k u gives
    J^2 u^2 - 2(t eps J + k g'^2) u + eps^2 - 2 g'^2 = 0. Only roots that solve
    the unsquared equation are returned.
    """
    _check_band(band)
    gp, J = params.gprime, params.J
    if J == 0.0:
        raise DomainError("Closed-form turning points need J > 0")
    t = -1.0 if edge == "l" else 1.0
    k = 1.0 if band in (1, 4) else -1.0
    p = t * eps * J + k * gp * gp
    disc = p * p - J * J * (eps * eps - 2.0 * gp * gp)
    if disc < 0.0:
        return []
    found: List[float] = []
    for u in ((p + math.sqrt(disc)) / (J * J), (p - math.sqrt(disc)) / (J * J)):
        if not -1e-12 <= u <= 1.0 + 1e-12:
            continue
        x = math.sqrt(max(0.0, 1.0 - min(1.0, max(0.0, u)) ** 2))
        for candidate in (x, -x):
            if abs(potential(band, edge, candidate, params) - eps) < 1e-9 * max(1.0, abs(eps)):
                found.append(abs(candidate))
    return sorted(set(round(z, 14) for z in found))


# ── Action integrals ─────────────────────────────────────────────────────── #

def integrate_to_turning(fn: Callable[[float], float], a: float, b: float,
                         singular_a: bool = False, singular_b: bool = False) -> float:
    """Integral of fn over [a, b] with square-root behaviour at flagged ends.

    Near a flagged end the substitution x = end -+ s^2 makes the integrand
    analytic, so both sqrt(end - x) and 1/sqrt(end - x) are handled.
    """
    if b <= a:
        return 0.0
    if singular_a and singular_b:
        mid = 0.5 * (a + b)
        return integrate_to_turning(fn, a, mid, True, False) + integrate_to_turning(fn, mid, b, False, True)
    if singular_b:
        integrand, upper = (lambda s: 2.0 * s * fn(b - s * s)), math.sqrt(b - a)
    elif singular_a:
        integrand, upper = (lambda s: 2.0 * s * fn(a + s * s)), math.sqrt(b - a)
    else:
        integrand, upper = fn, None
    lo, hi = (0.0, upper) if upper is not None else (a, b)
    value, abserr, info, *message = quad(integrand, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                         limit=400, full_output=1)
    if message and abserr > 1e-9:
        raise NumericalError(f"Quadrature over [{a:.6g}, {b:.6g}] did not converge: {message[0]}")
    return value


def _outer_inner(band: int):
    """Momentum that vanishes at the outer / inner turning point."""
    return (_phi, _phi_tilde) if band == 4 else (_phi_tilde, _phi)


@dataclass(frozen=True)
class ActionPair:
    dS: float
    dQ: float


def action_S(band: int, eps: float, params: ModelParams, regime: Optional[str] = None,
             window_c: float = 1.0) -> float:
    """Regime-appropriate real action.

    delocalized   integral of the outer momentum over [-z_l, z_l]
    localized     effective one-well action with the quarter-phase shift
    critical      half-action over [0, z_l], momentum clipped inside the barrier
    middle        effective action of the single middle-band well
    """
    geo = turning_points(band, eps, params, window_c)
    regime = regime or (geo.regime if geo.regime != CRITICAL else (LOCALIZED if geo.z_h is not None else DELOCALIZED))
    if regime not in REGIMES:
        raise DomainError(f"Unknown regime {regime!r}")
    if (regime == MIDDLE) != (band in (2, 3)):
        raise DomainError(f"Regime {regime!r} does not apply to band {band}")

    if regime == MIDDLE:
        return _middle_action(band, eps, geo, params)

    outer, inner = _outer_inner(band)
    f_out = lambda x: outer(band, eps, x, params)
    f_in = lambda x: inner(band, eps, x, params)

    if regime == DELOCALIZED:
        if geo.z_h is not None:
            raise DomainError(f"Band {band} at eps={eps:.12g} is localized, not delocalized")
        return 2.0 * integrate_to_turning(f_out, 0.0, geo.z_l, singular_b=True)

    if regime == CRITICAL:
        if geo.z_h is None:
            return integrate_to_turning(f_out, 0.0, geo.z_l, singular_b=True)
        return 0.5 * math.pi * geo.z_h + integrate_to_turning(f_out, geo.z_h, geo.z_l, True, True)

    if geo.z_h is None:
        raise DomainError(f"Band {band} at eps={eps:.12g} is delocalized, not localized")
    if geo.y_r is None:
        raise DomainError(f"Quarter-phase point undefined at eps={eps:.12g}")
    y_r = min(max(geo.y_r, geo.z_h), geo.z_l)
    return (integrate_to_turning(f_out, y_r, geo.z_l, singular_b=True)
            - integrate_to_turning(f_in, geo.z_h, y_r, singular_a=True)
            + 0.5 * math.pi * y_r)


def middle_offset_point(band: int, eps: float, params: ModelParams) -> float:
    """Signed position where W_ii = eps for the middle bands."""
    y = quarter_phase_point(eps, params)
    if y is None:
        raise DomainError(f"eps={eps:.12g} is outside the middle bands")
    return (1.0 if band == 2 else -1.0) * math.copysign(y, eps)


def _middle_action(band: int, eps: float, geo: BandGeometry, params: ModelParams) -> float:
    y = middle_offset_point(band, eps, params)
    f_phi = lambda x: _phi(band, eps, x, params)
    f_tilde = lambda x: _phi_tilde(band, eps, x, params)
    if band == 2:
        y = min(max(y, geo.z_h), geo.z_l)
        return (integrate_to_turning(f_phi, y, geo.z_l, singular_b=True)
                - integrate_to_turning(f_tilde, geo.z_h, y, singular_a=True))
    y = min(max(y, geo.z_l), geo.z_h)
    return (integrate_to_turning(f_phi, geo.z_l, y, singular_a=True)
            - integrate_to_turning(f_tilde, y, geo.z_h, singular_b=True))


def action_Q(band: int, eps: float, params: ModelParams, window_c: float = 1.0) -> float:
    """Tunneling action through the central barrier, integral over [-z_h, z_h]."""
    geo = turning_points(band, eps, params, window_c)
    if band not in (1, 4) or geo.z_h is None:
        raise DomainError(f"Band {band} at eps={eps:.12g} has no tunneling barrier")
    rate = lambda x: _phi_hat(band, eps, x, params)
    return 2.0 * integrate_to_turning(rate, 0.0, geo.z_h, singular_b=True)


def actions(band: int, eps: float, params: ModelParams, window_c: float = 1.0) -> ActionPair:
    """Real and tunneling actions of a localized outer-band energy."""
    return ActionPair(dS=action_S(band, eps, params, LOCALIZED, window_c),
                      dQ=action_Q(band, eps, params, window_c))
