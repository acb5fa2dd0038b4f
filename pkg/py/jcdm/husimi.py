"""
husimi.py
---------
Husimi-Kano Q portraits of lower-lower band eigenstates.

With x = Z/N and the band momentum theta as conjugate variables ([x, theta] =
ih, h = 1/N), a squeezed coherent state centred on (x, theta) has position
wavefunction (kappa^2/pi)^(1/4) exp(i x' theta / h - kappa^2 (x' - x)^2 / 2).
Projecting the band-4 component C_4(Z) of an eigenstate gives

    Q(x, theta) = kappa/sqrt(pi) |sum_Z C_4(Z) e^{i Z theta} e^{-kappa^2 (Z/N - x)^2 / 2}|^2

evaluated on the whole grid as one matrix product.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import contourpy
import numpy as np
from scipy import ndimage

from .config import ModelParams
from .errors import DomainError
from .spectra import EigenSolution
from .wkb.bands import band_hamiltonian, critical_energy, envelope

_log = logging.getLogger("jcdm.husimi")

GRID_POINTS = 201
MAX_LEAKAGE = 0.1
BAND4_DOMINANCE = 0.9


def kappa0(params: ModelParams) -> float:
    """(N^3 g^2 / 8 J^2)^(1/8), the squeezing matched to the harmonic ground state."""
    if params.J <= 0.0 or params.g <= 0.0:
        raise DomainError("kappa0 needs g > 0 and J > 0")
    return (params.N ** 3 * params.g ** 2 / (8.0 * params.J ** 2)) ** 0.125


def default_grid(points: int = GRID_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    return np.linspace(-1.0, 1.0, points), np.linspace(-0.5 * math.pi, 0.5 * math.pi, points)


@dataclass(frozen=True)
class HusimiGrid:
    x: np.ndarray
    theta: np.ndarray
    Q: np.ndarray
    kappa: float
    s: float
    leakage: float
    index: int = -1
    eps: float = math.nan

    def rows(self):
        for i, x in enumerate(self.x):
            for k, t in enumerate(self.theta):
                yield float(x), float(t), float(self.Q[i, k])


def husimi_q(sol: EigenSolution, n: int, params: ModelParams, s: float = 1.0,
             x: Optional[np.ndarray] = None, theta: Optional[np.ndarray] = None) -> HusimiGrid:
    """Q(x, theta) of eigenstate n from its lower-lower component, kappa = s kappa0."""
    if s < 1.0:
        raise DomainError(f"Squeeze tuning s must be >= 1, got {s}")
    c4 = sol.polariton_profile(n)[:, 3]
    leakage = float(1.0 - np.sum(c4 * c4))
    if leakage > MAX_LEAKAGE:
        raise DomainError(f"State {n} is not a lower-lower state: {leakage:.3f} of its weight is in other bands")
    gx, gt = default_grid()
    x = gx if x is None else np.asarray(x, dtype=float)
    theta = gt if theta is None else np.asarray(theta, dtype=float)

    kappa = s * kappa0(params)
    Z = sol.basis.z_values
    gauss = np.exp(-0.5 * kappa ** 2 * (Z[None, :] / params.N - x[:, None]) ** 2)
    phases = np.exp(1j * Z[:, None] * theta[None, :])
    amplitude = gauss @ (c4[:, None] * phases)
    Q = kappa / math.sqrt(math.pi) * np.abs(amplitude) ** 2
    return HusimiGrid(x=x, theta=theta, Q=Q, kappa=kappa, s=s, leakage=leakage,
                      index=n, eps=float(sol.eps[n]))


# ── Classical comparison ─────────────────────────────────────────────────── #

@dataclass(frozen=True)
class ContourLevel:
    eps: float
    lines: List[np.ndarray]


def classical_contours(params: ModelParams, energies: Sequence[float],
                       x: Optional[np.ndarray] = None, theta: Optional[np.ndarray] = None) -> List[ContourLevel]:
    """Level sets of H_4(x, theta) as (k, 2) polylines of (x, theta)."""
    gx, gt = default_grid()
    x = gx if x is None else np.asarray(x, dtype=float)
    theta = gt if theta is None else np.asarray(theta, dtype=float)
    X, T = np.meshgrid(x, theta)
    H = band_hamiltonian(4, X, T, params)
    generator = contourpy.contour_generator(x, theta, H, line_type="Separate")
    return [ContourLevel(float(e), list(generator.lines(float(e)))) for e in energies]


def harmonic_widths(params: ModelParams) -> Tuple[float, float]:
    """(sigma_x, sigma_theta) of the ground state of H_4 ~ 2J theta^2 + (g'/4 + J/2) x^2."""
    a = 2.0 * params.J
    b = 0.25 * params.gprime + 0.5 * params.J
    if a <= 0.0:
        raise DomainError("Harmonic widths need J > 0")
    h = params.h
    return math.sqrt(0.5 * h * math.sqrt(a / b)), math.sqrt(0.5 * h * math.sqrt(b / a))


def q_moment_prediction(params: ModelParams, s: float = 1.0) -> Tuple[float, float]:
    """Variances of Q for the harmonic ground state: state widths plus coherent-state blur."""
    sigma_x, sigma_t = harmonic_widths(params)
    kappa = s * kappa0(params)
    return sigma_x ** 2 + 0.5 / kappa ** 2, sigma_t ** 2 + 0.5 * (params.h * kappa) ** 2


def q_moments(grid: HusimiGrid) -> Dict[str, float]:
    w = grid.Q / grid.Q.sum()
    px, pt = w.sum(axis=1), w.sum(axis=0)
    mx, mt = float(px @ grid.x), float(pt @ grid.theta)
    return {
        "mean_x": mx,
        "mean_theta": mt,
        "var_x": float(px @ (grid.x - mx) ** 2),
        "var_theta": float(pt @ (grid.theta - mt) ** 2),
    }


def half_max_components(grid: HusimiGrid) -> int:
    """Connected regions with Q >= max/2; theta = -pi/2 and pi/2 are the same line."""
    labels, count = ndimage.label(grid.Q >= 0.5 * grid.Q.max())
    if count == 0:
        return 0
    period = math.pi
    wraps = abs((grid.theta[-1] - grid.theta[0]) - period) < 1e-9
    parent = list(range(count + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if wraps:
        for a, b in zip(labels[:, 0], labels[:, -1]):
            if a and b:
                parent[find(a)] = find(b)
    return len({find(k) for k in range(1, count + 1)})


# ── State selection ──────────────────────────────────────────────────────── #

def squeeze_for_state(eps: float, params: ModelParams) -> float:
    """s rising linearly from 1 at the band-4 bottom to 2 at its top."""
    lo, hi = envelope(4, params)
    return float(np.clip(1.0 + (eps - lo) / (hi - lo), 1.0, 2.0))


def representative_states(sol: EigenSolution, params: ModelParams) -> Dict[str, int]:
    """Ground, mid-band, separatrix and localized band-4 states, all distinct.

    The localized pick lies above the separatrix energy, so with parity
    eigenstates its Q splits into one lobe on each side. Raises DomainError
    when the spectrum is not parity resolved or has too few band-4 states.
    """
    lo, hi = envelope(4, params)
    eps_c = critical_energy(4, params)
    eps = sol.eps
    pool = [n for n in range(len(sol)) if eps[n] <= hi and sol.band_weights(n)[3] >= BAND4_DOMINANCE]
    if not pool:
        raise DomainError("No lower-lower states in this spectrum")
    if np.any(sol.parity[pool] == 0):
        raise DomainError("Representative states need parity eigenstates; diagonalize at eps_imb = 0")

    def take(label: str, members: List[int], target: float) -> int:
        if not members:
            raise DomainError(f"No band-4 state left for the {label} portrait at N={params.N}")
        n = min(members, key=lambda k: abs(eps[k] - target))
        pool.remove(n)
        return n

    picks = {"ground": take("ground", pool[:1], lo)}
    if eps_c < hi:
        picks["localized"] = take("localized", [n for n in pool if eps[n] > eps_c], 0.5 * (eps_c + hi))
    ceiling = eps[picks["localized"]] if "localized" in picks else math.inf
    picks["separatrix"] = take("separatrix", [n for n in pool if eps[n] < ceiling], eps_c)
    picks["oscillatory"] = take("oscillatory", [n for n in pool if eps[n] < eps[picks["separatrix"]]],
                                0.5 * (lo + eps_c))
    return {label: picks[label] for label in ("ground", "oscillatory", "separatrix", "localized") if label in picks}
