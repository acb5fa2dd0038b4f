"""
dynamics.py
-----------
Coherent-state classical dynamics of the dimer.

Each site carries a spin of length S (Bloch angles theta, phi) and a cavity
field R + iI. The flow is integrated in Cartesian spin form, where it has no
poles:

    n_s   = (sin t cos p, sin t sin p, -cos t)
    dn_s  = B_s x n_s,          B_s = (2g R_s, -2g I_s, 0)
    dR_s  = -g S n_y,s - J I_s'
    dI_s  = -g S n_x,s + J R_s'

with s' the other site. The conserved energy is

    E = 2gS sum_s (R_s n_x,s - I_s n_y,s) - 2J (R_L R_R + I_L I_R)

and the site polariton numbers are n_s = R_s^2 + I_s^2 + S (1 + n_z,s).
`eom_full` is the same flow written in angles (singular at the poles).

The invariant submanifold I_L = R_R = 0, phi_L = pi/2, phi_R = 0 reduces the
motion to (theta_L, theta_R, R_L, I_R); its Poincare sections in theta_L show
the route from quasi-periodic to chaotic motion as g grows.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import DOP853, solve_ivp
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import DomainError, NumericalError

_log = logging.getLogger("jcdm.dynamics")

SPIN = 0.5
POLE_GUARD = 1e-10
RTOL = 1e-11
ATOL = 1e-12
SCAN_RTOL = 1e-8
SCAN_ATOL = 1e-9
T_TRANSIENT = 20.0
T_AVERAGE = 200.0
LOCALIZED_LEVEL = 0.5
WINDOW_SENSITIVITY = 0.05


# ── State ────────────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class ClassicalState:
    theta_L: float
    phi_L: float
    theta_R: float
    phi_R: float
    R_L: float
    I_L: float
    R_R: float
    I_R: float
    S: float = SPIN

    def to_cartesian(self) -> np.ndarray:
        tl, pl, tr, pr = self.theta_L, self.phi_L, self.theta_R, self.phi_R
        return np.array([
            math.sin(tl) * math.cos(pl), math.sin(tl) * math.sin(pl), -math.cos(tl),
            math.sin(tr) * math.cos(pr), math.sin(tr) * math.sin(pr), -math.cos(tr),
            self.R_L, self.I_L, self.R_R, self.I_R,
        ])

    @classmethod
    def from_cartesian(cls, y: Sequence[float], S: float = SPIN) -> "ClassicalState":
        theta_L = math.acos(min(1.0, max(-1.0, -y[2])))
        theta_R = math.acos(min(1.0, max(-1.0, -y[5])))
        return cls(theta_L, math.atan2(y[1], y[0]), theta_R, math.atan2(y[4], y[3]),
                   float(y[6]), float(y[7]), float(y[8]), float(y[9]), S)

    @classmethod
    def from_restricted(cls, theta_L: float, theta_R: float, R_L: float, I_R: float,
                        S: float = SPIN) -> "ClassicalState":
        """Point of the invariant submanifold I_L = R_R = 0, phi_L = pi/2, phi_R = 0."""
        return cls(theta_L, 0.5 * math.pi, theta_R, 0.0, R_L, 0.0, 0.0, I_R, S)

    def site_numbers(self) -> Tuple[float, float]:
        y = self.to_cartesian()
        return _site_numbers(y, self.S)


def _site_numbers(y, S: float):
    n_L = y[6] ** 2 + y[7] ** 2 + S * (1.0 + y[2])
    n_R = y[8] ** 2 + y[9] ** 2 + S * (1.0 + y[5])
    return n_L, n_R


def classical_energy(y, g: float, J: float, S: float = SPIN):
    """Conserved energy of a Cartesian state (or of each column of a trajectory)."""
    return (2.0 * g * S * (y[6] * y[0] - y[7] * y[1] + y[8] * y[3] - y[9] * y[4])
            - 2.0 * J * (y[6] * y[8] + y[7] * y[9]))


def imbalance(y, S: float = SPIN):
    """(n_L - n_R) / (n_L + n_R)."""
    n_L, n_R = _site_numbers(y, S)
    return (n_L - n_R) / (n_L + n_R)


# ── Equations of motion ──────────────────────────────────────────────────── #

def eom_cartesian(y, g: float, J: float, S: float = SPIN) -> np.ndarray:
    nLx, nLy, nLz, nRx, nRy, nRz, RL, IL, RR, IR = y[:10]
    gS = g * S
    return np.array([
        -2.0 * g * IL * nLz,
        -2.0 * g * RL * nLz,
        2.0 * g * (RL * nLy + IL * nLx),
        -2.0 * g * IR * nRz,
        -2.0 * g * RR * nRz,
        2.0 * g * (RR * nRy + IR * nRx),
        -gS * nLy - J * IR,
        -gS * nLx + J * RR,
        -gS * nRy - J * IL,
        -gS * nRx + J * RL,
    ])


def eom_full(state: ClassicalState, g: float, J: float) -> np.ndarray:
    """Derivatives of (theta_L, phi_L, theta_R, phi_R, R_L, I_L, R_R, I_R) in angle form."""
    out = []
    S = state.S
    sites = ((state.theta_L, state.phi_L, state.R_L, state.I_L),
             (state.theta_R, state.phi_R, state.R_R, state.I_R))
    for theta, phi, R, I in sites:
        s = math.sin(theta)
        if abs(s) < POLE_GUARD:
            raise DomainError(f"Spin at the pole (theta={theta:.3g}); use the Cartesian form")
        out.append(2.0 * g * (R * math.sin(phi) + I * math.cos(phi)))
        out.append(2.0 * g * (R * math.cos(phi) - I * math.sin(phi)) * math.cos(theta) / s)
    dtheta_L, dphi_L, dtheta_R, dphi_R = out
    fields = []
    for theta, phi, R, I in sites:
        fields.append((-g * S * math.sin(theta) * math.sin(phi), -g * S * math.sin(theta) * math.cos(phi)))
    return np.array([
        dtheta_L, dphi_L, dtheta_R, dphi_R,
        fields[0][0] - J * state.I_R,
        fields[0][1] + J * state.R_R,
        fields[1][0] - J * state.I_L,
        fields[1][1] + J * state.R_L,
    ])


def eom_restricted(state4: Sequence[float], g: float, J: float, S: float = SPIN) -> np.ndarray:
    """Derivatives of (theta_L, theta_R, R_L, I_R) on the invariant submanifold."""
    theta_L, theta_R, R_L, I_R = state4
    return np.array([
        2.0 * g * R_L,
        2.0 * g * I_R,
        -g * S * math.sin(theta_L) - J * I_R,
        -g * S * math.sin(theta_R) + J * R_L,
    ])


def embed_restricted(state4: Sequence[float], S: float = SPIN) -> ClassicalState:
    theta_L, theta_R, R_L, I_R = state4
    return ClassicalState.from_restricted(theta_L, theta_R, R_L, I_R, S)


# ── Integration ──────────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    g: float
    J: float
    S: float

    @property
    def energy(self) -> np.ndarray:
        return classical_energy(self.y, self.g, self.J, self.S)

    @property
    def imbalance(self) -> np.ndarray:
        return imbalance(self.y, self.S)

    @property
    def energy_drift(self) -> float:
        """max |E(t) - E(0)| relative to |E(0)| (or to the energy scale when E(0) = 0)."""
        E = self.energy
        n_L, n_R = _site_numbers(self.y[:, 0], self.S)
        scale = abs(E[0]) or (2.0 * self.J * (n_L + n_R) + 2.0 * self.g * self.S * math.sqrt(n_L + n_R)) or 1.0
        return float(np.max(np.abs(E - E[0])) / scale)

    def state(self, k: int) -> ClassicalState:
        return ClassicalState.from_cartesian(self.y[:, k], self.S)


def integrate(state0: ClassicalState, g: float, J: float, t_max: float, t_eval=None,
              rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """DOP853 integration of the Cartesian flow from t = 0 to t_max (t_max < 0 runs backwards)."""
    y0 = state0.to_cartesian()
    if not np.all(np.isfinite(y0)) or not all(math.isfinite(v) for v in (g, J, t_max)):
        raise DomainError("Initial state, couplings and t_max must be finite")
    S = state0.S
    result = solve_ivp(lambda t, y: eom_cartesian(y, g, J, S), (0.0, t_max), y0, method="DOP853",
                       t_eval=t_eval, rtol=rtol, atol=atol)
    if not result.success:
        raise NumericalError(f"Integrator stopped at t={result.t[-1]:.6g}: {result.message}")
    return Trajectory(t=result.t, y=result.y, g=g, J=J, S=S)


# ── Localization threshold ───────────────────────────────────────────────── #

def scan_initial_state(theta_R0: float, N: int, S: float = SPIN) -> ClassicalState:
    """Left qubit down, right qubit at theta_R0, all photons in the left cavity."""
    return ClassicalState(0.0, 0.0, theta_R0, 0.0, math.sqrt(N), 0.0, 0.0, 0.0, S)


def _restricted_with_imbalance(t, y, g: float, J: float, S: float):
    theta_L, theta_R, R_L, I_R = y[0], y[1], y[2], y[3]
    n_L = R_L * R_L + S * (1.0 - math.cos(theta_L))
    n_R = I_R * I_R + S * (1.0 - math.cos(theta_R))
    return [2.0 * g * R_L,
            2.0 * g * I_R,
            -g * S * math.sin(theta_L) - J * I_R,
            -g * S * math.sin(theta_R) + J * R_L,
            (n_L - n_R) / (n_L + n_R)]


def _cartesian_with_imbalance(t, y, g: float, J: float, S: float):
    return np.append(eom_cartesian(y[:10], g, J, S), imbalance(y[:10], S))


def _on_restricted_manifold(y: np.ndarray) -> bool:
    return bool(np.max(np.abs(y[[0, 4, 7, 8]])) < 1e-14)


def averaged_imbalance(state0: ClassicalState, g: float, J: float, t_transient: float = T_TRANSIENT,
                       t_average: float = T_AVERAGE, rtol: float = SCAN_RTOL,
                       atol: float = SCAN_ATOL) -> Tuple[float, float]:
    """(full-window, half-window) time averages of the imbalance after a transient.

    Times are in units of 1/J. States on the invariant submanifold are
    advanced with the four-variable flow; the average rides along as one
    more variable of the ODE.
    """
    S = state0.S
    t0 = t_transient / J
    span = t_average / J
    y = state0.to_cartesian()
    if _on_restricted_manifold(y):
        rhs = _restricted_with_imbalance
        y0 = [math.atan2(y[1], -y[2]), math.atan2(y[3], -y[5]), y[6], y[9], 0.0]
    else:
        rhs = _cartesian_with_imbalance
        y0 = np.append(y, 0.0)
    settle = solve_ivp(rhs, (0.0, t0), y0, method="DOP853", args=(g, J, S), rtol=rtol, atol=atol)
    if not settle.success:
        raise NumericalError(f"Transient integration failed: {settle.message}")
    start = settle.y[:, -1].copy()
    start[-1] = 0.0
    run = solve_ivp(rhs, (t0, t0 + span), start, method="DOP853", args=(g, J, S),
                    t_eval=[t0 + 0.5 * span, t0 + span], rtol=rtol, atol=atol)
    if not run.success:
        raise NumericalError(f"Averaging integration failed: {run.message}")
    half, full = run.y[-1]
    return float(full / span), float(half / (0.5 * span))


@dataclass(frozen=True)
class ScanResult:
    theta_R0: np.ndarray
    coupling: np.ndarray
    average: np.ndarray
    unconverged: np.ndarray
    threshold: np.ndarray

    @property
    def coupling_gJsqrtN(self) -> np.ndarray:
        """Coupling axis as g/(J sqrt N)."""
        return 2.0 * self.coupling

    @property
    def threshold_gJsqrtN(self) -> np.ndarray:
        return 2.0 * self.threshold


def _first_crossing(coupling: np.ndarray, values: np.ndarray, level: float) -> float:
    above = np.flatnonzero(values >= level)
    if above.size == 0:
        return math.nan
    k = int(above[0])
    if k == 0:
        return float(coupling[0])
    c0, c1, v0, v1 = coupling[k - 1], coupling[k], values[k - 1], values[k]
    return float(c0 + (level - v0) * (c1 - c0) / (v1 - v0))


def _scan_point(task: Tuple[float, float, int, float, float, float, float]) -> Tuple[float, float]:
    theta, c, N, J, S, t_transient, t_average = task
    g = 2.0 * c * J * math.sqrt(N)
    return averaged_imbalance(scan_initial_state(theta, N, S), g, J, t_transient, t_average)


def threshold_scan(theta_R0: Sequence[float], coupling: Sequence[float], N: int, J: float = 1.0,
                   t_transient: float = T_TRANSIENT, t_average: float = T_AVERAGE,
                   threads: int = 1, S: float = SPIN) -> ScanResult:
    """Long-time imbalance over (theta_R0, g/(2J sqrt N)) and the 0.5-crossing per theta_R0.

    Grid points run in `threads` worker processes.
    """
    thetas = np.asarray(theta_R0, dtype=float)
    cs = np.asarray(coupling, dtype=float)
    if N < 1 or J <= 0.0:
        raise DomainError(f"Threshold scan needs N >= 1 and J > 0, got N={N}, J={J}")
    grid = [(i, k) for i in range(len(thetas)) for k in range(len(cs))]
    tasks = [(float(thetas[i]), float(cs[k]), N, J, S, t_transient, t_average) for i, k in grid]

    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_scan_point, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [_scan_point(task) for task in tasks]

    average = np.empty((len(thetas), len(cs)))
    unconverged = np.zeros_like(average, dtype=bool)
    for (i, k), (full, half) in zip(grid, results):
        average[i, k] = full
        unconverged[i, k] = abs(full - half) > WINDOW_SENSITIVITY
    threshold = np.array([_first_crossing(cs, average[i], LOCALIZED_LEVEL) for i in range(len(thetas))])
    _log.info("threshold scan %dx%d: %d unconverged points", len(thetas), len(cs), int(unconverged.sum()))
    return ScanResult(thetas, cs, average, unconverged, threshold)


def pendulum_critical(theta_R0: float) -> float:
    """Pendulum estimate of the critical g/(2J sqrt N) for a right qubit at theta_R0."""
    if not 0.0 < theta_R0 < math.pi:
        raise DomainError(f"theta_R(0) must lie in (0, pi), got {theta_R0}")
    if theta_R0 >= 0.5 * math.pi:
        return 1.0 / math.sin(theta_R0)
    f = lambda t: math.sin(t) + (math.cos(t) - math.cos(theta_R0)) / (t - theta_R0)
    a, b = 0.5 * math.pi, math.pi - 1e-12
    if f(a) == 0.0:
        return 1.0
    if f(a) * f(b) > 0.0:
        raise NumericalError(f"No bracketing root for theta_R(0)={theta_R0}")
    return 1.0 / math.sin(brentq(f, a, b, xtol=1e-14))


# ── Poincare sections ────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class PoincareSection:
    N: int
    times: np.ndarray
    points: np.ndarray
    theta_L: np.ndarray

    @property
    def R_L(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def I_R(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def r(self) -> np.ndarray:
        return np.sqrt((self.R_L ** 2 + self.I_R ** 2) / self.N)

    @property
    def alpha(self) -> np.ndarray:
        return np.arctan2(self.I_R, self.R_L)


def _henon_step(y: np.ndarray, t: float, target: float, g: float, J: float, S: float) -> Tuple[float, np.ndarray]:
    """Integrate with theta_L as the clock from y to theta_L = target."""
    def rhs(theta_L, z):
        tt, theta_R, R_L, I_R = z
        d = eom_restricted((theta_L, theta_R, R_L, I_R), g, J, S)
        return np.array([1.0, d[1], d[2], d[3]]) / d[0]

    out = solve_ivp(rhs, (y[0], target), np.array([t, y[1], y[2], y[3]]), method="DOP853",
                    rtol=1e-12, atol=1e-13)
    if not out.success:
        raise NumericalError(f"Section refinement failed: {out.message}")
    tt, theta_R, R_L, I_R = out.y[:, -1]
    return float(tt), np.array([target, theta_R, R_L, I_R])


def poincare_section(state4_0: Sequence[float], N: int, g: float, J: float, n_crossings: int,
                     t_max: float, theta_section: float = 0.0, section: str = "theta_L",
                     strobe: Optional[float] = None, S: float = SPIN) -> PoincareSection:
    """(R_L, I_R) at successive upward crossings of theta_L = theta_section mod 2 pi.

    `section="time"` samples every `strobe` time units (default 1/J) instead,
    which is the only meaningful section when g = 0 freezes theta_L.
    """
    y0 = np.asarray(state4_0, dtype=float)
    rhs = lambda t, y: eom_restricted(y, g, J, S)
    times: List[float] = []
    rows: List[np.ndarray] = []

    if section == "time":
        step = strobe if strobe is not None else 1.0 / J
        t_eval = step * np.arange(1, n_crossings + 1)
        if t_eval[-1] > t_max:
            raise NumericalError(f"{n_crossings} strobes need t={t_eval[-1]:.6g} > t_max={t_max:.6g}")
        out = solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853", t_eval=t_eval, rtol=1e-11, atol=1e-12)
        if not out.success:
            raise NumericalError(f"Integrator stopped: {out.message}")
        return PoincareSection(N, out.t, out.y[2:4].T.copy(), out.y[0].copy())
    if section != "theta_L":
        raise DomainError(f"Unknown section {section!r}; use 'theta_L' or 'time'")

    stepper = DOP853(rhs, 0.0, y0, t_max, rtol=1e-11, atol=1e-12)
    winding = math.floor((y0[0] - theta_section) / (2.0 * math.pi))
    while len(times) < n_crossings and stepper.status == "running":
        stepper.step()
        if stepper.status == "failed":
            raise NumericalError(f"Integrator failed at t={stepper.t:.6g}")
        y, t = stepper.y, stepper.t
        now = math.floor((y[0] - theta_section) / (2.0 * math.pi))
        if now > winding and 2.0 * g * y[2] > 0.0:
            target = theta_section + 2.0 * math.pi * now
            t_hit, y_hit = _henon_step(y, t, target, g, J, S)
            times.append(t_hit)
            rows.append(y_hit)
        winding = now
    if len(times) < n_crossings:
        raise NumericalError(f"Only {len(times)} of {n_crossings} section crossings before t_max={t_max:.6g}")
    rows_arr = np.array(rows)
    return PoincareSection(N, np.array(times), rows_arr[:, 2:4].copy(), rows_arr[:, 0].copy())


def dispersion_statistic(section: PoincareSection) -> float:
    """Median nearest-neighbour distance times sqrt(n) over the cloud's RMS spread.

    Points on a closed curve give O(1/sqrt(n)); an area-filling cloud gives O(1).
    """
    xy = np.column_stack([section.r * np.cos(section.alpha), section.r * np.sin(section.alpha)])
    if len(xy) < 3:
        raise DomainError("Dispersion needs at least three section points")
    distances, _ = cKDTree(xy).query(xy, k=2)
    spread = float(np.sqrt(np.mean(np.sum((xy - xy.mean(axis=0)) ** 2, axis=1))))
    if spread == 0.0:
        return 0.0
    return float(np.median(distances[:, 1]) * math.sqrt(len(xy)) / spread)
