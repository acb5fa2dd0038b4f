"""Command-line front end of the laboratory.

Every subcommand computes one data set, writes it as CSV into `--out` and
leaves a `manifest.json` next to it that replays the run:

    jcdm spectrum --N 1 --g 1 --J 1
    jcdm spectral-map --N 400 --g-over-Jsqrt2N 2.0 --out runs/map
    jcdm dos --N 400 --J-over-gprime 0.25 --bins 101
    jcdm splittings --N 200 --J-over-gprime 0.25
    jcdm imbalance-map --N 400 --ratios 0.25 0.5 0.75
    jcdm wkb-levels --N 400 --J-over-gprime 0.25 --band 4
    jcdm wkb-defects --N 400 --J-over-gprime 1 --corrections
    jcdm wkb-wavefunction --N 100 --J-over-gprime 0.25
    jcdm phase-boundary
    jcdm classical-orbits --N 400
    jcdm classical-scan --N 100 --threads 8
    jcdm poincare --N 100 --couplings 0.088 1.41
    jcdm husimi --N 100 --J-over-gprime 0.3333333333333333
    jcdm figure fig4 --out runs/fig4
    jcdm --from-manifest runs/fig4/manifest.json --out runs/replay

Results go to stdout as one JSON line; failures go to stderr as
{"ok": false, "category": ..., "message": ...} with exit code 2 (config or
domain) or 3 (numerical). JCDM_THREADS, JCDM_COMMAND_LOG and JCDM_LOG_LEVEL
are read from the environment or a local .env.
"""

from __future__ import annotations

import argparse
import functools
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .artifacts import ArtifactWriter
from .config import LabSettings, ModelParams, RunConfig
from .dynamics import (
    T_AVERAGE,
    T_TRANSIENT,
    dispersion_statistic,
    pendulum_critical,
    poincare_section,
    threshold_scan,
)
from .errors import ConfigError, DomainError, JcdmError, NumericalError
from .husimi import (
    classical_contours,
    default_grid,
    half_max_components,
    husimi_q,
    q_moment_prediction,
    q_moments,
    representative_states,
    squeeze_for_state,
)
from .spectra import (
    DEFAULT_DOS_BINS,
    IMBALANCE_PROBE,
    PAIR_GAP_FRACTION,
    dos,
    imbalance_map,
    solve,
    splittings,
)
from .wkb import (
    BANDS,
    CRITICAL,
    DELOCALIZED,
    LOCALIZED,
    MIDDLE,
    classical_orbit,
    classify,
    correction_profile,
    critical_energy,
    envelope,
    level_spacing,
    phase_boundary,
    predicted_splitting,
    quantization_residual,
    solve_levels,
    wkb_wavefunction,
)
from .wkb.bands import band_edge, has_separatrix
from .wkb.quantization import regime_window

_command_log = logging.getLogger("jcdm.commands")
_lib_log = logging.getLogger("jcdm")

Handler = Callable[[RunConfig, ArtifactWriter], Dict[str, Any]]
COMMANDS: Dict[str, Handler] = {}

DOMINANCE = 0.9
CORRECTION_POINTS = 81


# ── Logging ──────────────────────────────────────────────────────────────── #

def _configure_command_logging() -> None:
    """Attach a readable handler to the jcdm.commands logger (once per process)."""
    if getattr(_command_log, "_jcdm_configured", False):
        return
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(asctime)s  %(message)s", datefmt="%H:%M:%S"))
    _command_log.addHandler(handler)
    _command_log.setLevel(logging.INFO)
    _command_log.propagate = False
    _command_log._jcdm_configured = True  # type: ignore[attr-defined]


def _configure_library_logging(level: str) -> None:
    if not getattr(_lib_log, "_jcdm_configured", False):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s  %(name)s  %(levelname)s  %(message)s",
                                               datefmt="%H:%M:%S"))
        _lib_log.addHandler(handler)
        _lib_log._jcdm_configured = True  # type: ignore[attr-defined]
    resolved = logging.getLevelName(level.upper())
    if not isinstance(resolved, int):
        raise ConfigError(f"Unknown log level {level!r}")
    _lib_log.setLevel(resolved)


_RUN_OPTIONS = ("band", "regime", "bins", "ratios", "couplings", "window", "states", "grid", "s", "thetas",
                "theta_points", "coupling_points", "corrections", "parity_sectors")


def _describe(config: RunConfig) -> Dict[str, Any]:
    """Physical parameters and the options that select what a run computes."""
    fields: Dict[str, Any] = {}
    p = config.params
    if p is not None:
        fields["N"] = p.N
        if p.g > 0.0:
            fields["gprime"] = round(p.gprime, 12)
            fields["J_over_gprime"] = round(p.J_over_gprime, 12)
        else:
            fields["J"] = p.J
        if p.eps_imb:
            fields["eps_imb"] = p.eps_imb
    fields.update({k: config.options[k] for k in _RUN_OPTIONS if k in config.options})
    if config.threads > 1:
        fields["threads"] = config.threads
    return fields


def _headline(summary: Dict[str, Any]) -> Dict[str, Any]:
    """Scalar entries of a command summary."""
    return {k: v for k, v in summary.items() if isinstance(v, (bool, int, float, str))}


def _fields(values: Dict[str, Any]) -> str:
    return " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())


def _logged(name: str, fn: Handler) -> Handler:
    @functools.wraps(fn)
    def logged(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
        run_fields = _describe(config)
        _command_log.info("→ %s %s", name, _fields(run_fields), extra={"command": name, "run": run_fields})
        start = time.perf_counter()
        try:
            result = fn(config, writer)
        except JcdmError as exc:
            _command_log.info("✗ %s %s [%s] %s", name, _fields(run_fields), exc.category, exc,
                              extra={"command": name, "run": run_fields})
            raise
        elapsed = time.perf_counter() - start
        headline = _headline(result)
        _command_log.info("← %s %s (%.2fs)", name, _fields(headline), elapsed,
                          extra={"command": name, "run": run_fields, "summary": headline, "elapsed": elapsed})
        return result

    return logged


def command(name: str) -> Callable[[Handler], Handler]:
    def register(fn: Handler) -> Handler:
        COMMANDS[name] = fn
        return fn

    return register


# ── Helpers ──────────────────────────────────────────────────────────────── #

def _params(config: RunConfig, coupling: bool = True) -> ModelParams:
    p = config.params
    if p is None:
        raise ConfigError(f"'{config.command}' needs --N")
    if coupling and p.g <= 0.0:
        raise ConfigError(f"'{config.command}' needs a coupling: --g, --g-over-Jsqrt2N or --J-over-gprime")
    if coupling and p.J <= 0.0:
        raise ConfigError(f"'{config.command}' needs J > 0")
    return p


def _safe(fn: Callable[[], float]) -> float:
    try:
        return float(fn())
    except (DomainError, NumericalError):
        return math.nan


def _finite_median(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(np.median(arr)) if arr.size else math.nan


def _regimes(band: int, params: ModelParams) -> List[str]:
    if band in (2, 3):
        return [MIDDLE]
    out = [DELOCALIZED, LOCALIZED]
    if has_separatrix(params):
        out.append(CRITICAL)
    return out


def _dominant_band(weights: np.ndarray) -> int:
    return int(np.argmax(weights)) + 1


def _scales(params: ModelParams) -> Dict[str, float]:
    """Energy scales drawn as guide lines next to spectra and defects."""
    return {
        "eps_c": float(2.0 * params.gprime - params.J),
        "band_edge": float(band_edge(params)),
        "J": float(params.J),
    }


# ── Spectra ──────────────────────────────────────────────────────────────── #

@command("spectrum")
def cmd_spectrum(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    sol = solve(p, parity_resolved=True if config.option("parity_sectors", False) else None)
    mean_x = sol.mean_x

    def rows():
        for n in range(len(sol)):
            w = sol.band_weights(n)
            yield (n, float(sol.energies[n]), float(sol.eps[n]), int(sol.parity[n]), float(mean_x[n]), *map(float, w))

    writer.table("spectrum.csv", ["index", "E", "eps", "parity", "mean_x", "w1", "w2", "w3", "w4"], rows())
    return {"states": len(sol), "E_min": float(sol.energies[0]), "E_max": float(sol.energies[-1])}


@command("spectral-map")
def cmd_spectral_map(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    sol = solve(p)
    weights = sol.traced

    def rows():
        for n in range(len(sol)):
            E, e = float(sol.energies[n]), float(sol.eps[n])
            for k, x in enumerate(sol.x):
                yield n, E, e, float(x), float(weights[n, k])

    writer.table("spectral_map.csv", ["index", "E", "eps", "x", "weight"], rows())
    return {"states": len(sol), "g_over_Jsqrt2N": float(p.gprime / p.J) if p.J > 0 else math.inf}


@command("dos")
def cmd_dos(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    sol = solve(p)
    hist = dos(sol, int(config.option("bins", DEFAULT_DOS_BINS)))
    centers = hist.centers
    rows = ((float(hist.edges[k]), float(hist.edges[k + 1]), float(c), float(c * p.N), int(hist.counts[k]))
            for k, c in enumerate(centers))
    writer.table("dos.csv", ["eps_lo", "eps_hi", "eps_center", "E_center", "count"], rows)
    return {"bins": len(centers), "states": hist.total, **_scales(p)}


@command("splittings")
def cmd_splittings(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config)
    band = int(config.option("band", 4))
    if band not in (1, 4):
        raise ConfigError(f"Tunneling doublets live in band 1 or 4, not {band}")
    window = config.option("window")
    window = tuple(window) if window else regime_window(band, LOCALIZED, p)
    sol = solve(p, parity_resolved=True)
    report = splittings(sol, window, float(config.option("gap_fraction", PAIR_GAP_FRACTION)))

    def rows():
        for pair in report.pairs:
            try:
                est = predicted_splitting(pair.mean_eps, p, band)
                predicted, dQ = est.delta_eps, est.dQ
            except (DomainError, NumericalError):
                predicted, dQ = math.nan, math.nan
            yield (pair.index, pair.lower, pair.upper, pair.mean_eps * p.N, pair.mean_eps,
                   pair.delta_eps * p.N, pair.delta_eps, predicted * p.N, predicted, dQ)

    writer.table("splittings.csv", ["pair", "lower", "upper", "mean_E", "mean_eps", "delta_E", "delta_eps",
                                    "wkb_delta_E", "wkb_delta_eps", "dQ"], rows())
    if report.flagged:
        _lib_log.warning("splittings: %d levels in [%.6g, %.6g] have no partner",
                         len(report.unpaired), *report.window)
    return {"pairs": len(report.pairs), "unpaired": list(report.unpaired),
            "window": list(report.window), "mean_spacing": report.mean_spacing}


@command("imbalance-map")
def cmd_imbalance_map(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    ratios = config.option("ratios") or [_params(config).J_over_gprime]
    eps_imb = p.eps_imb if p.eps_imb > 0.0 else IMBALANCE_PROBE * p.J

    def one(r: float):
        return imbalance_map(solve(ModelParams.from_ratio(p.N, p.J, float(r), eps_imb)))

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        maps = list(pool.map(one, ratios))

    rows = []
    both = agree = 0
    for m in maps:
        for pt in m.points:
            classical = pt.x0 > 0.0 and 1.0 / m.J_over_gprime > phase_boundary(min(pt.x0, 1.0))
            quantum = abs(pt.mean_x) > 0.5
            if classical:
                both += 1
                agree += int(quantum)
            rows.append((m.J_over_gprime, pt.index, pt.eps * p.N, pt.eps, pt.x0, pt.mean_x, classical, quantum))
    writer.table("imbalance_map.csv", ["J_over_gprime", "index", "E", "eps", "x0", "mean_x",
                                       "classical_localized", "quantum_localized"], rows)
    return {"ratios": len(maps), "states": len(rows), "eps_imb": eps_imb,
            "localized_agreement": agree / both if both else math.nan}


# ── Semiclassics ─────────────────────────────────────────────────────────── #

@command("wkb-levels")
def cmd_wkb_levels(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config)
    chosen_band = config.option("band")
    chosen_regime = config.option("regime")
    bands = [int(chosen_band)] if chosen_band is not None else list(BANDS)
    samples = int(config.option("samples", 400))
    sol = solve(p)
    exact = sol.eps

    levels = []
    for band in bands:
        for regime in ([chosen_regime] if chosen_regime else _regimes(band, p)):
            lo, hi = regime_window(band, regime, p)
            if not hi > lo and not chosen_regime:
                _lib_log.info("band %d %s: empty window, skipped", band, regime)
                continue
            try:
                levels.extend(solve_levels(band, regime, p, samples=samples,
                                           middle_scaled=not config.option("unscaled_middle", False),
                                           literal=bool(config.option("literal", False))))
            except NumericalError:
                if chosen_regime:
                    raise
                _lib_log.info("band %d %s: no levels", band, regime)

    def rows():
        for lv in levels:
            k = int(np.argmin(np.abs(exact - lv.eps)))
            yield lv.band, lv.regime, lv.n, lv.branch, lv.eps * p.N, lv.eps, float(exact[k]), lv.eps - float(exact[k])

    writer.table("wkb_levels.csv", ["band", "regime", "n", "branch", "E", "eps", "exact_eps", "error_eps"], rows())
    return {"levels": len(levels)}


def _defect_row(band: int, eps: float, params: ModelParams, window_c: float) -> Tuple[str, float, float, float, float]:
    """(regime, matched defect, standard-rule defect, defect with the in-text chi, level spacing)."""
    if band in (2, 3):
        found = [d for d in (_safe(lambda: quantization_residual(b, MIDDLE, eps, params)) for b in (2, 3))
                 if not math.isnan(d)]
        d = min(found) if found else math.nan
        return MIDDLE, d, d, math.nan, _safe(lambda: level_spacing(2, MIDDLE, eps, params))
    regime = classify(band, eps, params, window_c)
    above = eps > critical_energy(band, params)
    side = DELOCALIZED if above == (band == 1) else LOCALIZED
    standard = _safe(lambda: quantization_residual(band, side, eps, params))
    spacing = _safe(lambda: level_spacing(band, side, eps, params))
    if regime != CRITICAL:
        return regime, standard, standard, math.nan, spacing
    matched = _safe(lambda: quantization_residual(band, CRITICAL, eps, params))
    via_gap = _safe(lambda: quantization_residual(band, CRITICAL, eps, params, chi_form="gap"))
    return regime, matched, standard, via_gap, spacing


@command("wkb-defects")
def cmd_wkb_defects(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config)
    window_c = float(config.option("window_c", 1.0))
    corrections = bool(config.option("corrections", False))
    sol = solve(p)
    xs = np.linspace(-1.0, 1.0, CORRECTION_POINTS)

    rows = []
    outside, critical_pairs = [], []
    for n, e in enumerate(sol.eps):
        e = float(e)
        band = _dominant_band(sol.band_weights(n))
        regime, defect, standard, text, spacing = _defect_row(band, e, p, window_c)
        row = [n, e * p.N, e, int(sol.parity[n]), band, regime, defect, standard, text, spacing]
        if corrections:
            prof = correction_profile(band, e, xs, p)
            prof = prof[np.isfinite(prof)]
            row.append(float(prof.max()) if prof.size else math.nan)
        rows.append(row)
        if regime == CRITICAL:
            critical_pairs.append((defect, standard))
        else:
            outside.append(defect)

    header = ["index", "E", "eps", "parity", "band", "regime", "defect", "defect_standard",
              "defect_chi_gap", "spacing_eps"]
    if corrections:
        header.append("correction")
    writer.table("defects.csv", header, rows)
    return {
        "states": len(rows),
        "median_defect": _finite_median(outside),
        "median_critical_defect": _finite_median([c for c, _ in critical_pairs]),
        "median_critical_standard": _finite_median([s for _, s in critical_pairs]),
        **_scales(p),
    }


def _wavefunction_states(sol, params: ModelParams, band: int) -> List[int]:
    """One exact state at the middle of each non-critical regime window of `band`."""
    if band in (2, 3):
        weight = lambda n: sol.band_weights(n)[1] + sol.band_weights(n)[2]
    else:
        weight = lambda n: sol.band_weights(n)[band - 1]
    candidates = [n for n in range(len(sol)) if weight(n) >= DOMINANCE]
    picks: List[int] = []
    for regime in _regimes(band, params):
        if regime == CRITICAL:
            continue
        lo, hi = regime_window(band, regime, params)
        if not hi > lo or not candidates:
            continue
        mid = 0.5 * (lo + hi)
        n = min(candidates, key=lambda k: abs(sol.eps[k] - mid))
        if lo <= sol.eps[n] <= hi and n not in picks:
            picks.append(n)
    if not picks:
        raise DomainError(f"No band-{band} states to compare against")
    return picks


@command("wkb-wavefunction")
def cmd_wkb_wavefunction(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config)
    band = int(config.option("band", 4))
    sol = solve(p)
    states = [int(n) for n in config.option("states") or _wavefunction_states(sol, p, band)]

    rows = []
    overlaps: Dict[str, float] = {}
    for n in states:
        if not 0 <= n < len(sol):
            raise ConfigError(f"State index {n} outside 0..{len(sol) - 1}")
        e = float(sol.eps[n])
        profile = wkb_wavefunction(band, e, p)
        exact = sol.polariton_profile(n)[:, band - 1]
        dot = float(exact @ profile.psi)
        sign = 1.0 if dot >= 0.0 else -1.0
        overlaps[str(n)] = abs(dot) / max(float(np.linalg.norm(exact)), 1e-300)
        for x, c, w in zip(profile.x, exact, profile.psi):
            rows.append((n, e * p.N, e, profile.regime, float(x), float(c), sign * float(w)))
    writer.table("wkb_wavefunction.csv", ["state", "E", "eps", "regime", "x", "exact", "wkb"], rows)
    return {"band": band, "states": states, "overlap": overlaps}


@command("phase-boundary")
def cmd_phase_boundary(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    points = int(config.option("points", 200))
    if points < 2:
        raise ConfigError("phase-boundary needs at least 2 points")
    N = config.params.N if config.params is not None else None
    x0 = np.linspace(1.0 / points, 1.0, points)

    def rows():
        for x in x0:
            g = phase_boundary(float(x))
            yield (float(x), g, 1.0 / g, g * math.sqrt(2.0 * N) if N else math.nan)

    writer.table("phase_boundary.csv", ["x0", "g_over_Jsqrt2N", "J_over_gprime", "g_over_J"], rows())
    return {"points": points, "g_over_J_at_full_imbalance": 2.0 * math.sqrt(N) if N else math.nan}


@command("classical-orbits")
def cmd_classical_orbits(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    ratios = config.option("ratios") or np.round(np.linspace(0.05, 1.0, 20), 6).tolist()
    points = int(config.option("points", 40))
    x0s = np.linspace(0.0, 1.0, points + 2)[1:-1]

    def orbits(r: float):
        q = ModelParams.from_ratio(p.N, p.J or 1.0, float(r))
        out, skipped = [], 0
        for x0 in x0s:
            try:
                out.append(classical_orbit(float(x0), q, band=1))
            except (DomainError, NumericalError):
                skipped += 1
        return float(r), out, skipped

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(orbits, ratios))

    rows = []
    agree = total = skipped = 0
    for r, summaries, k in results:
        skipped += k
        for o in summaries:
            predicted = 1.0 / r > phase_boundary(o.x0)
            total += 1
            agree += int(predicted == o.localized)
            rows.append((r, o.x0, o.eps * p.N, o.eps, o.lower, o.upper, o.period, o.mean_x, o.localized, predicted))
    writer.table("orbits.csv", ["J_over_gprime", "x0", "E", "eps", "lower", "upper", "period", "mean_x",
                                "localized", "boundary_localized"], rows)
    return {"orbits": total, "skipped": skipped, "boundary_agreement": agree / total if total else math.nan}


# ── Classical dynamics ───────────────────────────────────────────────────── #

@command("classical-scan")
def cmd_classical_scan(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    if p.J <= 0.0:
        raise ConfigError("classical-scan needs J > 0")
    thetas = config.option("thetas") or np.linspace(0.05 * math.pi, 0.95 * math.pi,
                                                    int(config.option("theta_points", 20))).tolist()
    coupling = np.linspace(float(config.option("coupling_min", 0.1)), float(config.option("coupling_max", 3.0)),
                           int(config.option("coupling_points", 30)))
    scan = threshold_scan(thetas, coupling, p.N, p.J,
                          t_transient=float(config.option("t_transient", T_TRANSIENT)),
                          t_average=float(config.option("t_average", T_AVERAGE)),
                          threads=config.threads)

    def scan_rows():
        for i, t in enumerate(scan.theta_R0):
            for k, c in enumerate(scan.coupling):
                yield float(t), float(c), 2.0 * float(c), float(scan.average[i, k]), bool(scan.unconverged[i, k])

    def threshold_rows():
        for t, c in zip(scan.theta_R0, scan.threshold):
            pend = _safe(lambda: pendulum_critical(float(t)))
            yield float(t), float(c), 2.0 * float(c), pend, 2.0 * pend

    writer.table("scan.csv", ["theta_R0", "g_over_2JsqrtN", "g_over_JsqrtN", "imbalance", "unconverged"],
                 scan_rows())
    writer.table("threshold.csv", ["theta_R0", "threshold_g_over_2JsqrtN", "threshold_g_over_JsqrtN",
                                   "pendulum_g_over_2JsqrtN", "pendulum_g_over_JsqrtN"], threshold_rows())
    return {"grid": [len(scan.theta_R0), len(scan.coupling)], "unconverged": int(scan.unconverged.sum())}


@command("poincare")
def cmd_poincare(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config, coupling=False)
    if p.J <= 0.0:
        raise ConfigError("poincare needs J > 0")
    root_N = math.sqrt(p.N)
    couplings = config.option("couplings") or [_params(config).g / (2.0 * p.J * root_N)]
    n_orbits = int(config.option("orbits", 6))
    crossings = int(config.option("crossings", 200))
    t_max = float(config.option("t_max", 5000.0)) / p.J
    section = str(config.option("section", "theta_L"))
    jobs = [(float(c), k) for c in couplings for k in range(n_orbits)]

    def one(job):
        c, k = job
        theta_R0 = math.pi * (k + 1) / (n_orbits + 1)
        try:
            sec = poincare_section((0.0, theta_R0, root_N, 0.0), p.N, 2.0 * c * p.J * root_N, p.J,
                                   crossings, t_max, section=section)
        except NumericalError as exc:
            _lib_log.warning("poincare coupling %.4g orbit %d skipped: %s", c, k, exc)
            return c, k, theta_R0, None
        return c, k, theta_R0, sec

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(one, jobs))
    if all(sec is None for *_, sec in results):
        raise NumericalError("No orbit produced enough section crossings")

    points, stats = [], []
    for c, k, theta_R0, sec in results:
        if sec is None:
            continue
        for j in range(len(sec.times)):
            points.append((c, k, j, float(sec.times[j]), float(sec.theta_L[j]), float(sec.R_L[j]),
                           float(sec.I_R[j]), float(sec.r[j]), float(sec.alpha[j])))
        stats.append((c, k, theta_R0, len(sec.times), dispersion_statistic(sec)))
    writer.table("poincare.csv", ["g_over_2JsqrtN", "orbit", "crossing", "t", "theta_L", "R_L", "I_R", "r", "alpha"],
                 points)
    writer.table("poincare_dispersion.csv", ["g_over_2JsqrtN", "orbit", "theta_R0", "crossings", "dispersion"], stats)
    per_coupling = {str(c): _finite_median([s[4] for s in stats if s[0] == c]) for c in map(float, couplings)}
    return {"orbits": len(stats), "skipped": len(results) - len(stats), "dispersion": per_coupling}


# ── Husimi portraits ─────────────────────────────────────────────────────── #

@command("husimi")
def cmd_husimi(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    p = _params(config)
    sol = solve(p)
    chosen = config.option("states")
    picks = {f"state{int(n)}": int(n) for n in chosen} if chosen else representative_states(sol, p)
    x, theta = default_grid(int(config.option("grid", 201)))
    s_fixed = config.option("s")

    def one(item):
        label, n = item
        s = float(s_fixed) if s_fixed is not None else squeeze_for_state(float(sol.eps[n]), p)
        grid = husimi_q(sol, n, p, s, x, theta)
        return label, grid, q_moments(grid), half_max_components(grid)

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(one, picks.items()))

    def q_rows():
        for label, grid, _, _ in results:
            E = grid.eps * p.N
            for xv, tv, qv in grid.rows():
                yield grid.index, label, E, grid.eps, xv, tv, qv

    writer.table("husimi.csv", ["state", "label", "E", "eps", "x", "theta", "Q"], q_rows())
    writer.table("husimi_states.csv", ["label", "state", "E", "eps", "s", "kappa", "leakage", "components",
                                       "mean_x", "mean_theta", "var_x", "var_theta"],
                 [(label, g.index, g.eps * p.N, g.eps, g.s, g.kappa, g.leakage, comps,
                   m["mean_x"], m["mean_theta"], m["var_x"], m["var_theta"])
                  for label, g, m, comps in results])

    levels = [g.eps for _, g, _, _ in results]
    lo, hi = envelope(4, p)
    eps_c = critical_energy(4, p)
    if lo < eps_c < hi:
        levels.append(eps_c)
    contour_rows = []
    for level in classical_contours(p, levels, x, theta):
        for j, line in enumerate(level.lines):
            contour_rows.extend((level.eps, j, float(a), float(b)) for a, b in line)
    writer.table("contours.csv", ["level_eps", "line", "x", "theta"], contour_rows)

    var_x, var_theta = q_moment_prediction(p)
    return {"states": {label: g.index for label, g, _, _ in results},
            "components": {label: comps for label, _, _, comps in results},
            "ground_prediction": {"var_x": var_x, "var_theta": var_theta}}


# ── Figure presets ───────────────────────────────────────────────────────── #

@dataclass(frozen=True)
class PresetStep:
    label: str
    command: str
    params: Optional[ModelParams]
    options: Dict[str, Any] = field(default_factory=dict)


def _ratio(N: int, r: float, **kw: Any) -> ModelParams:
    return ModelParams.from_ratio(N=N, J=1.0, J_over_gprime=r, **kw)


def presets() -> Dict[str, List[PresetStep]]:
    """Named parameter sets, one list of steps per figure."""
    ratios = np.round(np.linspace(0.05, 1.0, 20), 6).tolist()
    return {
        "fig1a": [PresetStep("map", "spectral-map", ModelParams.from_scaled(400, 1.0, 1.0))],
        "fig1b": [PresetStep("map", "spectral-map", ModelParams.from_scaled(400, 1.0, 2.0))],
        "fig3": [PresetStep("wavefunction", "wkb-wavefunction", _ratio(100, 0.25), {"band": 4})],
        "fig4": [PresetStep("defects", "wkb-defects", _ratio(400, 0.25))],
        "fig5a": [PresetStep("dos", "dos", _ratio(400, 100.0))],
        "fig5b": [PresetStep("dos", "dos", _ratio(400, 1.0))],
        "fig5c": [PresetStep("dos", "dos", _ratio(400, 0.5))],
        "fig5d": [PresetStep("dos", "dos", _ratio(400, 0.25))],
        "fig6": [
            PresetStep("orbits", "classical-orbits", ModelParams(N=400, g=0.0, J=1.0), {"ratios": ratios}),
            PresetStep("imbalance", "imbalance-map", ModelParams(N=400, g=0.0, J=1.0, eps_imb=IMBALANCE_PROBE),
                       {"ratios": ratios}),
            PresetStep("boundary", "phase-boundary", ModelParams(N=400, g=0.0, J=1.0)),
        ],
        "fig7": [PresetStep("scan", "classical-scan", ModelParams(N=100, g=0.0, J=1.0),
                            {"theta_points": 20, "coupling_points": 30})],
        "fig8": [PresetStep("poincare", "poincare", ModelParams(N=100, g=0.0, J=1.0),
                            {"couplings": [0.088, 0.311, 0.442, 1.41]})],
        "fig9": [PresetStep("defects", "wkb-defects", _ratio(400, 1.0), {"corrections": True})],
        "figG1": [PresetStep("husimi", "husimi", _ratio(100, 1.0 / 3.0))],
        "figG2": [PresetStep(f"N{N}", "husimi", _ratio(N, 1.0 / 3.0)) for N in (20, 10, 6)],
    }


def _run_figure(config: RunConfig, settings: LabSettings) -> Dict[str, Any]:
    name = config.option("preset")
    table = presets()
    if name not in table:
        raise ConfigError(f"Unknown figure preset {name!r}; choose from {', '.join(table)}")
    steps = table[name]
    if len(steps) == 1:
        step = steps[0]
        return execute(RunConfig(command=step.command, params=step.params, options=step.options,
                                 out=config.out, threads=config.threads), settings)

    start = time.perf_counter()
    results = []
    for step in steps:
        sub = RunConfig(command=step.command, params=step.params, options=step.options,
                        out=str(Path(config.out) / step.label), threads=config.threads)
        results.append(execute(sub, settings))
    writer = ArtifactWriter(config.out)
    summary = {"steps": {step.label: r["summary"] for step, r in zip(steps, results)}}
    writer.manifest(config, time.perf_counter() - start, summary)
    return {"ok": True, "command": "figure", "out": config.out,
            "artifacts": [f"{s.label}/{a}" for s, r in zip(steps, results) for a in r["artifacts"]],
            "summary": summary}


# ── Execution ────────────────────────────────────────────────────────────── #

def execute(config: RunConfig, settings: Optional[LabSettings] = None) -> Dict[str, Any]:
    """Run one configuration and write its artifacts plus manifest.json."""
    settings = settings or LabSettings.from_env()
    if config.command == "figure":
        return _run_figure(config, settings)
    handler = COMMANDS.get(config.command)
    if handler is None:
        raise ConfigError(f"Unknown command {config.command!r}")
    if settings.command_log:
        _configure_command_logging()
        handler = _logged(config.command, handler)
    writer = ArtifactWriter(config.out)
    start = time.perf_counter()
    summary = handler(config, writer)
    writer.manifest(config, time.perf_counter() - start, summary)
    return {"ok": True, "command": config.command, "out": config.out,
            "artifacts": sorted(set(writer.written)), "summary": summary}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise ConfigError(message)


_COMMON = {"command", "N", "g", "J", "g_over_Jsqrt2N", "J_over_gprime", "eps_imb", "out", "threads",
           "from_manifest", "replay_out", "replay_threads"}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--N", type=int, help="polariton number")
    common.add_argument("--J", type=float, help="photon hopping (default 1)")
    coupling = common.add_mutually_exclusive_group()
    coupling.add_argument("--g", type=float, help="qubit-photon coupling")
    coupling.add_argument("--g-over-Jsqrt2N", dest="g_over_Jsqrt2N", type=float)
    coupling.add_argument("--J-over-gprime", dest="J_over_gprime", type=float)
    common.add_argument("--eps-imb", dest="eps_imb", type=float, default=0.0, help="site detuning")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, help="workers (default JCDM_THREADS)")

    parser = _Parser(prog="jcdm", description="Jaynes-Cummings dimer laboratory.")
    parser.add_argument("--from-manifest", dest="from_manifest", metavar="FILE", help="replay a manifest.json")
    parser.add_argument("--out", dest="replay_out", metavar="DIR", help="output directory of the replay")
    parser.add_argument("--threads", dest="replay_threads", type=int, metavar="K")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    p = add("spectrum", "all eigenvalues with parity and band weights")
    p.add_argument("--parity-sectors", dest="parity_sectors", action="store_true")
    add("spectral-map", "|Psi_n(Z)|^2 of every eigenstate")
    p = add("dos", "density of states")
    p.add_argument("--bins", type=int)
    p = add("splittings", "tunneling doublets against the WKB law")
    p.add_argument("--band", type=int, choices=(1, 4))
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--gap-fraction", dest="gap_fraction", type=float)
    p = add("imbalance-map", "quantum <x> of band-1 states against classical x0")
    p.add_argument("--ratios", type=float, nargs="+", metavar="J/g'")
    p = add("wkb-levels", "energies from the quantization rules")
    p.add_argument("--band", type=int, choices=BANDS)
    p.add_argument("--regime", choices=(DELOCALIZED, LOCALIZED, CRITICAL, MIDDLE))
    p.add_argument("--samples", type=int)
    p.add_argument("--unscaled-middle", dest="unscaled_middle", action="store_true")
    p.add_argument("--literal", action="store_true", help="keep the Stirling phase in the critical rule")
    p = add("wkb-defects", "quantization defect of every exact eigenvalue")
    p.add_argument("--corrections", action="store_true", help="add the first-order interband diagnostic")
    p.add_argument("--window-c", dest="window_c", type=float)
    p = add("wkb-wavefunction", "WKB profiles next to exact band components")
    p.add_argument("--band", type=int, choices=BANDS)
    p.add_argument("--states", type=int, nargs="+")
    p = add("phase-boundary", "classical localization boundary")
    p.add_argument("--points", type=int)
    p = add("classical-orbits", "band-1 orbit period and mean imbalance")
    p.add_argument("--ratios", type=float, nargs="+", metavar="J/g'")
    p.add_argument("--points", type=int)
    p = add("classical-scan", "long-time imbalance and localization threshold")
    p.add_argument("--thetas", type=float, nargs="+")
    p.add_argument("--theta-points", dest="theta_points", type=int)
    p.add_argument("--coupling-min", dest="coupling_min", type=float)
    p.add_argument("--coupling-max", dest="coupling_max", type=float)
    p.add_argument("--coupling-points", dest="coupling_points", type=int)
    p.add_argument("--t-transient", dest="t_transient", type=float)
    p.add_argument("--t-average", dest="t_average", type=float)
    p = add("poincare", "Poincare sections of the restricted flow")
    p.add_argument("--couplings", type=float, nargs="+", metavar="g/(2J sqrt N)")
    p.add_argument("--orbits", type=int)
    p.add_argument("--crossings", type=int)
    p.add_argument("--t-max", dest="t_max", type=float, help="in units of 1/J")
    p.add_argument("--section", choices=("theta_L", "time"))
    p = add("husimi", "Husimi Q portraits of lower-lower states")
    p.add_argument("--states", type=int, nargs="+")
    p.add_argument("--s", type=float, help="squeeze factor (default: by energy)")
    p.add_argument("--grid", type=int)
    p = add("figure", "named figure preset")
    p.add_argument("preset", choices=sorted(presets()))
    return parser


def _model_params(args: argparse.Namespace) -> Optional[ModelParams]:
    if args.N is None:
        if any(v is not None for v in (args.g, args.g_over_Jsqrt2N, args.J_over_gprime)):
            raise ConfigError("A coupling needs --N")
        return None
    J = 1.0 if args.J is None else args.J
    if args.g_over_Jsqrt2N is not None:
        return ModelParams.from_scaled(args.N, J, args.g_over_Jsqrt2N, args.eps_imb)
    if args.J_over_gprime is not None:
        return ModelParams.from_ratio(args.N, J, args.J_over_gprime, args.eps_imb)
    return ModelParams(N=args.N, g=args.g or 0.0, J=J, eps_imb=args.eps_imb)


def config_from_args(args: argparse.Namespace, settings: LabSettings) -> RunConfig:
    """CLI flags over JCDM_* settings over defaults."""
    try:
        if args.from_manifest:
            config = RunConfig.from_manifest(args.from_manifest)
            update: Dict[str, Any] = {}
            if args.replay_out:
                update["out"] = args.replay_out
            if args.replay_threads is not None:
                update["threads"] = args.replay_threads
            return RunConfig.model_validate({**config.model_dump(), **update})
        if args.command is None:
            raise ConfigError("Give a subcommand or --from-manifest")
        options = {k: v for k, v in vars(args).items() if k not in _COMMON and v is not None and v is not False}
        threads = args.threads if args.threads is not None else settings.threads
        return RunConfig(command=args.command, params=_model_params(args), options=options,
                         out=args.out, threads=threads)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc.errors()[0]['msg']}") from exc


def _report(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload), file=sys.stderr)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run the command and return the process exit code."""
    try:
        settings = LabSettings.from_env()
        _configure_library_logging(settings.log_level)
        config = config_from_args(build_parser().parse_args(argv), settings)
        result = execute(config, settings)
    except SystemExit as exc:
        return int(exc.code or 0)
    except JcdmError as exc:
        _report(exc.to_dict())
        return exc.exit_code
    except ValidationError as exc:
        err = ConfigError(f"Invalid configuration: {exc.errors()[0]['msg']}")
        _report(err.to_dict())
        return err.exit_code
    except Exception as exc:  # noqa: BLE001
        _report({"ok": False, "category": "internal", "message": f"{type(exc).__name__}: {exc}"})
        return 1
    print(json.dumps(result, default=float))
    return 0
