import math

import numpy as np
import pytest

from jcdm.config import ModelParams
from jcdm.errors import ConfigError, DomainError
from jcdm.model import assemble_hamiltonian, enumerate_basis
from jcdm.spectra import (
    DEFAULT_DOS_BINS,
    POLARITON_TRANSFORM,
    diagonalize,
    dos,
    equivalent_position,
    imbalance_map,
    solve,
    spectral_map,
    splittings,
)
from jcdm.wkb.bands import critical_energy, critical_window, envelope, potential
from jcdm.wkb.quantization import predicted_splitting, regime_window, tunneling_prefactor

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def test_closed_form_spectrum():
    sol = solve(ModelParams(N=1, g=1.0, J=1.0))
    np.testing.assert_allclose(sol.energies, [-GOLDEN, -1.0 / GOLDEN, 1.0 / GOLDEN, GOLDEN], atol=1e-12)
    np.testing.assert_allclose(sol.eps, sol.energies)


def test_eigenvectors_are_orthonormal():
    sol = solve(ModelParams(N=12, g=2.0, J=0.7))
    np.testing.assert_allclose(sol.vectors.T @ sol.vectors, np.eye(len(sol)), atol=1e-10)


def test_parity_resolved_spectrum_agrees():
    params = ModelParams.from_ratio(N=30, J=1.0, J_over_gprime=0.3)
    plain = solve(params, parity_resolved=False)
    resolved = solve(params)
    np.testing.assert_allclose(resolved.energies, plain.energies, atol=1e-9)
    assert set(np.unique(resolved.parity)) <= {-1, 1}
    assert np.all(resolved.parity != 0)


def test_site_symmetric_spectrum_is_parity_resolved(strong_solution):
    sol = strong_solution
    assert np.all(np.abs(sol.parity) == 1)
    np.testing.assert_allclose(sol.traced, sol.traced[:, ::-1], atol=1e-8)
    np.testing.assert_allclose(sol.mean_x, 0.0, atol=1e-8)


def test_parity_sectors_need_site_symmetry():
    p = ModelParams.from_ratio(N=40, J=1.0, J_over_gprime=0.25, eps_imb=1e-3)
    with pytest.raises(DomainError):
        solve(p, parity_resolved=True)
    assert np.any(solve(p).parity == 0)


def test_profiles_normalized_and_symmetric():
    sol = solve(ModelParams.from_ratio(N=24, J=1.0, J_over_gprime=0.5), parity_resolved=True)
    np.testing.assert_allclose(sol.traced.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(sol.traced, sol.traced[:, ::-1], atol=1e-8)
    np.testing.assert_allclose(sol.mean_x, 0.0, atol=1e-8)


def test_band_weights_sum_to_one():
    np.testing.assert_allclose(POLARITON_TRANSFORM @ POLARITON_TRANSFORM.T, np.eye(4), atol=1e-15)
    sol = solve(ModelParams.from_ratio(N=10, J=1.0, J_over_gprime=0.25))
    for n in (0, 7, 39):
        assert sol.band_weights(n).sum() == pytest.approx(1.0, abs=1e-12)


def test_ground_state_is_lower_lower(strong_solution):
    assert strong_solution.band_weights(0)[3] > 0.95


def test_spectral_map_rows(strong_solution):
    smap = spectral_map(strong_solution)
    rows = list(smap.rows())
    assert len(rows) == len(strong_solution) * len(strong_solution.x)
    x, e, w = rows[0]
    assert x == pytest.approx(-1.0)
    assert e == pytest.approx(strong_solution.eps[0])


def test_forbidden_wedge_is_empty():
    p = ModelParams.from_ratio(N=200, J=1.0, J_over_gprime=0.25)
    sol = solve(p)
    eps_c = critical_energy(4, p)
    centre = len(sol.x) // 2
    top = -p.gprime * math.sqrt(2.0)
    localized = [n for n in range(len(sol))
                 if eps_c + 0.3 < sol.eps[n] < top - 0.3 and sol.band_weights(n)[3] > 0.9]
    assert localized
    for n in localized:
        assert sol.traced[n, centre] < 1e-6


def test_dos_counts_all_states(strong_solution):
    hist = dos(strong_solution, 50)
    assert hist.total == len(strong_solution)
    assert len(hist.centers) == 50
    assert hist.count_near(strong_solution.eps[0]) >= 1


def test_dos_bin_floor(strong_solution):
    with pytest.raises(ConfigError):
        dos(strong_solution, 5)


def test_doublets_pair_opposite_parity():
    p = ModelParams.from_ratio(N=60, J=1.0, J_over_gprime=0.25)
    sol = solve(p, parity_resolved=True)
    report = splittings(sol, regime_window(4, "localized", p))
    assert report.pairs
    for pair in report.pairs:
        assert sol.parity[pair.lower] * sol.parity[pair.upper] == -1
        assert pair.delta_eps < 0.1 * report.mean_spacing


def _measured_pairs(N):
    p = ModelParams.from_ratio(N=N, J=1.0, J_over_gprime=0.25)
    lo, hi = regime_window(4, "localized", p)
    report = splittings(solve(p), (lo + 2.0 * critical_window(p), hi))
    return p, [pair for pair in report.pairs if pair.delta_eps > 1e-13]


@pytest.mark.slow
@pytest.mark.parametrize("N", [100, 200, 400])
def test_splitting_follows_tunneling_law(N):
    p, pairs = _measured_pairs(N)
    assert pairs
    for pair in pairs:
        predicted = predicted_splitting(pair.mean_eps, p).delta_eps
        assert math.log(predicted) == pytest.approx(math.log(pair.delta_eps), rel=0.15)


@pytest.mark.slow
def test_splitting_decays_with_tunneling_action():
    # ln(delta_E |dS'| / 2p) = -N dQ: the N-slope of every doublet is -dQ at its energy.
    exponents, logs = [], []
    for N in (100, 200, 400):
        p, pairs = _measured_pairs(N)
        for pair in pairs:
            est = predicted_splitting(pair.mean_eps, p)
            exponents.append(N * est.dQ)
            logs.append(math.log(N * pair.delta_eps * abs(est.dS_prime) / (2.0 * tunneling_prefactor(4))))
    assert len(exponents) >= 3
    slope = np.polyfit(exponents, logs, 1)[0]
    assert slope == pytest.approx(-1.0, rel=0.1)


def test_equivalent_position_edges():
    p = ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=0.25)
    assert equivalent_position(p.gprime * math.sqrt(2.0), p) == pytest.approx(1.0, abs=1e-9)
    x0 = equivalent_position(potential(1, "l", 0.4, p), p)
    assert x0 == pytest.approx(0.4, abs=1e-9)
    assert equivalent_position(10.0 * p.gprime, p) is None


def test_imbalance_map_needs_probe(strong_solution):
    with pytest.raises(DomainError):
        imbalance_map(strong_solution)


def test_imbalance_map_accounts_for_every_state():
    p = ModelParams.from_ratio(N=40, J=1.0, J_over_gprime=0.25, eps_imb=1e-8)
    sol = solve(p)
    result = imbalance_map(sol)
    assert result.J_over_gprime == pytest.approx(0.25)
    assert len(result.points) + len(result.skipped) == len(sol)
    assert result.points
    for pt in result.points:
        assert 0.0 <= pt.x0 <= 1.0


@pytest.mark.slow
def test_localized_states_are_polarized():
    p = ModelParams.from_ratio(N=200, J=1.0, J_over_gprime=0.25, eps_imb=1e-8)
    result = imbalance_map(solve(p))
    deep = [pt for pt in result.points if pt.x0 > 0.6]
    assert deep
    polarized = sum(abs(pt.mean_x) > 0.5 for pt in deep)
    assert polarized >= 0.9 * len(deep)


def test_diagonalize_rejects_wrong_basis():
    H = assemble_hamiltonian(ModelParams(N=3, g=1.0, J=1.0), enumerate_basis(3))
    with pytest.raises(ConfigError):
        diagonalize(H, enumerate_basis(2))


def test_spectrum_reproduces_trace_identities():
    p = ModelParams.from_ratio(N=60, J=1.0, J_over_gprime=0.3, eps_imb=0.05)
    sol = solve(p)
    dense = assemble_hamiltonian(p, enumerate_basis(p.N)).to_dense()
    scale = float(np.sum(np.abs(sol.energies)))
    assert abs(float(sol.energies.sum()) - float(np.trace(dense))) <= 1e-8 * scale
    assert float(np.sum(sol.energies ** 2)) == pytest.approx(float(np.sum(dense ** 2)), rel=1e-8)


@pytest.mark.slow
def test_mean_level_spacing_scales_as_inverse_N(strong):
    scaled = []
    for N in (100, 200, 400):
        p = strong.with_N(N)
        eps = solve(p).eps
        ladder = eps[(eps > envelope(4, p)[0] + 0.3) & (eps < critical_energy(4, p) - 0.3)]
        scaled.append(N * float(np.mean(np.diff(ladder))))
    assert max(scaled) == pytest.approx(min(scaled), rel=0.1)


@pytest.mark.slow
def test_dos_gap_at_outer_band_tops():
    p = ModelParams.from_ratio(N=400, J=1.0, J_over_gprime=0.25)
    hist = dos(solve(p), DEFAULT_DOS_BINS)
    mean = hist.total / len(hist.centers)
    top = p.gprime * math.sqrt(2.0)
    assert hist.count_near(-top) < 0.2 * mean
    assert hist.count_near(top) < 0.2 * mean


@pytest.mark.slow
def test_dos_is_flat_without_coupling_dominance():
    hist = dos(solve(ModelParams.from_ratio(N=400, J=1.0, J_over_gprime=100.0)), DEFAULT_DOS_BINS)
    mean = hist.total / len(hist.centers)
    assert np.all(np.abs(hist.counts - mean) <= 3.0 * math.sqrt(mean))


@pytest.mark.slow
@pytest.mark.parametrize("ratio", [0.5, 1.0])
def test_dos_peaks_at_separatrix_energies(ratio):
    p = ModelParams.from_ratio(N=400, J=1.0, J_over_gprime=ratio)
    hist = dos(solve(p), DEFAULT_DOS_BINS)
    width = hist.edges[1] - hist.edges[0]
    peak = 2.0 * p.gprime - p.J
    for side in (-1.0, 1.0):
        half = hist.centers * side > 0.0
        centre = hist.centers[half][np.argmax(hist.counts[half])]
        assert abs(centre - side * peak) <= 3.0 * width
