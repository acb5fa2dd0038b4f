import cmath
import math

import numpy as np
import pytest

from jcdm.config import ModelParams
from jcdm.errors import DomainError
from jcdm.spectra import solve
from jcdm.wkb.bands import critical_energy, critical_window, envelope
from jcdm.wkb.quantization import (
    complex_log_gamma,
    critical_chi,
    level_spacing,
    predicted_splitting,
    quantization_functional,
    quantization_residual,
    regime_window,
    solve_levels,
    tunneling_prefactor,
    wrap_pi,
)


@pytest.fixture(scope="module")
def fine():
    return ModelParams.from_ratio(N=400, J=1.0, J_over_gprime=0.25)


def test_log_gamma_identities():
    z = 0.3 + 0.7j
    assert cmath.exp(complex_log_gamma(z + 1.0)) == pytest.approx(z * cmath.exp(complex_log_gamma(z)))
    assert complex_log_gamma(0.5).real == pytest.approx(0.5 * math.log(math.pi))
    for y in (0.0, 0.7, 3.0):
        modulus = 2.0 * complex_log_gamma(0.5 + 1j * y).real
        assert modulus == pytest.approx(math.log(math.pi / math.cosh(math.pi * y)), abs=1e-12)
    with pytest.raises(DomainError):
        complex_log_gamma(-2.0)


def test_chi_forms_agree(strong):
    eps = critical_energy(4, strong) + 0.01
    pair = critical_chi(4, eps, strong)
    assert pair.via_gap == pytest.approx(pair.via_mu, rel=1e-12)
    # lambda = N * 0.01 = 1, mu = 1 at J/g' = 1/4
    assert pair.via_mu == pytest.approx(0.5)


def test_chi_needs_separatrix():
    weak = ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=1.0)
    with pytest.raises(DomainError):
        critical_chi(4, critical_energy(4, weak), weak)


def test_wrap_pi():
    assert wrap_pi(0.25) == pytest.approx(0.25)
    assert wrap_pi(math.pi + 0.1) == pytest.approx(0.1)
    assert wrap_pi(-math.pi) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(wrap_pi(np.array([3.0 * math.pi, 0.5])), [0.0, 0.5], atol=1e-12)


def test_tunneling_prefactor():
    assert tunneling_prefactor(4) == 0.25
    assert tunneling_prefactor(1) == 1.0
    with pytest.raises(DomainError):
        tunneling_prefactor(2)


def test_regime_must_fit_band(strong):
    with pytest.raises(DomainError):
        quantization_functional(2, "localized", 0.0, strong)
    with pytest.raises(DomainError):
        quantization_functional(4, "middle", -8.0, strong)
    with pytest.raises(DomainError):
        quantization_residual(4, "tunneling", -8.0, strong)


def test_regime_windows(strong):
    eps_c = critical_energy(4, strong)
    lo, hi = envelope(4, strong)
    assert regime_window(4, "delocalized", strong) == pytest.approx((lo, eps_c))
    assert regime_window(4, "localized", strong) == pytest.approx((eps_c, hi))
    w = critical_window(strong)
    assert regime_window(4, "critical", strong) == pytest.approx((eps_c - w, eps_c + w))
    assert regime_window(1, "localized", strong) == pytest.approx((-hi, -eps_c))


def test_delocalized_levels_count_up_from_zero(strong):
    levels = solve_levels(4, "delocalized", strong)
    assert [lv.n for lv in levels] == list(range(len(levels)))
    for lv in levels:
        assert quantization_residual(4, "delocalized", lv.eps, strong) < 1e-8


def test_ground_level_matches_diagonalization(fine):
    exact = solve(fine).eps
    ground = solve_levels(4, "delocalized", fine, n_range=(0, 0))[0]
    spacing = exact[1] - exact[0]
    assert abs(ground.eps - exact[0]) < 0.1 * spacing


def test_localized_levels_are_self_consistent(strong):
    levels = solve_levels(4, "localized", strong)
    assert {lv.branch for lv in levels} == {1, -1}
    for lv in levels[:20]:
        assert quantization_residual(4, "localized", lv.eps, strong) < 1e-8


def test_exact_states_have_small_defect(fine):
    exact = solve(fine).eps
    for eps in exact[:10]:
        assert quantization_residual(4, "delocalized", float(eps), fine) < 0.05


def test_level_spacing_matches_exact_ladder(strong, strong_solution):
    eps = strong_solution.eps
    k = int(np.argmin(np.abs(eps + 8.0)))
    exact = 0.5 * (eps[k + 1] - eps[k - 1])
    assert level_spacing(4, "delocalized", float(eps[k]), strong) == pytest.approx(exact, rel=0.05)


def test_splitting_estimate(strong):
    est = predicted_splitting(-6.5, strong)
    assert est.dQ > 0.0
    assert est.delta_eps == pytest.approx(strong.h * est.delta_E)
    assert est.delta_E == pytest.approx(0.5 * math.exp(-est.dQ / strong.h) / abs(est.dS_prime))
    deeper = predicted_splitting(-6.0, strong)
    assert deeper.delta_eps < est.delta_eps
    with pytest.raises(DomainError):
        predicted_splitting(-8.0, strong)


def test_critical_rule_reduces_far_from_separatrix(strong):
    eps_c = critical_energy(4, strong)
    levels = solve_levels(4, "delocalized", strong, window=(eps_c - 0.5, eps_c - 0.2))
    assert levels
    for lv in levels:
        assert quantization_residual(4, "critical", lv.eps, strong) < 0.02


def test_delocalized_ladder_has_every_exact_level(strong, strong_solution):
    eps = strong_solution.eps
    eps_c = critical_energy(4, strong)
    levels = solve_levels(4, "delocalized", strong)
    assert abs(len(levels) - int(np.sum(eps < eps_c))) <= 1
    assert levels[0].n == 0
    assert abs(levels[0].eps - eps[0]) < 0.2 * (eps[1] - eps[0])


def test_localized_levels_match_exact_count(strong, strong_solution):
    sol = strong_solution
    lo, hi = regime_window(4, "localized", strong)
    exact = [n for n in range(len(sol)) if lo < sol.eps[n] < hi and sol.band_weights(n)[3] > 0.5]
    levels = solve_levels(4, "localized", strong)
    assert abs(len(levels) - len(exact)) <= 2


def test_levels_reach_the_window_edges(strong):
    eps_c = critical_energy(4, strong)
    lo, _ = envelope(4, strong)
    levels = solve_levels(4, "delocalized", strong)
    spacing = level_spacing(4, "delocalized", levels[-1].eps, strong)
    assert eps_c - levels[-1].eps < 2.0 * spacing
    assert levels[0].eps - lo < level_spacing(4, "delocalized", levels[0].eps, strong)
