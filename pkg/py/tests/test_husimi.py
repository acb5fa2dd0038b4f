import math
from dataclasses import replace

import numpy as np
import pytest

from jcdm.config import ModelParams
from jcdm.errors import DomainError
from jcdm.husimi import (
    HusimiGrid,
    classical_contours,
    half_max_components,
    harmonic_widths,
    husimi_q,
    kappa0,
    q_moment_prediction,
    q_moments,
    representative_states,
    squeeze_for_state,
)
from jcdm.spectra import solve
from jcdm.wkb.bands import band_hamiltonian, critical_energy


@pytest.fixture(scope="module")
def ground(portrait, portrait_solution):
    return husimi_q(portrait_solution, 0, portrait)


def test_kappa0():
    assert kappa0(ModelParams(N=100, g=1.0, J=0.1)) == pytest.approx(7.71, abs=0.01)
    with pytest.raises(DomainError):
        kappa0(ModelParams(N=100, g=0.0, J=0.1))


def test_squeeze_must_not_widen(portrait, portrait_solution):
    with pytest.raises(DomainError):
        husimi_q(portrait_solution, 0, portrait, s=0.5)


def test_rejects_other_bands(portrait, portrait_solution):
    with pytest.raises(DomainError):
        husimi_q(portrait_solution, len(portrait_solution) - 1, portrait)


def test_ground_state_peaks_at_band_minimum(ground):
    assert np.all(ground.Q >= 0.0)
    i, k = np.unravel_index(np.argmax(ground.Q), ground.Q.shape)
    assert abs(ground.x[i]) <= ground.x[1] - ground.x[0]
    assert abs(ground.theta[k]) <= ground.theta[1] - ground.theta[0]
    assert ground.leakage < 0.05


def test_parity_states_have_symmetric_q(ground):
    np.testing.assert_allclose(ground.Q, ground.Q[::-1, ::-1], atol=1e-8 * ground.Q.max())


def test_ground_state_widths(portrait, ground):
    moments = q_moments(ground)
    var_x, var_theta = q_moment_prediction(portrait)
    assert moments["mean_x"] == pytest.approx(0.0, abs=1e-8)
    assert moments["var_x"] == pytest.approx(var_x, rel=0.15)
    assert moments["var_theta"] == pytest.approx(var_theta, rel=0.15)


def test_predicted_widths_shrink_with_N(portrait):
    big = q_moment_prediction(portrait.with_N(400))
    small = q_moment_prediction(portrait)
    assert big[0] == pytest.approx(small[0] / 4.0)
    assert big[1] == pytest.approx(small[1] / 4.0)


def test_ground_state_is_one_blob(ground):
    assert half_max_components(ground) == 1


def _grid(Q, theta):
    return HusimiGrid(x=np.linspace(-1.0, 1.0, Q.shape[0]), theta=theta, Q=Q, kappa=1.0, s=1.0, leakage=0.0)


def test_components_wrap_in_theta():
    theta = np.linspace(-0.5 * math.pi, 0.5 * math.pi, 21)
    Q = np.zeros((21, 21))
    Q[3:6, :2] = 1.0
    Q[3:6, -2:] = 1.0
    assert half_max_components(_grid(Q, theta)) == 1
    Q[15:18, 9:12] = 1.0
    assert half_max_components(_grid(Q, theta)) == 2
    open_theta = np.linspace(-1.0, 1.0, 21)
    assert half_max_components(_grid(Q, open_theta)) == 3


def test_contours_lie_on_energy_shell(portrait):
    levels = classical_contours(portrait, [-6.0])
    assert len(levels) == 1 and levels[0].lines
    for line in levels[0].lines:
        H = band_hamiltonian(4, line[:, 0], line[:, 1], portrait)
        np.testing.assert_allclose(H, -6.0, atol=5e-3)


def test_representative_states(portrait, portrait_solution):
    picks = representative_states(portrait_solution, portrait)
    assert set(picks) == {"ground", "oscillatory", "separatrix", "localized"}
    assert len(set(picks.values())) == 4
    assert picks["ground"] == 0
    eps = portrait_solution.eps
    assert eps[picks["ground"]] < eps[picks["oscillatory"]] < eps[picks["separatrix"]] < eps[picks["localized"]]
    assert eps[picks["localized"]] > critical_energy(4, portrait)


def test_localized_portrait_has_two_lobes(portrait, portrait_solution):
    n = representative_states(portrait_solution, portrait)["localized"]
    grid = husimi_q(portrait_solution, n, portrait, squeeze_for_state(float(portrait_solution.eps[n]), portrait))
    assert half_max_components(grid) == 2


@pytest.mark.parametrize("N", [20, 10, 6])
def test_portrait_topology_survives_small_N(portrait, N):
    p = portrait.with_N(N)
    sol = solve(p)
    picks = representative_states(sol, p)
    assert len(set(picks.values())) == len(picks) == 4
    assert half_max_components(husimi_q(sol, picks["ground"], p)) == 1
    n = picks["localized"]
    assert half_max_components(husimi_q(sol, n, p, squeeze_for_state(float(sol.eps[n]), p))) == 2


def test_representative_states_need_parity(portrait, portrait_solution):
    mixed = replace(portrait_solution, parity=np.zeros_like(portrait_solution.parity))
    with pytest.raises(DomainError):
        representative_states(mixed, portrait)


def test_squeeze_schedule(portrait):
    assert squeeze_for_state(-100.0, portrait) == 1.0
    assert squeeze_for_state(100.0, portrait) == 2.0


def test_harmonic_widths(portrait):
    sigma_x, sigma_theta = harmonic_widths(portrait)
    assert sigma_x * sigma_theta == pytest.approx(0.5 * portrait.h)
    big = harmonic_widths(portrait.with_N(400))
    assert big[0] == pytest.approx(0.5 * sigma_x)
    assert big[1] == pytest.approx(0.5 * sigma_theta)
