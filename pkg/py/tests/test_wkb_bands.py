import math

import numpy as np
import pytest

from jcdm.config import ModelParams
from jcdm.errors import DomainError
from jcdm.wkb.bands import (
    action_Q,
    action_S,
    band_of_energy,
    classify,
    critical_energy,
    envelope,
    has_separatrix,
    integrate_to_turning,
    momentum_allowed,
    momentum_forbidden,
    momentum_tilde,
    potential,
    turning_points,
    turning_points_closed_form,
)


@pytest.fixture
def p():
    return ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=0.25)


def test_outer_band_edges(p):
    assert potential(1, "l", 0.0, p) == pytest.approx(2.0 * p.gprime - p.J)
    assert potential(1, "l", 1.0, p) == pytest.approx(p.gprime * math.sqrt(2.0))
    assert potential(1, "l", -1.0, p) == pytest.approx(p.gprime * math.sqrt(2.0))
    assert potential(4, "l", 0.0, p) == pytest.approx(-2.0 * p.gprime - p.J)


def test_band_mirror_symmetries(p):
    xs = np.linspace(-1.0, 1.0, 41)
    np.testing.assert_allclose(potential(1, "l", xs, p), -potential(4, "h", xs, p), atol=1e-12)
    np.testing.assert_allclose(potential(3, "l", xs, p), potential(2, "l", -xs, p), atol=1e-12)
    np.testing.assert_allclose(potential(3, "h", xs, p), potential(2, "h", -xs, p), atol=1e-12)


def test_unknown_band_and_edge(p):
    with pytest.raises(DomainError):
        potential(5, "l", 0.0, p)
    with pytest.raises(DomainError):
        potential(1, "x", 0.0, p)
    with pytest.raises(DomainError):
        potential(1, "l", 1.5, p)


def test_momentum_on_the_edges(p):
    x = 0.3
    assert momentum_allowed(4, potential(4, "l", x, p), x, p) == pytest.approx(0.0, abs=1e-6)
    assert momentum_allowed(4, potential(4, "h", x, p), x, p) == pytest.approx(0.5 * math.pi, abs=1e-6)
    assert momentum_tilde(4, potential(4, "h", x, p), x, p) == pytest.approx(0.0, abs=1e-6)
    assert momentum_allowed(4, -2.0 * p.gprime, 0.0, p) == pytest.approx(0.25 * math.pi)


def test_forbidden_rate(p):
    eps = -2.0 * p.gprime - p.J * math.cosh(2.0)
    assert momentum_forbidden(4, eps, 0.0, p) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        momentum_forbidden(4, -2.0 * p.gprime, 0.0, p)
    with pytest.raises(DomainError):
        momentum_allowed(4, eps, 0.0, p)


def test_envelope_of_outer_bands(p):
    lo, hi = envelope(4, p)
    assert lo == pytest.approx(-2.0 * p.gprime - p.J)
    assert hi == pytest.approx(-p.gprime * math.sqrt(2.0))
    assert envelope(1, p) == pytest.approx((-hi, -lo))


@pytest.mark.parametrize("eps", [-6.5, -6.0, -5.8])
def test_turning_points_match_closed_form(p, eps):
    geo = turning_points(4, eps, p)
    assert geo.regime == "localized"
    assert geo.z_h is not None and geo.z_h < geo.z_l
    assert any(abs(z - geo.z_l) < 1e-9 for z in turning_points_closed_form(4, "l", eps, p))
    assert any(abs(z - geo.z_h) < 1e-9 for z in turning_points_closed_form(4, "h", eps, p))


def test_band_one_geometry_mirrors_band_four(p):
    a = turning_points(4, -6.4, p)
    b = turning_points(1, 6.4, p)
    assert b.z_l == pytest.approx(a.z_l, abs=1e-12)
    assert b.z_h == pytest.approx(a.z_h, abs=1e-12)


def test_energy_outside_envelope(p):
    with pytest.raises(DomainError):
        turning_points(4, -10.0, p)


def test_square_root_end_points():
    value = integrate_to_turning(lambda x: math.sqrt(max(0.0, 1.0 - x)), 0.0, 1.0, singular_b=True)
    assert value == pytest.approx(2.0 / 3.0, rel=1e-10)
    value = integrate_to_turning(lambda x: 1.0 / math.sqrt(1.0 - x), 0.0, 1.0, singular_b=True)
    assert value == pytest.approx(2.0, rel=1e-10)
    value = integrate_to_turning(lambda x: 1.0 / math.sqrt(x), 0.0, 4.0, singular_a=True)
    assert value == pytest.approx(4.0, rel=1e-10)
    assert integrate_to_turning(math.cos, 1.0, 1.0) == 0.0


def test_harmonic_action_at_band_bottom(p):
    delta = 1e-3
    a = 2.0 * p.J
    b = p.gprime / 4.0 + p.J / 2.0
    dS = action_S(4, -2.0 * p.gprime - p.J + delta, p, "delocalized")
    assert dS == pytest.approx(math.pi * delta / (2.0 * math.sqrt(a * b)), rel=1e-2)


def test_middle_bands_share_their_action():
    q = ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=0.5)
    s2 = action_S(2, 0.5, q, "middle")
    s3 = action_S(3, 0.5, q, "middle")
    assert s2 == pytest.approx(s3, rel=1e-7)


def test_regime_classification(p):
    assert has_separatrix(p)
    assert not has_separatrix(ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=0.5))
    eps_c = critical_energy(4, p)
    assert eps_c == pytest.approx(p.J - 2.0 * p.gprime)
    assert classify(4, eps_c, p) == "critical"
    assert classify(4, eps_c - 1.0, p) == "delocalized"
    assert classify(4, eps_c + 0.5, p) == "localized"
    assert classify(1, -eps_c - 0.5, p) == "localized"
    assert classify(1, -eps_c + 1.0, p) == "delocalized"
    assert classify(2, 0.0, p) == "middle"
    weak = ModelParams.from_ratio(N=100, J=1.0, J_over_gprime=1.0)
    assert classify(4, critical_energy(4, weak), weak) != "critical"
    with pytest.raises(DomainError):
        critical_energy(2, p)


def test_band_of_energy(p):
    assert band_of_energy(-8.0, p) == 4
    assert band_of_energy(8.0, p) == 1
    assert band_of_energy(0.0, p) == 2


def test_wrong_regime_for_energy(p):
    with pytest.raises(DomainError):
        action_S(4, -6.5, p, "delocalized")
    with pytest.raises(DomainError):
        action_S(4, -8.5, p, "localized")
    with pytest.raises(DomainError):
        action_S(4, -8.5, p, "middle")


def test_tunneling_action_closes_at_separatrix(p):
    eps_c = critical_energy(4, p)
    near = action_Q(4, eps_c + 1e-4, p)
    far = action_Q(4, eps_c + 0.5, p)
    assert 0.0 < near < 1e-2
    assert far > near
    with pytest.raises(DomainError):
        action_Q(4, eps_c - 0.5, p)
