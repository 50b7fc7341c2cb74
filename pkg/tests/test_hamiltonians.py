"""Potential presets, analytic gradients, and Hamiltonian plumbing."""

import numpy as np
import pytest

from hykoop.grids import Grid, classical_grid
from hykoop.hamiltonians import (
    BilinearPotential,
    ClassicalHamiltonian,
    HybridHamiltonian,
    QuadraticPotential,
    SeparablePotential,
    TwoLevelPotential,
    ZeroPotential,
    potential_from_dict,
    two_level_sectors,
)


def _fd_gradient(func, u, h=1e-6):
    return (func(u + h) - func(u - h)) / (2 * h)


@pytest.mark.parametrize("pot", [
    SeparablePotential(q_harmonic=1.2, q_cos=0.4, x_harmonic=0.7, x_cos=0.2),
    BilinearPotential(lam=0.8),
    QuadraticPotential(lam=0.3),
])
def test_potential_gradients_match_finite_differences(pot):
    q = np.linspace(-2.0, 2.0, 7)
    x = 0.7
    assert np.allclose(pot.dv_dq(q, x),
                       _fd_gradient(lambda u: pot.v(u, x), q), atol=1e-8)
    assert np.allclose(pot.dv_dx(q, x),
                       _fd_gradient(lambda u: pot.v(q, u), x), atol=1e-8)


def test_two_level_gradient_and_signs():
    pot = TwoLevelPotential(lam=0.4, v0_cos=0.3)
    q = np.linspace(-2.0, 2.0, 7)
    for level in (0, 1):
        assert np.allclose(pot.dv_dq(q, level),
                           _fd_gradient(lambda u: pot.v(u, level), q),
                           atol=1e-8)
    # level j=0 carries sign +1, j=1 sign -1
    assert pot.v(0.5, 0) - pot.v(0.5, 1) == pytest.approx(
        2 * 0.4 * np.sin(0.5))
    with pytest.raises(ValueError):
        pot.dv_dx(q, 0)


def test_zero_potential_is_flat_and_uncoupled():
    pot = ZeroPotential()
    assert not pot.coupled
    assert np.all(pot.v(np.ones(3), 0.0) == 0.0)
    assert BilinearPotential(lam=0.0).coupled is False
    assert BilinearPotential(lam=0.1).coupled is True


def test_potential_from_dict_round_trip():
    pot = potential_from_dict({"kind": "bilinear", "lam": 0.25})
    assert isinstance(pot, BilinearPotential) and pot.lam == 0.25
    with pytest.raises(ValueError, match="unknown potential"):
        potential_from_dict({"kind": "morse"})


def test_classical_hamiltonian_value_and_gradients():
    ham = ClassicalHamiltonian(mass=2.0, harmonic_k=1.5, cos_coeff=0.3,
                               sin_coeff=-0.2, offset=0.7)
    q, p = 0.4, -1.1
    assert ham.value(q, p) == pytest.approx(
        p**2 / 4.0 + 0.75 * q**2 + 0.3 * np.cos(q) - 0.2 * np.sin(q) + 0.7)
    assert ham.dq(q, p) == pytest.approx(
        _fd_gradient(lambda u: ham.value(u, p), q), abs=1e-7)
    assert ham.dp(q, p) == pytest.approx(p / 2.0)
    # H - p dH/dp drops the kinetic term but keeps V and the offset
    assert ham.phase_multiplier(q, p) == pytest.approx(
        ham.value(q, p) - p**2 / 2.0)


def test_classical_hamiltonian_kinetic_switch():
    ham = ClassicalHamiltonian(harmonic_k=1.0, include_kinetic=False)
    assert ham.value(0.3, 2.0) == pytest.approx(0.045)
    assert np.all(ham.dp(np.zeros(3), np.ones(3)) == 0.0)
    with pytest.raises(ValueError):
        ClassicalHamiltonian(mass=0.0)


def test_hybrid_hamiltonian_interaction_split():
    ham = HybridHamiltonian(hbar=0.5, M=2.0,
                            potential=BilinearPotential(lam=0.6))
    q, p, x = 0.3, 1.2, -0.8
    v = 0.6 * np.sin(q) * np.sin(x)
    assert ham.h_interaction(q, p, x) == pytest.approx(p**2 / 4.0 + v)
    assert ham.l_interaction(q, p, x) == pytest.approx(p**2 / 4.0 - v)
    dp, dq = ham.vector_field(q, p, x)
    assert dp == pytest.approx(p / 2.0)
    assert dq == pytest.approx(-0.6 * np.cos(q) * np.sin(x))


def test_sampled_hamiltonian_shapes_and_values():
    g = Grid(8, 8, 4)
    ham = HybridHamiltonian(potential=BilinearPotential(lam=0.5))
    s = ham.sampled(g)
    assert s.h_i.shape == g.shape
    Q, P, X = g.meshes()
    assert np.allclose(s.h_i - s.l_i, 2 * 0.5 * np.sin(Q) * np.sin(X))
    assert np.allclose(s.dp_h, P * np.ones(g.shape))


def test_hybrid_validation():
    with pytest.raises(ValueError):
        HybridHamiltonian(hbar=-1.0)
    with pytest.raises(ValueError, match="quantum kinetic"):
        HybridHamiltonian(potential=TwoLevelPotential(),
                          include_quantum_kinetic=True)


def test_two_level_sectors_match_potential_rows():
    ham = HybridHamiltonian(hbar=0.3, M=1.7,
                            potential=TwoLevelPotential(lam=0.4, v0_cos=0.2),
                            include_quantum_kinetic=False)
    upper, lower = two_level_sectors(ham)
    q = np.linspace(-3.0, 3.0, 11)
    assert np.allclose(upper.v(q), ham.potential.v(q, 0))
    assert np.allclose(lower.v(q), ham.potential.v(q, 1))
    assert upper.mass == lower.mass == 1.7
    with pytest.raises(ValueError):
        two_level_sectors(HybridHamiltonian(potential=ZeroPotential()))
