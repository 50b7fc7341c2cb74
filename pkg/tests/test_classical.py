"""Classical wavefunction evolution and its momentum-map density."""

import numpy as np
import pytest

from hykoop import classical
from hykoop.grids import classical_grid
from hykoop.hamiltonians import ClassicalHamiltonian
from hykoop.states import (
    band_limited_random,
    phase_space_gaussian,
    uniform_phase_state,
)

HBAR = 0.5


def test_generator_is_hermitian_on_grid():
    g = classical_grid(16, 16)
    ham = ClassicalHamiltonian(harmonic_k=1.3, cos_coeff=0.4)
    f = band_limited_random(g, kmax=3, seed=0)
    h = band_limited_random(g, kmax=3, seed=1)
    lhs = g.inner(f, classical.kvh_apply(g, ham, h, HBAR))
    rhs = np.conj(g.inner(h, classical.kvh_apply(g, ham, f, HBAR)))
    assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1)


def test_norm_conserved_on_reference_run():
    g = classical_grid(64, 64)
    ham = ClassicalHamiltonian(harmonic_k=1.0)
    psi0 = g.normalize(phase_space_gaussian(g, sigma_q=0.45, sigma_p=0.45))
    norms = []
    classical.evolve(g, ham, psi0, 1e-3, 1000, HBAR,
                     callback=lambda s, t, psi: norms.append(g.norm(psi)))
    assert abs(norms[-1] ** 2 - 1.0) < 1e-8
    assert max(abs(n**2 - 1.0) for n in norms) < 1e-8


def test_uniform_field_density_is_twice_square():
    g = classical_grid(16, 16)
    psi = uniform_phase_state(g, amplitude=0.7)[:, :, :1] * np.ones(g.shape)
    rho = classical.classical_density(g, psi, HBAR)
    assert np.allclose(rho, 2 * 0.7**2, atol=1e-13)


def test_density_mass_equals_norm_for_p_localized_states():
    g = classical_grid(32, 64)
    psi = g.normalize(phase_space_gaussian(g, sigma_p=0.4, kq=1.0, chirp=0.3))
    rho = classical.classical_density(g, psi, HBAR)
    assert g.integrate(rho) == pytest.approx(1.0, abs=1e-9)


def test_density_transport_matches_liouville_oracle():
    # harmonic rotation: evolve the wavefunction, then check its density
    # against an independent real-valued spectral advection of rho(0).
    # The packet must keep a few-sigma gap to the box walls: the harmonic
    # force kq is a sawtooth on the torus, and wavefunction amplitude
    # reaching the wall gets torn there and rings back into the density
    # at first order in the tail (the advected-density oracle only sees
    # the squared tail, so it stays clean and the comparison fails).
    g = classical_grid(64, 64)
    ham = ClassicalHamiltonian(harmonic_k=1.0)
    psi0 = g.normalize(phase_space_gaussian(g, q0=0.3, p0=0.1,
                                            sigma_q=0.32, sigma_p=0.32))
    rho0 = classical.classical_density(g, psi0, HBAR)
    psi1 = classical.evolve(g, ham, psi0, 1e-3, 1000, HBAR)
    rho1 = classical.classical_density(g, psi1, HBAR)
    oracle = classical.liouville_advect(g, ham, rho0, 1e-3, 1000)
    assert g.norm(rho1 - rho0) > 1.0        # transport actually happened
    assert g.norm(rho1 - oracle) < 1e-6     # measured 6.0e-9


def test_koopman_only_preserves_plain_density():
    g = classical_grid(64, 64)
    ham = ClassicalHamiltonian(harmonic_k=1.0)
    psi0 = g.normalize(phase_space_gaussian(g, q0=0.5, sigma_q=0.4,
                                            sigma_p=0.4))
    psi1 = classical.evolve(g, ham, psi0, 1e-3, 500, HBAR, koopman_only=True)
    d0 = np.abs(psi0) ** 2
    d1 = np.abs(psi1) ** 2
    oracle = classical.liouville_advect(g, ham, d0, 1e-3, 500)
    assert g.norm(d1 - oracle) < 1e-6


def test_kvh_kvn_differ_by_phase_multiplier():
    g = classical_grid(16, 16)
    ham = ClassicalHamiltonian(harmonic_k=0.8, cos_coeff=0.1)
    psi = band_limited_random(g, kmax=3, seed=2)
    Q, P, _ = g.meshes()
    mult = np.broadcast_to(ham.phase_multiplier(Q, P), g.shape)
    diff = classical.kvh_apply(g, ham, psi, HBAR) \
        - classical.kvn_apply(g, ham, psi, HBAR)
    assert np.max(np.abs(diff - mult * psi)) < 1e-12


def test_free_particle_phase_accumulation():
    # V = 0: characteristics translate q by p t / M and the multiplier
    # H - p dH/dp = -p^2/2M feeds the exact phase e^{i p^2 t / (2 M hbar)}
    g = classical_grid(8, 32)
    ham = ClassicalHamiltonian(mass=4.0)
    P = g.meshes()[1]
    psi0 = g.normalize(np.exp(-((P - 0.3) / 0.35) ** 2 / 2)
                       * np.ones(g.shape)).astype(complex)
    t = 0.25
    psi1 = classical.evolve(g, ham, psi0, 5e-4, 500, HBAR)
    shift = P * t / 4.0
    # translate analytically via the q-spectrum
    kq = g.wavenumbers("q")[:, None, None]
    spec = np.fft.fft(psi0, axis=0)
    translated = np.fft.ifft(spec * np.exp(-1j * kq * shift), axis=0)
    expected = translated * np.exp(1j * P**2 * t / (2 * 4.0 * HBAR))
    assert g.norm(psi1 - expected) < 1e-8


def test_constant_hamiltonian_is_pure_phase():
    g = classical_grid(16, 16)
    ham = ClassicalHamiltonian(offset=0.9, include_kinetic=False)
    psi0 = band_limited_random(g, kmax=2, seed=3)
    psi1 = classical.evolve(g, ham, psi0, 1e-3, 200, HBAR)
    assert g.norm(psi1 - psi0 * np.exp(-1j * 0.9 * 0.2 / HBAR)) < 1e-12


def test_expectation_agreement_operator_vs_density():
    g = classical_grid(48, 48)
    ham = ClassicalHamiltonian(harmonic_k=1.0)
    psi = g.normalize(phase_space_gaussian(g, q0=0.4, p0=-0.3,
                                           sigma_q=0.4, sigma_p=0.4))
    a = classical.classical_expectation(g, ham, psi, HBAR)
    b = classical.operator_expectation(g, ham, psi, HBAR)
    assert a == pytest.approx(b, abs=1e-9)


def test_phase_lagrangian_is_minus_multiplier():
    g = classical_grid(8, 8)
    ham = ClassicalHamiltonian(harmonic_k=1.0, cos_coeff=0.2)
    Q, P, _ = g.meshes()
    lag = classical.phase_lagrangian(g, ham)
    assert np.allclose(lag, np.broadcast_to(
        P * ham.dp(Q, P) - ham.value(Q, P), g.shape))
