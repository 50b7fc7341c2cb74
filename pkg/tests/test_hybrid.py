"""Hybrid generator, RK4 integrator, and the dense matrix-exponential oracle."""

import numpy as np
import pytest

from hykoop import classical, hybrid
from hykoop.errors import NumericalInstability, SizeGuardError
from hykoop.grids import Grid
from hykoop.hamiltonians import (BilinearPotential, ClassicalHamiltonian,
                                 HybridHamiltonian, SeparablePotential)
from hykoop.states import (band_limited_random, coherent_state_x,
                           phase_space_gaussian, product_state,
                           quantum_gaussian_x)


def bilinear_ham(lam=0.4, hbar=0.3):
    return HybridHamiltonian(hbar=hbar, m=1.0, M=1.2,
                             potential=BilinearPotential(lam=lam))


def test_generator_is_hermitian():
    g = Grid(8, 8, 4)
    ham = bilinear_ham()
    u = band_limited_random(g, kmax=1, seed=3)
    v = band_limited_random(g, kmax=1, seed=4)
    lhs = g.inner(u, hybrid.hybrid_apply(g, ham, v))
    rhs = g.inner(hybrid.hybrid_apply(g, ham, u), v)
    assert abs(lhs - rhs) <= 1e-10 * g.norm(u) * g.norm(v)


def test_purely_quantum_reduction():
    # with the classical kinetic term off and V = V_Q(x), the generator
    # collapses to the ordinary quantum Hamiltonian acting on the x axis
    g = Grid(4, 4, 32)
    ham = HybridHamiltonian(hbar=0.5, m=2.0,
                            potential=SeparablePotential(x_cos=0.7),
                            include_classical_kinetic=False)
    ups = band_limited_random(g, kmax=1, seed=9)
    _, _, X = g.meshes()
    want = (-ham.hbar**2 / (2.0 * ham.m)) * g.lap_x(ups) + 0.7 * np.cos(X) * ups
    got = hybrid.hybrid_apply(g, ham, ups)
    assert g.norm(got - want) < 1e-12


def test_purely_classical_reduction_slicewise():
    # quantum kinetic off + V = V_C(q): each x-slice evolves under the
    # one-particle phase-space generator independently
    g = Grid(16, 16, 4)
    ham = HybridHamiltonian(hbar=0.4, M=1.5,
                            potential=SeparablePotential(q_harmonic=0.8, q_cos=0.2),
                            include_quantum_kinetic=False)
    cham = ClassicalHamiltonian(mass=1.5, harmonic_k=0.8, cos_coeff=0.2)
    gc = Grid(16, 16, 1)
    ups = band_limited_random(g, kmax=1, seed=11)
    got = hybrid.hybrid_apply(g, ham, ups)
    for j in range(g.n_x):
        sl = classical.kvh_apply(gc, cham, ups[:, :, j:j + 1], hbar=0.4)
        assert gc.norm(got[:, :, j:j + 1] - sl) < 1e-12


def test_rk4_linear_phase():
    omega = 1.7
    y0 = np.array([1.0 + 0.0j])
    y1 = hybrid.rk4_step(lambda y: -1j * omega * y, y0, 0.01)
    exact = np.exp(-1j * omega * 0.01)
    assert abs(y1[0] - exact) < (omega * 0.01) ** 5
    assert hybrid.rk4_step(lambda y: -1j * omega * y, y0, 0.0)[0] == y0[0]


def test_rk4_matches_dense_oracle():
    g = Grid(8, 8, 4)
    ham = bilinear_ham(lam=0.4)
    ups0 = g.normalize(phase_space_gaussian(g, sigma_q=0.8, sigma_p=0.8)
                       * np.exp(1j * g.x)[None, None, :])
    res = hybrid.evolve(g, ham, ups0, T=0.5, dt=1e-3, record_every=100)
    want = hybrid.propagate_dense(g, ham, ups0, 0.5)
    assert g.norm(res.state - want) < 1e-6


def test_evolve_zero_hamiltonian_is_identity():
    g = Grid(8, 8, 4)
    ham = HybridHamiltonian(hbar=0.2, include_quantum_kinetic=False,
                            include_classical_kinetic=False)
    ups0 = band_limited_random(g, kmax=1, seed=1)
    res = hybrid.evolve(g, ham, ups0, T=0.2, dt=0.01)
    assert g.norm(res.state - ups0) < 1e-13


def test_decoupled_evolution_keeps_schmidt_rank_one():
    g = Grid(16, 16, 16)
    ham = HybridHamiltonian(hbar=0.4, m=1.0, M=1.0,
                            potential=SeparablePotential(q_cos=0.5, x_cos=0.6))
    z = phase_space_gaussian(g, q0=0.2, sigma_q=0.45, sigma_p=0.45)
    ups0 = product_state(g, z, quantum_gaussian_x(g, sigma=0.5))
    res = hybrid.evolve(g, ham, ups0, T=0.5, dt=2e-3, record_every=50)
    sv = hybrid.schmidt_singular_values(g, res.state)
    assert sv[1] / sv[0] < 1e-8


def test_dense_propagator_zero_is_identity():
    g = Grid(4, 4, 4)
    ham = HybridHamiltonian(hbar=0.3, include_quantum_kinetic=False,
                            include_classical_kinetic=False)
    u = hybrid.dense_propagator(g, ham, 0.7)
    assert np.max(np.abs(u - np.eye(g.size))) < 1e-12


def test_dense_propagator_diagonal_potential_phases():
    # all derivative terms off: the generator is multiplication by +V(x)
    # (through -L_I) and the propagator is a diagonal phase field
    g = Grid(4, 4, 8)
    ham = HybridHamiltonian(hbar=0.5,
                            potential=SeparablePotential(x_cos=0.9),
                            include_quantum_kinetic=False,
                            include_classical_kinetic=False)
    ups0 = band_limited_random(g, kmax=1, seed=5)
    got = hybrid.propagate_dense(g, ham, ups0, 0.8)
    _, _, X = g.meshes()
    want = np.exp(-1j * 0.9 * np.cos(X) * 0.8 / 0.5) * ups0
    assert g.norm(got - want) < 1e-10


def test_dense_propagator_is_unitary():
    g = Grid(8, 8, 4)
    u = hybrid.dense_propagator(g, bilinear_ham(), 0.3)
    assert np.linalg.norm(u.conj().T @ u - np.eye(g.size)) < 1e-10


def test_norm_and_energy_conserved():
    g = Grid(16, 16, 8)
    ham = bilinear_ham(lam=0.5, hbar=0.4)
    ups0 = product_state(g, phase_space_gaussian(g, q0=0.3, sigma_q=0.45,
                                                 sigma_p=0.45),
                         quantum_gaussian_x(g, sigma=0.5))
    res = hybrid.evolve(g, ham, ups0, T=0.5, dt=1e-3, record_every=100)
    norms = [r.norm for r in res.records]
    energies = [r.energy for r in res.records]
    assert abs(norms[-1] - norms[0]) < 1e-8 * 0.5
    assert abs(energies[-1] - energies[0]) < 1e-7
    # the quadratic form itself is real
    raw = g.inner(ups0, hybrid.hybrid_apply(g, ham, ups0))
    assert abs(raw.imag) < 1e-10


def test_quantum_ground_state_energy():
    # quantum-only spec on a 128-point x grid: coherent-state energy and
    # the ground eigenvalue of an independently built 1D spectral
    # Hamiltonian both sit at hbar*omega/2 within 1%
    g = Grid(4, 4, 128)
    hbar = 0.3
    ham = HybridHamiltonian(hbar=hbar, m=1.0,
                            potential=SeparablePotential(x_harmonic=1.0),
                            include_classical_kinetic=False)
    phi = coherent_state_x(g, hbar, m=1.0, omega=1.0)
    ups = g.normalize(np.broadcast_to(phi[None, None, :], g.shape).astype(complex))
    e = hybrid.energy(g, ham, ups)
    assert abs(e - hbar / 2.0) < 0.01 * hbar / 2.0
    # 1D oracle straight from the FFT, nothing shared with the package
    n = g.n_x
    fwd = np.fft.fft(np.eye(n), axis=0, norm="ortho")
    k = np.fft.fftfreq(n, d=1.0 / n)
    kin = fwd.conj().T @ np.diag(hbar**2 * k**2 / 2.0) @ fwd
    h1 = kin + np.diag(0.5 * g.x**2)
    e0 = np.linalg.eigvalsh(h1)[0].real
    assert abs(e0 - hbar / 2.0) < 0.01 * hbar / 2.0
    assert abs(e - e0) < 1e-6


def test_injectivity_probe():
    g = Grid(8, 8, 4)
    ups = band_limited_random(g, kmax=1, seed=7)
    base = HybridHamiltonian(hbar=0.3, m=1.0, M=1.2,
                             potential=BilinearPotential(lam=0.5))
    variants = [
        HybridHamiltonian(hbar=0.3, m=1.0, M=1.2,
                          potential=BilinearPotential(lam=0.5 + 1e-3)),
        HybridHamiltonian(hbar=0.3, m=1.0, M=1.2 + 1e-3,
                          potential=BilinearPotential(lam=0.5)),
        HybridHamiltonian(hbar=0.3, m=1.0 + 1e-3, M=1.2,
                          potential=BilinearPotential(lam=0.5)),
    ]
    l0 = hybrid.hybrid_apply(g, base, ups)
    for ham in variants:
        assert g.norm(hybrid.hybrid_apply(g, ham, ups) - l0) > 1e-6


def test_dense_size_guard():
    g = Grid(32, 32, 8)
    with pytest.raises(SizeGuardError):
        hybrid.assemble_dense(g, bilinear_ham())


def test_nan_state_aborts():
    g = Grid(8, 8, 2)
    ups0 = np.full(g.shape, np.nan, dtype=complex)
    with pytest.raises(NumericalInstability):
        hybrid.evolve(g, bilinear_ham(), ups0, T=0.1, dt=0.01)


def test_evolve_rejects_fractional_step_count():
    g = Grid(8, 8, 2)
    ups0 = g.normalize(np.ones(g.shape, dtype=complex))
    with pytest.raises(ValueError):
        hybrid.evolve(g, bilinear_ham(), ups0, T=0.35, dt=0.1)


def test_snapshot_cadence():
    g = Grid(8, 8, 2)
    ham = bilinear_ham(hbar=0.5)
    ups0 = g.normalize(phase_space_gaussian(g, sigma_q=0.9, sigma_p=0.9))
    res = hybrid.evolve(g, ham, ups0, T=0.1, dt=0.01,
                        snapshot_every=5, record_every=5, keep_snapshots=True)
    assert [round(t, 10) for t, _ in res.snapshots] == [0.0, 0.05, 0.1]
    assert len(res.records) == 3
