"""Hybrid density, marginals, operator kernel, currents, continuity."""

import numpy as np
import pytest

from hykoop import classical, density, hybrid
from hykoop.errors import SizeGuardError
from hykoop.grids import Grid
from hykoop.hamiltonians import (BilinearPotential, ClassicalHamiltonian,
                                 HybridHamiltonian, SeparablePotential)
from hykoop.states import (phase_space_gaussian, product_state,
                           quantum_gaussian_x)


def resolved_product(g, hbar=0.4, q0=0.3, kq=1.0, x_phase=1.0):
    z = phase_space_gaussian(g, q0=q0, sigma_q=0.45, sigma_p=0.45, kq=kq)
    phi = quantum_gaussian_x(g, sigma=0.5, k0=x_phase)
    return product_state(g, z, phi)


def test_uniform_field_density_is_twice_c_squared():
    g = Grid(8, 8, 4)
    ups = np.full(g.shape, 0.3, dtype=complex)
    dens = density.hybrid_density(g, ups, hbar=0.5)
    assert np.max(np.abs(dens - 2.0 * 0.3**2)) < 1e-13


def test_factorized_density_is_product():
    g = Grid(16, 32, 8)
    gc = Grid(16, 32, 1)
    z = phase_space_gaussian(g, q0=0.2, sigma_q=0.45, sigma_p=0.4, kq=1.0)
    phi = quantum_gaussian_x(g, sigma=0.6)
    ups = z[:, :, :1] * phi[None, None, :]
    dens = density.hybrid_density(g, ups, hbar=0.3)
    rho_z = classical.classical_density(gc, z[:, :, :1], hbar=0.3)
    want = rho_z * (np.abs(phi)**2)[None, None, :]
    assert g.norm(dens - want) < 1e-12


def test_mass_equals_norm():
    g = Grid(16, 48, 8)
    ups = resolved_product(g)
    dens = density.hybrid_density(g, ups, hbar=0.4)
    mass = dens.sum() * g.weight
    assert abs(mass - 1.0) < 1e-8


def test_quantum_marginal_nonnegative_and_consistent():
    g = Grid(16, 48, 8)
    ups = resolved_product(g)
    rho_c, rho_q = density.marginals(g, ups, hbar=0.4)
    assert rho_q.min() >= -1e-10
    # integrating the full density over z gives the same marginal for
    # p-localized fields (the divergence terms sum out spectrally)
    dens = density.hybrid_density(g, ups, hbar=0.4)
    via_d = dens.sum(axis=(0, 1)) * g.dq * g.dp
    assert np.max(np.abs(via_d - rho_q)) < 1e-8
    assert abs(rho_q.sum() * g.dx - 1.0) < 1e-10


def test_marginals_of_factorized_state():
    g = Grid(16, 32, 8)
    gc = Grid(16, 32, 1)
    ups = resolved_product(g, q0=0.2)
    rho_c, rho_q = density.marginals(g, ups, hbar=0.4)
    # recover the factors: z-part density and |phi|^2
    psi_z = ups[:, :, g.n_x // 2]
    psi_z = psi_z / gc.norm(psi_z[:, :, None])
    want_c = classical.classical_density(gc, psi_z[:, :, None], hbar=0.4)
    assert gc.norm(rho_c[:, :, None] - want_c) < 1e-10
    phi_sq = np.abs(ups[g.n_q // 2, g.n_p // 2, :])**2
    phi_sq = phi_sq / (phi_sq.sum() * g.dx)
    assert np.max(np.abs(rho_q - phi_sq)) < 1e-10


def entangled_state(g):
    # two-term Schmidt state: entangled but still p-resolved, so the
    # divergence terms of the kernel sum out spectrally
    z1 = phase_space_gaussian(g, q0=0.3, sigma_q=0.6, sigma_p=0.42, kq=1.0)
    z2 = phase_space_gaussian(g, q0=-0.4, p0=0.2, sigma_q=0.7, sigma_p=0.42)
    f1 = quantum_gaussian_x(g, sigma=0.5, k0=1.0)
    f2 = quantum_gaussian_x(g, x0=0.8, sigma=0.6)
    ups = (0.8 * z1[:, :, :1] * f1[None, None, :]
           + 0.6 * z2[:, :, :1] * f2[None, None, :])
    return g.normalize(ups)


def test_quantum_density_matrix_psd():
    g = Grid(8, 64, 4)
    rho = density.quantum_density_matrix(g, entangled_state(g))
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert abs(np.trace(rho).real * g.dx - 1.0) < 1e-10
    assert np.linalg.eigvalsh(rho)[0] >= -1e-10


def test_kernel_identities():
    g = Grid(8, 64, 4)
    ups = entangled_state(g)
    ker = density.density_operator_kernel(g, ups, hbar=0.3)
    # Hermitian in the two x slots
    assert np.max(np.abs(ker - ker.conj().transpose(0, 1, 3, 2))) < 1e-12
    # x-diagonal is the hybrid density
    diag = np.einsum("qpxx->qpx", ker).real
    dens = density.hybrid_density(g, ups, hbar=0.3)
    assert g.norm(diag - dens) < 1e-12
    # x-trace is the classical marginal
    rho_c = density.kernel_classical_marginal(g, ker)
    assert np.max(np.abs(rho_c - density.classical_marginal(g, dens))) < 1e-12
    # z-integral is the quantum density matrix
    qdm = density.kernel_quantum_matrix(g, ker)
    assert np.max(np.abs(qdm - density.quantum_density_matrix(g, ups))) < 1e-8
    assert abs(np.trace(qdm).real * g.dx - 1.0) < 1e-8


def test_kernel_size_guard():
    g = Grid(32, 32, 8)
    ups = np.ones(g.shape, dtype=complex)
    with pytest.raises(SizeGuardError):
        density.density_operator_kernel(g, ups, hbar=0.3)


def test_expectation_routes_agree():
    g = Grid(8, 64, 4)
    obs = HybridHamiltonian(hbar=0.3, m=1.0, M=1.2,
                            potential=BilinearPotential(lam=0.4))
    z = phase_space_gaussian(g, q0=0.2, sigma_q=0.9, sigma_p=0.42, kq=1.0)
    ups = product_state(g, z, quantum_gaussian_x(g, sigma=0.5, k0=1.0))
    a = density.hybrid_expectation(g, obs, ups, via="generator")
    b = density.hybrid_expectation(g, obs, ups, via="kernel")
    assert abs(a - b) < 1e-9
    with pytest.raises(ValueError):
        density.hybrid_expectation(g, obs, ups, via="nope")


def test_expectation_purely_quantum_reduces():
    g = Grid(16, 48, 32)
    obs = HybridHamiltonian(hbar=0.3, m=1.0,
                            potential=SeparablePotential(x_cos=0.7),
                            include_classical_kinetic=False)
    phi = quantum_gaussian_x(g, sigma=0.5, k0=1.0)
    ups = resolved_product(g, hbar=0.3)
    ups = product_state(g, ups[:, :, 0], phi)
    got = density.hybrid_expectation(g, obs, ups, via="generator")
    # 1D quantum expectation by hand
    k = np.fft.fftfreq(g.n_x, d=1.0 / g.n_x)
    phi_hat = np.fft.fft(phi)
    kin = (0.3**2 / 2.0) * np.sum(k**2 * np.abs(phi_hat)**2) / np.sum(np.abs(phi_hat)**2)
    pot = np.sum(0.7 * np.cos(g.x) * np.abs(phi)**2) * g.dx
    assert abs(got - (kin + pot)) < 1e-10


def test_classical_current_is_density_times_flow():
    g = Grid(16, 16, 8)
    ham = HybridHamiltonian(hbar=0.4, M=1.5,
                            potential=BilinearPotential(lam=0.6))
    ups = resolved_product(g)
    j_q, j_p, _ = density.currents(g, ham, ups)
    dens = density.hybrid_density(g, ups, hbar=0.4)
    Q, P, X = g.meshes()
    assert g.norm(j_q - dens * P / 1.5) < 1e-12
    assert g.norm(j_p - dens * (-0.6 * np.cos(Q) * np.sin(X))) < 1e-12


def test_zero_phase_factorized_state_has_no_quantum_flux():
    g = Grid(16, 16, 16)
    ham = HybridHamiltonian(hbar=0.4, potential=SeparablePotential(x_cos=0.5))
    z = phase_space_gaussian(g, sigma_q=0.5, sigma_p=0.5)      # real
    phi = np.abs(quantum_gaussian_x(g, sigma=0.5))             # real
    ups = product_state(g, z, phi.astype(complex))
    _, _, j_x = density.currents(g, ham, ups)
    assert g.norm(j_x) < 1e-10


def test_continuity_zero_hamiltonian():
    g = Grid(8, 8, 4)
    ham = HybridHamiltonian(hbar=0.3, include_quantum_kinetic=False,
                            include_classical_kinetic=False)
    ups = resolved_product(g, hbar=0.3)
    res = density.continuity_residual(g, ham, [ups, ups, ups], dt=0.01)
    assert np.max(res) < 1e-12


def test_continuity_stationary_density():
    # V(x)-only potential with every derivative term off: the state turns
    # genuine x-dependent phases but its density never moves
    g = Grid(8, 8, 16)
    ham = HybridHamiltonian(hbar=0.5,
                            potential=SeparablePotential(x_cos=0.8),
                            include_quantum_kinetic=False,
                            include_classical_kinetic=False)
    ups0 = resolved_product(g, hbar=0.5)
    dt = 0.05
    snaps = [hybrid.propagate_dense(g, ham, ups0, k * dt) for k in range(3)]
    assert g.norm(snaps[1] - snaps[0]) > 1e-2      # the state itself moves
    res = density.continuity_residual(g, ham, snaps, dt=dt)
    assert np.max(res) < 1e-12


def test_continuity_generic_coupled_run():
    g = Grid(16, 16, 16)
    ham = HybridHamiltonian(hbar=0.5, m=1.0, M=1.2,
                            potential=BilinearPotential(lam=0.5))
    ups0 = resolved_product(g, hbar=0.5)
    res = hybrid.evolve(g, ham, ups0, T=0.02, dt=2e-3,
                        snapshot_every=2, record_every=2, keep_snapshots=True)
    snaps = [s for _, s in res.snapshots]
    resid = density.continuity_residual(g, ham, snaps, dt=4e-3)
    assert np.max(resid) < 1e-4


def test_continuity_input_validation():
    g = Grid(8, 8, 4)
    ham = HybridHamiltonian(hbar=0.3)
    ups = resolved_product(g, hbar=0.3)
    with pytest.raises(ValueError):
        density.continuity_residual(g, ham, [ups, ups], dt=0.01)
    with pytest.raises(ValueError):
        density.continuity_residual(g, ham, [ups, ups, ups], dt=0.0)


def test_bracket_transport_with_quantum_kinetic_off():
    # without the x kinetic term the density rides the interaction flow
    g = Grid(32, 32, 8)
    ham = HybridHamiltonian(hbar=0.4, M=1.2,
                            potential=SeparablePotential(q_cos=0.4),
                            include_quantum_kinetic=False)
    ups = resolved_product(g)
    assert density.bracket_transport_residual(g, ham, ups) < 1e-6


def test_bracket_transport_sees_quantum_motion():
    g = Grid(16, 16, 16)
    ham = HybridHamiltonian(hbar=0.4, M=1.2,
                            potential=SeparablePotential(q_cos=0.4))
    ups = resolved_product(g)
    assert density.bracket_transport_residual(g, ham, ups) > 1e-3


def test_decoupled_evolution_preserves_min_density():
    g = Grid(16, 16, 16)
    ham = HybridHamiltonian(hbar=0.4, m=1.0, M=1.0,
                            potential=SeparablePotential(q_cos=0.5, x_cos=0.6))
    ups0 = resolved_product(g)
    d0 = density.hybrid_density(g, ups0, hbar=0.4).min()
    res = hybrid.evolve(g, ham, ups0, T=0.5, dt=2e-3, record_every=50)
    d1 = density.hybrid_density(g, res.state, hbar=0.4).min()
    assert d1 >= d0 - 1e-6


def test_decoupled_classical_marginal_advects():
    g = Grid(32, 32, 8)
    gc = Grid(32, 32, 1)
    ham = HybridHamiltonian(hbar=0.4, m=1.0, M=1.2,
                            potential=SeparablePotential(q_cos=0.5, x_cos=0.4))
    ups0 = resolved_product(g)
    rho0 = density.classical_marginal(
        g, density.hybrid_density(g, ups0, hbar=0.4))
    res = hybrid.evolve(g, ham, ups0, T=0.5, dt=1e-3, record_every=100)
    rho1 = density.classical_marginal(
        g, density.hybrid_density(g, res.state, hbar=0.4))
    cham = ClassicalHamiltonian(mass=1.2, cos_coeff=0.5)
    oracle = classical.liouville_advect(gc, cham, rho0[:, :, None], 1e-3, 500)
    assert gc.norm(rho1[:, :, None] - oracle) < 1e-6


def test_negativity_mass():
    g = Grid(4, 4, 1)
    rho = np.ones((4, 4))
    rho[1, 2] = -0.3
    rho[3, 0] = -0.2
    want = 0.5 * g.dq * g.dp
    assert abs(density.negativity_mass(g, rho) - want) < 1e-14
    assert density.negativity_mass(g, np.ones((4, 4))) == 0.0
