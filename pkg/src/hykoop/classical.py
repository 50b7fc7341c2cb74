"""Classical wavefunction dynamics on phase space.

The covariant generator acting on Psi(q, p) is

    L_H Psi = i hbar {H, Psi} + (H - p dH/dp) Psi,

with {f, g} = d_q f d_p g - d_p f d_q g, and the wave equation is
i hbar dPsi/dt = L_H Psi.  Dropping the multiplier (H - p dH/dp)
gives the plain Koopman generator, under which |Psi|^2 is the
advected density.  With the multiplier kept, the advected density
is instead

    rho(Psi) = |Psi|^2 + d_p(p |Psi|^2) + i hbar {Psi, conj(Psi)},

which solves d rho/dt = {H, rho} but may take negative values.

Derivatives of the Hamiltonian are analytic (supplied by the preset),
so every term is a multiplier that is constant along the axis of the
spectral derivative it multiplies; the generator is then exactly
Hermitian on the grid.
"""

from __future__ import annotations

import numpy as np

from .grids import Grid
from .hamiltonians import ClassicalHamiltonian


def _sampled(grid: Grid, ham: ClassicalHamiltonian):
    Q, P, _ = grid.meshes()
    shape = grid.shape
    return (np.broadcast_to(ham.dq(Q, P), shape),
            np.broadcast_to(ham.dp(Q, P), shape),
            np.broadcast_to(ham.phase_multiplier(Q, P), shape))


def kvh_apply(grid: Grid, ham: ClassicalHamiltonian, psi, hbar):
    """Covariant generator L_H Psi (phase term included)."""
    hq, hp, mult = _sampled(grid, ham)
    bracket = hq * grid.d_p(psi) - hp * grid.d_q(psi)
    return 1j * hbar * bracket + mult * psi


def kvn_apply(grid: Grid, ham: ClassicalHamiltonian, psi, hbar):
    """Plain Koopman generator: advection only, no phase term."""
    hq, hp, _ = _sampled(grid, ham)
    return 1j * hbar * (hq * grid.d_p(psi) - hp * grid.d_q(psi))


def classical_density(grid: Grid, psi, hbar):
    """Momentum-map density rho(Psi); real, possibly signed.

    The divergence-type term d_p(p |Psi|^2) is expanded by the product rule
    and only the smooth factor is differentiated spectrally: p itself is a
    coordinate (a sawtooth on the periodic grid), and differentiating p
    directly would ring.  This way a constant field maps to the constant
    density 2|c|^2 exactly, which the positive-density families rely on.
    """
    d = (psi.conj() * psi).real
    P = grid.meshes()[1]
    div = d + P * grid.d_p(d)
    bracket = (1j * hbar * grid.poisson(psi, psi.conj())).real
    return d + div + bracket


def classical_expectation(grid: Grid, ham_or_values, psi, hbar):
    """<A> = integral of A rho over phase space.

    `ham_or_values` is a ClassicalHamiltonian (whose value(q, p) is
    used) or a plain sampled array.
    """
    if isinstance(ham_or_values, ClassicalHamiltonian):
        Q, P, _ = grid.meshes()
        vals = np.broadcast_to(ham_or_values.value(Q, P), grid.shape)
    else:
        vals = np.asarray(ham_or_values)
    return grid.integrate(vals * classical_density(grid, psi, hbar))


def operator_expectation(grid: Grid, ham: ClassicalHamiltonian, psi, hbar):
    """<A> computed the operator way: <Psi, L_A Psi>."""
    return grid.inner(psi, kvh_apply(grid, ham, psi, hbar)).real


def rk4_step(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(grid: Grid, ham: ClassicalHamiltonian, psi0, dt, n_steps, hbar,
           koopman_only=False, callback=None):
    """Integrate i hbar dPsi/dt = L_H Psi with classic RK4.

    `callback(step, t, psi)` runs after every accepted step (and once
    at step 0).  Returns the final field.
    """
    hq, hp, mult = _sampled(grid, ham)
    if koopman_only:
        mult = np.zeros_like(mult)

    def rhs(psi):
        adv = hq * grid.d_p(psi) - hp * grid.d_q(psi)
        return adv - (1j / hbar) * mult * psi

    psi = np.array(psi0, dtype=complex, copy=True)
    if callback is not None:
        callback(0, 0.0, psi)
    for step in range(1, n_steps + 1):
        psi = rk4_step(rhs, psi, dt)
        if callback is not None:
            callback(step, step * dt, psi)
    return psi


def liouville_advect(grid: Grid, ham: ClassicalHamiltonian, rho0, dt, n_steps,
                     callback=None):
    """Independent oracle: advect a real density by d rho/dt = {H, rho}.

    Deliberately shares no code path with the wavefunction integrator
    beyond the spectral derivative itself: real arithmetic, no phase,
    no hbar.
    """
    Q, P, _ = grid.meshes()
    hq = np.broadcast_to(ham.dq(Q, P), grid.shape)
    hp = np.broadcast_to(ham.dp(Q, P), grid.shape)

    def rhs(rho):
        return hq * grid.d_p(rho) - hp * grid.d_q(rho)

    rho = np.array(rho0, dtype=float, copy=True)
    if callback is not None:
        callback(0, 0.0, rho)
    for step in range(1, n_steps + 1):
        rho = rk4_step(rhs, rho, dt)
        if callback is not None:
            callback(step, step * dt, rho)
    return rho


def phase_lagrangian(grid: Grid, ham: ClassicalHamiltonian):
    """p dH/dp - H, the rate of phase accumulation along the flow."""
    Q, P, _ = grid.meshes()
    return np.broadcast_to(-ham.phase_multiplier(Q, P), grid.shape)
