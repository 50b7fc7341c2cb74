"""Hybrid wavefunction dynamics: generator, integrator, dense oracle.

The generator acting on Upsilon(q, p, x) is

    L Y = i hbar {H_I, Y} - (L_I + hbar^2/2m Lap_x) Y,

where H_I = p^2/2M + V(q, x), L_I = p^2/2M - V(q, x), and the wave
equation is i hbar dY/dt = L Y.  Both kinetic terms can be toggled off
(the classical one via the Hamiltonian spec, which removes the p^2/2M
term from H_I and L_I alike).

The generator is Hermitian on the grid because each multiplier is
constant along the axis of the paired spectral derivative, so time
stepping (classic RK4) is the only source of norm/energy drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalInstability, SizeGuardError
from .grids import Grid
from .hamiltonians import HybridHamiltonian, SampledHamiltonian
from . import density as _density

DENSE_SIZE_LIMIT = 4096

# evolve aborts when the squared norm drifts by more than this much
NORM_DRIFT_LIMIT = 1e-4


def hybrid_apply(grid: Grid, ham: HybridHamiltonian, ups,
                 sampled: SampledHamiltonian | None = None):
    """Apply the hybrid generator L to a field."""
    grid.check_field(ups)
    s = sampled if sampled is not None else ham.sampled(grid)
    out = 1j * ham.hbar * (s.dq_h * grid.d_p(ups) - s.dp_h * grid.d_q(ups))
    out -= s.l_i * ups
    if ham.include_quantum_kinetic:
        out -= (ham.hbar**2 / (2.0 * ham.m)) * grid.lap_x(ups)
    return out


def time_derivative(grid: Grid, ham: HybridHamiltonian, ups,
                    sampled: SampledHamiltonian | None = None):
    """dY/dt = -(i/hbar) L Y."""
    return (-1j / ham.hbar) * hybrid_apply(grid, ham, ups, sampled)


def energy(grid: Grid, ham: HybridHamiltonian, ups,
           sampled: SampledHamiltonian | None = None) -> float:
    """h(Y) = <Y, L Y>; real up to quadrature round-off."""
    return grid.inner(ups, hybrid_apply(grid, ham, ups, sampled)).real


def stability_bound(grid: Grid, ham: HybridHamiltonian) -> float:
    """Largest safe RK4 step: 0.5 min(dz/max|X_H_I|, m dx^2/(hbar pi^2))."""
    s = ham.sampled(grid)
    vmax = max(np.max(np.abs(s.dp_h)), np.max(np.abs(s.dq_h)))
    dz = min(grid.dq, grid.dp)
    bound = np.inf if vmax == 0.0 else dz / vmax
    if ham.include_quantum_kinetic and grid.n_x > 1:
        bound = min(bound, ham.m * grid.dx**2 / (ham.hbar * np.pi**2))
    return 0.5 * bound


def rk4_step(rhs, y, dt):
    """One classic Runge-Kutta step; aborts on non-finite output."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalInstability("non-finite values after RK4 step")
    return out


@dataclass
class DiagnosticsRecord:
    """Per-snapshot scalars recorded during evolve."""

    t: float
    norm: float
    energy: float
    min_density: float
    negativity_mass: float
    boundary_mass: float
    continuity_residual: float | None = None
    loop_lhs: float | None = None
    loop_rhs: float | None = None

    CSV_FIELDS = ("t", "norm", "energy", "min_density", "negativity_mass",
                  "boundary_mass", "continuity_residual", "loop_lhs",
                  "loop_rhs")


def diagnostics(grid: Grid, ham: HybridHamiltonian, ups, t,
                sampled: SampledHamiltonian | None = None) -> DiagnosticsRecord:
    dens = _density.hybrid_density(grid, ups, ham.hbar)
    rho_c = _density.classical_marginal(grid, dens)
    neg = np.sum(np.maximum(-rho_c, 0.0)) * grid.dq * grid.dp
    return DiagnosticsRecord(
        t=t,
        norm=float(np.sqrt(grid.inner(ups, ups).real)),
        energy=energy(grid, ham, ups, sampled),
        min_density=float(dens.min()),
        negativity_mass=float(neg),
        boundary_mass=grid.p_boundary_mass(ups),
    )


@dataclass
class EvolveResult:
    state: np.ndarray
    times: list = field(default_factory=list)
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)


def evolve(grid: Grid, ham: HybridHamiltonian, ups0, T, dt,
           snapshot_every=0, record_every=1, keep_snapshots=False,
           observers=(), check_norm=True) -> EvolveResult:
    """Integrate i hbar dY/dt = L Y from 0 to T with fixed-step RK4.

    Records DiagnosticsRecord every `record_every` steps (and at both
    endpoints).  With snapshot_every > 0 (and keep_snapshots) copies of
    the field every that many steps are retained.  Observers are
    callables (step, t, Y) run at recording times; they must not mutate
    the state.  Norm drift beyond NORM_DRIFT_LIMIT aborts.
    """
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T must be an integer number of steps")
    s = ham.sampled(grid)

    def rhs(y):
        return (-1j / ham.hbar) * hybrid_apply(grid, ham, y, sampled=s)

    ups = np.array(ups0, dtype=complex, copy=True)
    norm0_sq = grid.inner(ups, ups).real
    result = EvolveResult(state=ups)

    def record(step, t):
        result.times.append(t)
        result.records.append(diagnostics(grid, ham, ups, t, sampled=s))
        for obs in observers:
            obs(step, t, ups)
        if keep_snapshots and (snapshot_every and step % snapshot_every == 0):
            result.snapshots.append((t, ups.copy()))

    record(0, 0.0)
    for step in range(1, n_steps + 1):
        ups = rk4_step(rhs, ups, dt)
        if check_norm:
            drift = abs(grid.inner(ups, ups).real - norm0_sq)
            # `not (<=)` rather than `>` so a NaN norm also aborts
            if not (drift <= NORM_DRIFT_LIMIT * max(1.0, norm0_sq)):
                raise NumericalInstability(
                    f"norm drift {drift:.3e} at step {step} exceeds "
                    f"{NORM_DRIFT_LIMIT:.0e}")
        if step % record_every == 0 or step == n_steps:
            record(step, step * dt)
        elif keep_snapshots and snapshot_every and step % snapshot_every == 0:
            result.snapshots.append((step * dt, ups.copy()))
    result.state = ups
    return result


# ---------------------------------------------------------------------------
# dense oracle
# ---------------------------------------------------------------------------


def _check_dense_size(grid: Grid):
    if grid.size > DENSE_SIZE_LIMIT:
        raise SizeGuardError(
            f"dense path limited to {DENSE_SIZE_LIMIT} points, "
            f"grid has {grid.size}")


def assemble_dense(grid: Grid, ham: HybridHamiltonian) -> np.ndarray:
    """Dense matrix of the generator, assembled column by column.

    Columns are the generator applied to grid basis fields, so the
    matrix matches hybrid_apply by construction; no spectral shortcut
    is reused beyond the operator application itself.
    """
    _check_dense_size(grid)
    n = grid.size
    s = ham.sampled(grid)
    mat = np.empty((n, n), dtype=complex)
    basis = np.zeros(grid.shape, dtype=complex)
    for j in range(n):
        basis.flat[j] = 1.0
        mat[:, j] = hybrid_apply(grid, ham, basis, sampled=s).ravel()
        basis.flat[j] = 0.0
    return mat


def dense_propagator(grid: Grid, ham: HybridHamiltonian, t) -> np.ndarray:
    """exp(-(i/hbar) t L) by scaling-and-squaring on the dense matrix."""
    mat = assemble_dense(grid, ham)
    return scipy.linalg.expm((-1j * t / ham.hbar) * mat)


def propagate_dense(grid: Grid, ham: HybridHamiltonian, ups0, t) -> np.ndarray:
    """Ground-truth state at time t for small grids."""
    u = dense_propagator(grid, ham, t)
    return (u @ np.asarray(ups0, dtype=complex).ravel()).reshape(grid.shape)


def schmidt_singular_values(grid: Grid, ups) -> np.ndarray:
    """Singular values of the (z | x) unfolding, descending."""
    mat = np.asarray(ups).reshape(grid.n_q * grid.n_p, grid.n_x)
    return np.linalg.svd(mat, compute_uv=False)
