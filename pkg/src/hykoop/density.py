"""Phase-space probability density of a hybrid wavefunction, its marginals,
the operator-valued kernel, and the classical/quantum probability currents.

The central object is the real field

    D(q, p, x) = |Y|^2 + d_p(p |Y|^2) + i*hbar*{Y, conj(Y)}

built from a hybrid field Y(q, p, x).  It integrates to ||Y||^2 for fields
that decay inside the p window, its (q, p)-marginal is the classical
density, and the x-diagonal of the sesquilinear kernel version reproduces
it pointwise.

Two discretization conventions are fixed here once and for all:

* the divergence-type term enters with a plus sign; that is the choice
  under which the classical marginal of an uncoupled evolution satisfies
  the Liouville equation, and `sectors` relies on the same convention;
* d_p(p f) is expanded by the product rule, f + p d_p f, and only the
  smooth factor f is differentiated spectrally.  p is a coordinate, i.e. a
  sawtooth on the periodic grid, and differentiating the product p f
  spectrally would ring at the p boundary.  The pointwise form maps
  constant fields to exact constants (a uniform |Y| = c gives D = 2c^2 to
  machine precision), which the positive-density families need; the price
  is that sum-to-zero identities along p (total mass, expectation duality)
  hold spectrally for p-localized fields rather than to machine precision
  for arbitrary ones.  No single discretization can do both: an operator
  T with T(const) = const cannot also satisfy sum(T(f)) = 0 for every f.
"""

from __future__ import annotations

import numpy as np

from .errors import SizeGuardError
from .grids import Grid
from .hamiltonians import HybridHamiltonian, SampledHamiltonian

# largest total grid size for which we materialize the (n_x x n_x)-valued
# kernel or dense matrices built from it
KERNEL_SIZE_LIMIT = 4096

# relative amplitude floor below which phase-gradient ratios are masked to 0
MASK_FLOOR = 1e-6


def _p_broadcast(grid: Grid) -> np.ndarray:
    return grid.p[None, :, None]


def density_bilinear(grid: Grid, f: np.ndarray, g: np.ndarray,
                     hbar: float) -> np.ndarray:
    """Sesquilinear form B(f, g) = g*f + d_p(p g* f) + i hbar {f, g*}.

    `hybrid_density` is the real diagonal B(Y, Y); keeping the two slots
    separate lets time derivatives of the density be assembled by the
    product rule without re-deriving anything.
    """
    prod = np.conj(g) * f
    return (2.0 * prod + _p_broadcast(grid) * grid.d_p(prod)
            + 1j * hbar * grid.poisson(f, np.conj(g)))


def hybrid_density(grid: Grid, ups: np.ndarray, hbar: float) -> np.ndarray:
    """Real phase-space density D(q, p, x) of a hybrid field."""
    ups = grid.check_field(ups)
    return density_bilinear(grid, ups, ups, hbar).real


def density_rate(grid: Grid, ups: np.ndarray, dups_dt: np.ndarray,
                 hbar: float) -> np.ndarray:
    """dD/dt given the field and its time derivative (product rule)."""
    return (density_bilinear(grid, dups_dt, ups, hbar)
            + density_bilinear(grid, ups, dups_dt, hbar)).real


def classical_marginal(grid: Grid, dens: np.ndarray) -> np.ndarray:
    """Integrate the x axis out of a density field -> rho_c(q, p)."""
    return dens.sum(axis=2) * grid.dx


def quantum_marginal(grid: Grid, ups: np.ndarray) -> np.ndarray:
    """rho_q(x) = integral of |Y|^2 over phase space.

    Note the *amplitude-squared* marginal, not the x-integral of D: the
    divergence and bracket contributions integrate to zero over a periodic
    phase space, so both definitions agree after integration, but only
    this one is pointwise nonnegative by construction.
    """
    amp2 = np.abs(grid.check_field(ups)) ** 2
    return amp2.sum(axis=(0, 1)) * grid.dq * grid.dp


def marginals(grid: Grid, ups: np.ndarray, hbar: float):
    """(rho_c, rho_q) pair for a hybrid field."""
    dens = hybrid_density(grid, ups, hbar)
    return classical_marginal(grid, dens), quantum_marginal(grid, ups)


def quantum_density_matrix(grid: Grid, ups: np.ndarray) -> np.ndarray:
    """rho_hat[x, x'] = integral over z of Y(z, x) conj(Y(z, x')).

    Positive semidefinite by construction (it is a sum of projectors with
    positive weights), trace ||Y||^2.
    """
    ups = grid.check_field(ups)
    return np.einsum("qpx,qpy->xy", ups, np.conj(ups)) * grid.dq * grid.dp


def _d_p_pairs(grid: Grid, f4: np.ndarray) -> np.ndarray:
    """Spectral d/dp along axis 1 of an (n_q, n_p, n_x, n_x) array."""
    k = grid._k_odd[1]
    mult = (1j * k)[None, :, None, None]
    return np.fft.ifft(mult * np.fft.fft(f4, axis=1), axis=1)


def density_operator_kernel(grid: Grid, ups: np.ndarray,
                            hbar: float) -> np.ndarray:
    """Operator-valued density kernel K(q, p; x, x'), shape (n_q, n_p, n_x, n_x).

    K = Y Y'* + d_p(p Y Y'*) + i hbar {Y, Y'*} where primes mark the second
    x slot.  Its x-diagonal is `hybrid_density`, its x-trace integrates the
    quantum side out (classical marginal), and its z-integral is the
    quantum density matrix.  Dense in x, so guarded to small grids.
    """
    ups = grid.check_field(ups)
    if grid.size > KERNEL_SIZE_LIMIT:
        raise SizeGuardError(
            f"kernel needs {grid.size} > {KERNEL_SIZE_LIMIT} grid points; "
            "use the field-level diagnostics instead")
    cu = np.conj(ups)
    outer = ups[..., :, None] * cu[..., None, :]
    du_q = grid.d_q(ups)
    du_p = grid.d_p(ups)
    bracket = (du_q[..., :, None] * np.conj(du_p)[..., None, :]
               - du_p[..., :, None] * np.conj(du_q)[..., None, :])
    p4 = grid.p[None, :, None, None]
    return 2.0 * outer + p4 * _d_p_pairs(grid, outer) + 1j * hbar * bracket


def kernel_classical_marginal(grid: Grid, kernel: np.ndarray) -> np.ndarray:
    """x-trace of the kernel times dx -> rho_c(q, p), real."""
    return np.einsum("qpxx->qp", kernel).real * grid.dx


def kernel_quantum_matrix(grid: Grid, kernel: np.ndarray) -> np.ndarray:
    """z-integral of the kernel -> the quantum density matrix."""
    return kernel.sum(axis=(0, 1)) * grid.dq * grid.dp


def masked_ratio(num: np.ndarray, den: np.ndarray,
                 floor: float = MASK_FLOOR) -> np.ndarray:
    """num/den where den exceeds floor * max(den), zero elsewhere."""
    cut = floor * float(np.max(den))
    ok = den > cut
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=ok)
    return out


def currents(grid: Grid, ham: HybridHamiltonian, ups: np.ndarray,
             sampled: SampledHamiltonian | None = None):
    """Probability currents (J_q, J_p, J_x) of the density D.

    The classical pair is the density times the Hamiltonian vector field of
    H_I = p^2/2M + V.  The quantum current J_x collects the amplitude flux
    sigma_x = hbar Im(Y* d_x Y) processed by the same plus-divergence and
    bracket structure as D itself, and an hbar^2 amplitude-gradient term;
    everything is computed gauge-free (no phase unwrapping) so nodes of |Y|
    only suppress, never corrupt, the result.
    """
    ups = grid.check_field(ups)
    if sampled is None:
        sampled = ham.sampled(grid)
    dens = hybrid_density(grid, ups, ham.hbar)
    j_q = dens * sampled.dp_h          # dq/dt = dH/dp = p/M
    j_p = -dens * sampled.dq_h         # dp/dt = -dH/dq = -dV/dq

    if grid.n_x == 1 or not ham.include_quantum_kinetic:
        return j_q, j_p, np.zeros_like(dens)

    hbar = ham.hbar
    amp2 = np.abs(ups) ** 2
    sigma_x = hbar * np.imag(np.conj(ups) * grid.d_x(ups))
    # phase gradients hbar Im(Y* dY)/|Y|^2, masked near nodes
    s_q = masked_ratio(hbar * np.imag(np.conj(ups) * grid.d_q(ups)), amp2)
    s_p = masked_ratio(hbar * np.imag(np.conj(ups) * grid.d_p(ups)), amp2)
    # {sigma_x, S} written with the masked phase gradients
    bracket_s = grid.d_q(sigma_x) * s_p - grid.d_p(sigma_x) * s_q
    # -hbar^2 {R, d_x R} = -hbar^2 {|Y|^2, d_x |Y|^2} / (4 |Y|^2)
    amp_term = -hbar * hbar * masked_ratio(
        grid.poisson(amp2, grid.d_x(amp2)), 4.0 * amp2)
    j_x = (2.0 * sigma_x + _p_broadcast(grid) * grid.d_p(sigma_x)
           + bracket_s + amp_term) / ham.m
    return j_q, j_p, j_x


def current_divergence(grid: Grid, j_q, j_p, j_x) -> np.ndarray:
    return grid.d_q(j_q) + grid.d_p(j_p) + grid.d_x(j_x)


def continuity_residual(grid: Grid, ham: HybridHamiltonian,
                        snapshots, dt: float) -> np.ndarray:
    """L2 residual of dD/dt + div J at each interior snapshot time.

    `snapshots` are fields saved a fixed stride `dt` apart; the time
    derivative is the centered difference (D[k+1] - D[k-1]) / (2 dt), so at
    least three snapshots are required and the first/last times give no
    entry.
    """
    snapshots = [grid.check_field(s) for s in snapshots]
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots for a centered difference")
    if not (dt > 0.0):
        raise ValueError("snapshot stride must be positive")
    sampled = ham.sampled(grid)
    dens = [hybrid_density(grid, s, ham.hbar) for s in snapshots]
    out = []
    for k in range(1, len(snapshots) - 1):
        ddt = (dens[k + 1] - dens[k - 1]) / (2.0 * dt)
        div = current_divergence(grid, *currents(grid, ham, snapshots[k],
                                                 sampled))
        out.append(grid.norm(ddt + div))
    return np.array(out)


def bracket_transport_residual(grid: Grid, ham: HybridHamiltonian,
                               ups: np.ndarray) -> float:
    """L2 residual of dD/dt - {H_I, D} for the *exact* time derivative.

    With the quantum kinetic term switched off the density is transported
    classically slice by slice in x, so this residual is spectrally small;
    with it on, the residual measures the genuinely quantum part of the
    transport.
    """
    ups = grid.check_field(ups)
    sampled = ham.sampled(grid)
    from . import hybrid as _hybrid  # late import; hybrid imports us
    dups = _hybrid.time_derivative(grid, ham, ups, sampled)
    ddt = density_rate(grid, ups, dups, ham.hbar)
    dens = hybrid_density(grid, ups, ham.hbar)
    # {H_I, D} with analytic Hamiltonian gradients (the kinetic term is not
    # periodic, so differentiating h_i spectrally would ring at the p edge)
    transport = sampled.dq_h * grid.d_p(dens) - sampled.dp_h * grid.d_q(dens)
    return float(grid.norm(ddt - transport))


def negativity_mass(grid: Grid, rho_c: np.ndarray) -> float:
    """Integral of the negative part of the classical marginal."""
    return float(np.sum(np.maximum(-rho_c, 0.0)) * grid.dq * grid.dp)


def hybrid_expectation(grid: Grid, obs: HybridHamiltonian, ups: np.ndarray,
                       via: str = "generator") -> float:
    """Expectation value of a hybrid observable given as a Hamiltonian spec.

    via="generator" evaluates Re <Y, L_obs Y> directly on the field;
    via="kernel" traces the observable against the operator-valued density
    kernel (small grids only).  The two routes agree to quadrature accuracy
    and testing that agreement is the point of having both.
    """
    ups = grid.check_field(ups)
    if via == "generator":
        from . import hybrid as _hybrid  # late import; hybrid imports us
        return _hybrid.energy(grid, obs, ups)
    if via != "kernel":
        raise ValueError(f"unknown route {via!r}")
    kernel = density_operator_kernel(grid, ups, obs.hbar)
    sampled = obs.sampled(grid)
    h_diag = np.broadcast_to(sampled.h_i, grid.shape)
    val = np.einsum("qpx,qpxx->", h_diag, kernel).real * grid.weight
    if obs.include_quantum_kinetic and grid.n_x > 1:
        t_mat = _dense_x_kinetic(grid, obs)
        val += np.einsum("xy,qpyx->", t_mat, kernel).real * grid.weight
    return float(val)


def _dense_x_kinetic(grid: Grid, ham: HybridHamiltonian) -> np.ndarray:
    """Dense matrix of -hbar^2/(2m) d^2/dx^2 on the x grid."""
    n = grid.n_x
    k = grid.wavenumbers("x")
    eye = np.eye(n, dtype=complex)
    cols = np.fft.ifft(-(k ** 2)[:, None] * np.fft.fft(eye, axis=0), axis=0)
    return -(ham.hbar ** 2) / (2.0 * ham.m) * cols
