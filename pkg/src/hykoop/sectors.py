"""Hybrid dynamics that factor through one commuting quantum observable.

When the hybrid Hamiltonian touches its quantum side only through a
single Hermitian observable A -- so H = H(q, p, A) -- projecting the
field onto the eigenvectors of A block-diagonalizes the dynamics.  The
projection belonging to eigenvalue a_n evolves under the *classical*
covariant generator with Hamiltonian H(q, p, a_n), its momentum-map
density is transported along the classical characteristics of that
Hamiltonian, and a pointwise sign the density starts with therefore
never changes.  This module implements the projection, the sector-wise
evolution, the per-sector densities, and the positivity report built
on top of them.

Eigenvectors are stored plain-orthonormal and the projection carries a
sqrt(dx) weight, i.e. it uses L2(dx)-normalized eigenvectors.  That
makes the decomposition unitary against grid.norm; on level axes
(unit step) the position-operator sectors are literally the x-slices
of the field.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .grids import Grid, classical_grid
from .hamiltonians import ClassicalHamiltonian, HybridHamiltonian, two_level_sectors
from . import classical as _classical

MAX_LEVELS = 8
ORTHONORMALITY_TOL = 1e-12

# A sector evolution is only "in family" when its initial density is
# nonnegative; anything above this dips below zero in earnest.
INITIAL_NEGATIVITY_TOL = 1e-10
POSITIVITY_TOL = 1e-6


@dataclass
class CommutingObservable:
    """A Hermitian quantum observable diagonalized once and for all.

    `eigenvectors` holds plain-orthonormal columns (no dx weight), one
    per eigenvalue.  `sector_hamiltonians[n]` is the classical
    Hamiltonian obtained by substituting eigenvalue n into the hybrid
    one; leave it None when only the decomposition is needed.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sector_hamiltonians: tuple[ClassicalHamiltonian, ...] | None = None

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.eigenvectors = np.asarray(self.eigenvectors, dtype=complex)
        v = self.eigenvectors
        if self.eigenvalues.ndim != 1 or v.ndim != 2:
            raise ValueError("need a vector of eigenvalues and a matrix "
                             "of eigenvector columns")
        if v.shape[1] != self.eigenvalues.shape[0]:
            raise ValueError("one eigenvector column per eigenvalue")
        gram = v.conj().T @ v
        defect = float(np.max(np.abs(gram - np.eye(v.shape[1]))))
        if defect > ORTHONORMALITY_TOL:
            raise ValueError(f"eigenvectors not orthonormal "
                             f"(defect {defect:.3e})")
        if self.sector_hamiltonians is not None:
            self.sector_hamiltonians = tuple(self.sector_hamiltonians)
            if len(self.sector_hamiltonians) != self.n_sectors:
                raise ValueError("one classical Hamiltonian per eigenvalue")

    @property
    def n_sectors(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_levels(self) -> int:
        return self.eigenvectors.shape[0]

    @classmethod
    def position(cls, grid: Grid, hamiltonians=None):
        """The multiply-by-x observable, diagonal in the grid basis.

        Eigenvalues are the x nodes; `hamiltonians` is an optional
        sequence with one entry per node, or a callable eigenvalue ->
        ClassicalHamiltonian evaluated at each node.
        """
        w = np.array(grid.x, dtype=float)
        return cls(w, np.eye(grid.n_x), _resolve_hamiltonians(hamiltonians, w))

    @classmethod
    def hermitian(cls, matrix, hamiltonians=None):
        """A finite-level Hermitian matrix observable (at most MAX_LEVELS).

        The eigendecomposition happens here, once; `hamiltonians` is a
        sequence ordered like the ascending eigenvalues, or a callable
        eigenvalue -> ClassicalHamiltonian.
        """
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("observable must be a square matrix")
        if m.shape[0] > MAX_LEVELS:
            raise ValueError(f"at most {MAX_LEVELS} levels supported, "
                             f"got {m.shape[0]}")
        defect = float(np.max(np.abs(m - m.conj().T)))
        if defect > ORTHONORMALITY_TOL:
            raise ValueError(f"observable not Hermitian (defect {defect:.3e})")
        w, v = np.linalg.eigh(m)
        return cls(w, v, _resolve_hamiltonians(hamiltonians, w))

    @classmethod
    def two_level(cls, ham: HybridHamiltonian):
        """diag(+1, -1) on the signed two-level axis.

        Sector Hamiltonians come from the decoupling of the two-level
        potential, in the level order (sign +1 first).
        """
        return cls(np.array([1.0, -1.0]), np.eye(2), two_level_sectors(ham))


def _resolve_hamiltonians(hamiltonians, eigenvalues):
    if hamiltonians is None or not callable(hamiltonians):
        return hamiltonians
    return tuple(hamiltonians(a) for a in eigenvalues)


def _check_match(grid: Grid, obs: CommutingObservable):
    if obs.n_levels != grid.n_x:
        raise ValueError(f"observable acts on {obs.n_levels} levels, "
                         f"grid has {grid.n_x}")


def _check_sectors(grid: Grid, sectors: np.ndarray, obs: CommutingObservable):
    want = (grid.n_q, grid.n_p, obs.n_sectors)
    if sectors.shape != want:
        raise ValueError(f"sector stack has shape {sectors.shape}, "
                         f"expected {want}")


def classical_view(grid: Grid) -> Grid:
    """The (q, p) grid a single sector field lives on."""
    return classical_grid(grid.n_q, grid.n_p, L_q=grid.L_q, L_p=grid.L_p,
                          o_q=grid.o_q, o_p=grid.o_p, dealias=grid.dealias)


def sector_decompose(grid: Grid, ups, obs: CommutingObservable) -> np.ndarray:
    """Project a hybrid field onto the observable's eigenvectors.

    Returns an (n_q, n_p, n_sectors) stack of classical phase-space
    fields.  The projection is unitary: the squared norms of the
    sectors (each on `classical_view(grid)`) sum to norm(ups)^2.
    """
    ups = grid.check_field(ups)
    _check_match(grid, obs)
    proj = np.einsum("qpx,xn->qpn", ups, obs.eigenvectors.conj())
    return proj * np.sqrt(grid.dx)


def sector_recompose(grid: Grid, sectors, obs: CommutingObservable) -> np.ndarray:
    """Rebuild the hybrid field from its sector stack (inverse projection)."""
    sectors = np.asarray(sectors, dtype=complex)
    _check_match(grid, obs)
    _check_sectors(grid, sectors, obs)
    out = np.einsum("qpn,xn->qpx", sectors, obs.eigenvectors)
    return out / np.sqrt(grid.dx)


def evolve_sectors(grid: Grid, obs: CommutingObservable, sectors, dt,
                   n_steps, hbar, koopman_only=False, callback=None):
    """Evolve every sector under its own classical covariant generator.

    The sectors are dynamically independent, so they integrate one at a
    time (nothing couples them; run them in parallel if you care).
    `callback(n, step, t, field)` fires per sector with the cadence of
    the classical integrator.  Returns the evolved stack.
    """
    if obs.sector_hamiltonians is None:
        raise ValueError("observable carries no sector Hamiltonians")
    sectors = np.asarray(sectors, dtype=complex)
    _check_sectors(grid, sectors, obs)
    cgrid = classical_view(grid)
    out = np.empty_like(sectors)
    for n, ham in enumerate(obs.sector_hamiltonians):
        cb = None if callback is None else partial(callback, n)
        evolved = _classical.evolve(cgrid, ham, sectors[:, :, n, None], dt,
                                    n_steps, hbar, koopman_only=koopman_only,
                                    callback=cb)
        out[:, :, n] = evolved[:, :, 0]
    return out


def sector_density(grid: Grid, sectors, hbar) -> np.ndarray:
    """Momentum-map density of each sector, stacked (n_q, n_p, n_sectors).

    Real but possibly signed fields; their sum over sectors is exactly
    the classical marginal of the hybrid density of the recomposed
    field, and each integrates (dq dp) to the squared norm of its
    sector.
    """
    sectors = np.asarray(sectors, dtype=complex)
    cgrid = classical_view(grid)
    out = np.empty(sectors.shape, dtype=float)
    for n in range(sectors.shape[2]):
        dens = _classical.classical_density(cgrid, sectors[:, :, n, None], hbar)
        out[:, :, n] = dens[:, :, 0]
    return out


def sector_masses(grid: Grid, densities) -> np.ndarray:
    """Per-sector integral of the density over (q, p).

    Sums to 1 for a normalized field that decays at the p boundary;
    for fields with mass at the edge of the periodic p window the
    coordinate-weighted term p d_p(.) leaves a boundary contribution
    and the total exceeds the norm.
    """
    densities = np.asarray(densities)
    return densities.sum(axis=(0, 1)) * grid.dq * grid.dp


def sector_classical_marginal(densities) -> np.ndarray:
    """rho_c(q, p) as the plain sum of the per-sector densities.

    The sqrt(dx) projection weight already accounts for the x-axis
    quadrature, so no further weight appears here; the result matches
    density.classical_marginal of the full hybrid density.
    """
    return np.asarray(densities).sum(axis=2)


@dataclass(frozen=True)
class PositivityReport:
    """Outcome of tracking the minimum sector density along an evolution.

    `min_values[k]` is the minimum over grid points and sectors at
    `times[k]`.  The check passes when no minimum falls below the
    initial one by more than `tolerance`; a failure is recorded here,
    not raised.
    """

    times: np.ndarray
    min_values: np.ndarray
    tolerance: float
    passed: bool

    @property
    def floor(self) -> float:
        """Lowest value any later minimum is allowed to reach."""
        return float(self.min_values[0]) - self.tolerance

    @property
    def worst_drop(self) -> float:
        """Largest decrease of the minimum below its initial value."""
        return float(self.min_values[0] - self.min_values.min())


def positivity_check(times, density_series, tolerance=POSITIVITY_TOL,
                     initial_tolerance=INITIAL_NEGATIVITY_TOL) -> PositivityReport:
    """Judge whether the minimum sector density ever drops.

    `density_series[k]` is the (n_q, n_p, n_sectors) density stack at
    `times[k]`.  The series must start from nonnegative data (up to
    `initial_tolerance`) -- that is the hypothesis the preservation
    statement rests on, so badly negative initial data is a usage
    error, not a FAIL.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.shape[0] != len(density_series):
        raise ValueError("one density stack per time")
    if times.shape[0] == 0:
        raise ValueError("empty density series")
    mins = np.array([float(np.min(d)) for d in density_series])
    if mins[0] < -initial_tolerance:
        raise ValueError(f"initial density is negative (min {mins[0]:.3e}); "
                         "the preservation statement needs a nonnegative start")
    passed = bool(np.all(mins >= mins[0] - tolerance))
    return PositivityReport(times=times, min_values=mins,
                            tolerance=tolerance, passed=passed)


def sector_density_series(grid: Grid, obs: CommutingObservable, ups0, dt,
                          n_steps, hbar, record_every=1):
    """Decompose, evolve sector-wise, and record densities along the way.

    Returns (times, series) where series[k] is the (n_q, n_p,
    n_sectors) sector-density stack at times[k]; records every
    `record_every`-th step plus the last.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    sectors0 = sector_decompose(grid, ups0, obs)
    record = [s for s in range(0, n_steps + 1, record_every)]
    if record[-1] != n_steps:
        record.append(n_steps)
    steps = {s: k for k, s in enumerate(record)}
    stacks = [np.empty(sectors0.shape, dtype=complex) for _ in record]

    def grab(n, step, t, field):
        k = steps.get(step)
        if k is not None:
            stacks[k][:, :, n] = field[:, :, 0]

    evolve_sectors(grid, obs, sectors0, dt, n_steps, hbar, callback=grab)
    times = np.array([s * dt for s in record])
    series = [sector_density(grid, stack, hbar) for stack in stacks]
    return times, series
