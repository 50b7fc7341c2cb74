"""Pseudospectral laboratory for wavefunction dynamics on phase space.

Classical mechanics is run in wavefunction form on the (q, p) torus --
transport along the Hamiltonian flow plus a phase fed by a Lagrangian
multiplier -- and couples to a quantum x axis through a joint field
Y(q, p, x).  Subpackages by theme:

- grids / states / hamiltonians: geometry, initial fields, presets
- classical / hybrid: the evolution kernels and diagnostics
- density / madelung: quadratic densities, currents, polar splitting
- sectors: block-diagonalization over a commuting quantum observable
- algebra: dense-operator identity checks
- trajectories: characteristics, loop integrals, phase transport
- snapshots / config / cli: file formats and the batch interface
"""

from .grids import Grid, classical_grid
from .hamiltonians import (
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
from .errors import ConfigError, NumericalInstability, SizeGuardError

__all__ = [
    "Grid", "classical_grid",
    "ClassicalHamiltonian", "HybridHamiltonian",
    "ZeroPotential", "SeparablePotential", "BilinearPotential",
    "QuadraticPotential", "TwoLevelPotential",
    "potential_from_dict", "two_level_sectors",
    "ConfigError", "NumericalInstability", "SizeGuardError",
]

__version__ = "0.1.0"
