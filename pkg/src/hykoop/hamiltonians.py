"""Hamiltonian presets with closed-form gradients.

Every preset carries analytic derivative callables next to its value
callable.  The evolution kernels multiply fields by these sampled
derivatives and never differentiate a sampled non-periodic function
spectrally; since each multiplier is constant along the axis of the
derivative it multiplies, all generator terms are exactly Hermitian on
the grid (conservation is then limited only by the time stepper).

Classical Hamiltonians have the form

    H(q, p) = p^2 / 2M + V_C(q),        V_C = k/2 q^2 + kappa cos q + s sin q

and hybrid Hamiltonians

    H(q, p, x) = p^2 / 2M + V(q, x)     (+ quantum kinetic -hbar^2/2m d_xx)

with V(q, x) one of: zero, separable, bilinear lam sin q sin x, quadratic
lam/2 q^2 x^2, or a two-level coupling V0(q) + lam sin(q) * (+-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import Grid


# ---------------------------------------------------------------------------
# potentials V(q, x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroPotential:
    kind: str = "zero"

    def v(self, q, x):
        return np.zeros(np.broadcast_shapes(np.shape(q), np.shape(x)))

    def dv_dq(self, q, x):
        return np.zeros(np.broadcast_shapes(np.shape(q), np.shape(x)))

    def dv_dx(self, q, x):
        return np.zeros(np.broadcast_shapes(np.shape(q), np.shape(x)))

    @property
    def coupled(self) -> bool:
        return False


@dataclass(frozen=True)
class SeparablePotential:
    """V = V_C(q) + V_Q(x), each axis a harmonic + cosine combination."""

    q_harmonic: float = 0.0
    q_cos: float = 0.0
    x_harmonic: float = 0.0
    x_cos: float = 0.0
    kind: str = "separable"

    def v(self, q, x):
        return (0.5 * self.q_harmonic * q**2 + self.q_cos * np.cos(q)
                + 0.5 * self.x_harmonic * x**2 + self.x_cos * np.cos(x))

    def dv_dq(self, q, x):
        return (self.q_harmonic * q - self.q_cos * np.sin(q)) + 0.0 * x

    def dv_dx(self, q, x):
        return (self.x_harmonic * x - self.x_cos * np.sin(x)) + 0.0 * q

    @property
    def coupled(self) -> bool:
        return False


@dataclass(frozen=True)
class BilinearPotential:
    """V = lam sin(q) sin(x), the band-limited coupling preset."""

    lam: float = 0.5
    kind: str = "bilinear"

    def v(self, q, x):
        return self.lam * np.sin(q) * np.sin(x)

    def dv_dq(self, q, x):
        return self.lam * np.cos(q) * np.sin(x)

    def dv_dx(self, q, x):
        return self.lam * np.sin(q) * np.cos(x)

    @property
    def coupled(self) -> bool:
        return self.lam != 0.0


@dataclass(frozen=True)
class QuadraticPotential:
    """V = lam/2 q^2 x^2 sampled on the centered periodic representatives."""

    lam: float = 0.1
    kind: str = "quadratic"

    def v(self, q, x):
        return 0.5 * self.lam * q**2 * x**2

    def dv_dq(self, q, x):
        return self.lam * q * x**2

    def dv_dx(self, q, x):
        return self.lam * q**2 * x

    @property
    def coupled(self) -> bool:
        return self.lam != 0.0


@dataclass(frozen=True)
class TwoLevelPotential:
    """V(q, j) = V0(q) + lam sin(q) s_j on a two-point level axis.

    The level axis stores indices j in {0, 1}, mapped to signs
    s = 1 - 2j in {+1, -1}; it has no spatial meaning and the quantum
    kinetic term must stay off.
    """

    lam: float = 0.3
    v0_harmonic: float = 0.0
    v0_cos: float = 0.0
    kind: str = "twolevel"

    def _sign(self, x):
        return 1.0 - 2.0 * np.asarray(x)

    def v(self, q, x):
        v0 = 0.5 * self.v0_harmonic * q**2 + self.v0_cos * np.cos(q)
        return v0 + self.lam * np.sin(q) * self._sign(x)

    def dv_dq(self, q, x):
        return (self.v0_harmonic * q - self.v0_cos * np.sin(q)
                + self.lam * np.cos(q) * self._sign(x))

    def dv_dx(self, q, x):
        raise ValueError("two-level axis has no x-derivative")

    @property
    def coupled(self) -> bool:
        return self.lam != 0.0


POTENTIAL_KINDS = {
    "zero": ZeroPotential,
    "separable": SeparablePotential,
    "bilinear": BilinearPotential,
    "quadratic": QuadraticPotential,
    "twolevel": TwoLevelPotential,
}


def potential_from_dict(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    try:
        cls = POTENTIAL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown potential kind {kind!r}") from None
    return cls(**cfg)


# ---------------------------------------------------------------------------
# classical Hamiltonians H(q, p)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalHamiltonian:
    """H = p^2/2M (optional) + k/2 q^2 + kappa cos q + s sin q + offset.

    The constant offset feeds only the phase multiplier; it is how a
    sector Hamiltonian remembers the eigenvalue it came from.
    """

    mass: float = 1.0
    harmonic_k: float = 0.0
    cos_coeff: float = 0.0
    sin_coeff: float = 0.0
    offset: float = 0.0
    include_kinetic: bool = True

    def __post_init__(self):
        if not (self.mass > 0.0):
            raise ValueError("classical mass must be positive")

    def v(self, q):
        return (0.5 * self.harmonic_k * q**2 + self.cos_coeff * np.cos(q)
                + self.sin_coeff * np.sin(q) + self.offset)

    def dv(self, q):
        return (self.harmonic_k * q - self.cos_coeff * np.sin(q)
                + self.sin_coeff * np.cos(q))

    def value(self, q, p):
        kin = p**2 / (2.0 * self.mass) if self.include_kinetic else 0.0 * p
        return kin + self.v(q)

    def dq(self, q, p):
        return self.dv(q) + 0.0 * p

    def dp(self, q, p):
        if self.include_kinetic:
            return p / self.mass + 0.0 * q
        return np.zeros(np.broadcast_shapes(np.shape(q), np.shape(p)))

    def phase_multiplier(self, q, p):
        """H - p dH/dp, the multiplicative part of the KvH generator."""
        return self.value(q, p) - p * self.dp(q, p)


# ---------------------------------------------------------------------------
# hybrid Hamiltonians H(q, p, x)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HybridHamiltonian:
    """Classical kinetic + interaction potential + quantum kinetic.

    m is the quantum mass (x motion), M the classical mass (q, p motion).
    """

    hbar: float = 0.1
    m: float = 1.0
    M: float = 1.0
    potential: object = field(default_factory=ZeroPotential)
    include_quantum_kinetic: bool = True
    include_classical_kinetic: bool = True

    def __post_init__(self):
        if not (self.hbar > 0.0 and self.m > 0.0 and self.M > 0.0):
            raise ValueError("hbar and both masses must be positive")
        if self.potential.kind == "twolevel" and self.include_quantum_kinetic:
            raise ValueError("two-level potential requires quantum kinetic off")

    def h_interaction(self, q, p, x):
        """H_I = p^2/2M + V(q, x) (kinetic part optional)."""
        kin = p**2 / (2.0 * self.M) if self.include_classical_kinetic else 0.0 * p
        return kin + self.potential.v(q, x)

    def l_interaction(self, q, p, x):
        """L_I = p^2/2M - V(q, x), the interaction Lagrangian."""
        kin = p**2 / (2.0 * self.M) if self.include_classical_kinetic else 0.0 * p
        return kin - self.potential.v(q, x)

    def dq_h(self, q, p, x):
        return self.potential.dv_dq(q, x) + 0.0 * p

    def dp_h(self, q, p, x):
        if self.include_classical_kinetic:
            return p / self.M + 0.0 * q + 0.0 * np.asarray(x, dtype=float)
        return np.zeros(np.broadcast_shapes(np.shape(q), np.shape(p), np.shape(x)))

    def vector_field(self, q, p, x):
        """Interaction Hamiltonian vector field X_{H_I} = (dH/dp, -dH/dq)."""
        return self.dp_h(q, p, x), -self.dq_h(q, p, x)

    def sampled(self, grid: Grid) -> "SampledHamiltonian":
        Q, P, X = grid.meshes()
        return SampledHamiltonian(
            h_i=np.broadcast_to(self.h_interaction(Q, P, X), grid.shape).copy(),
            l_i=np.broadcast_to(self.l_interaction(Q, P, X), grid.shape).copy(),
            dq_h=np.broadcast_to(self.dq_h(Q, P, X), grid.shape).copy(),
            dp_h=np.broadcast_to(self.dp_h(Q, P, X), grid.shape).copy(),
        )


@dataclass(frozen=True)
class SampledHamiltonian:
    """Grid samples of H_I, L_I and the analytic gradient multipliers."""

    h_i: np.ndarray
    l_i: np.ndarray
    dq_h: np.ndarray
    dp_h: np.ndarray


def two_level_sectors(ham: HybridHamiltonian) -> list[ClassicalHamiltonian]:
    """Per-level classical Hamiltonians of a two-level hybrid Hamiltonian."""
    pot = ham.potential
    if pot.kind != "twolevel":
        raise ValueError("expected a two-level potential")
    out = []
    for sign in (+1.0, -1.0):
        out.append(ClassicalHamiltonian(
            mass=ham.M,
            harmonic_k=pot.v0_harmonic,
            cos_coeff=pot.v0_cos,
            sin_coeff=sign * pot.lam,
            include_kinetic=ham.include_classical_kinetic,
        ))
    return out
