"""Periodic phase-space grids with spectral calculus.

The computational domain is a flat torus carrying classical coordinates
(q, p) and a quantum coordinate x.  Fields are complex arrays of shape
(n_q, n_p, n_x); classical-only fields use n_x = 1.  Derivatives are
Fourier collocation derivatives, products are taken pointwise in physical
space, and integrals are the torus trapezoid rule (= Riemann sum), which
is spectrally accurate for periodic integrands.

The canonical Poisson bracket is

    {f, g} = (d_q f)(d_p g) - (d_p f)(d_q g)

with spectral derivatives.  The Nyquist mode is zeroed in odd-order
derivatives so that real fields keep real derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_AXES = {"q": 0, "p": 1, "x": 2}


def _check_axis_size(name: str, n: int) -> None:
    if name == "x" and n in (1, 2):
        # degenerate classical axis / two-level quantum factor
        return
    if n < 4:
        raise ValueError(f"axis {name}: size {n} too small (need >= 4)")
    if n % 2:
        raise ValueError(f"axis {name}: odd axis size {n}")


@dataclass
class Grid:
    """Uniform periodic grid for fields on (q, p, x).

    Offsets default to -L/2 so axes are centered at zero; the x axis of a
    size-1 or size-2 grid stores abstract level indices 0..n_x-1 with unit
    weight instead (no spatial meaning).
    """

    n_q: int
    n_p: int
    n_x: int = 1
    L_q: float = 2.0 * np.pi
    L_p: float = 2.0 * np.pi
    L_x: float | None = None
    o_q: float | None = None
    o_p: float | None = None
    o_x: float | None = None
    dealias: bool = False

    q: np.ndarray = field(init=False, repr=False)
    p: np.ndarray = field(init=False, repr=False)
    x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name, n in (("q", self.n_q), ("p", self.n_p), ("x", self.n_x)):
            _check_axis_size(name, n)
        if self.L_x is None:
            self.L_x = float(self.n_x) if self.n_x in (1, 2) else 2.0 * np.pi
        for L in (self.L_q, self.L_p, self.L_x):
            if not (L > 0.0):
                raise ValueError(f"nonpositive axis length {L}")
        if self.o_q is None:
            self.o_q = -self.L_q / 2.0
        if self.o_p is None:
            self.o_p = -self.L_p / 2.0
        if self.o_x is None:
            self.o_x = -self.L_x / 2.0 if self.n_x > 2 else 0.0

        self.q = self.o_q + self.dq * np.arange(self.n_q)
        self.p = self.o_p + self.dp * np.arange(self.n_p)
        self.x = self.o_x + self.dx * np.arange(self.n_x)

        # wavenumbers in FFT ordering; the *_odd variants zero the Nyquist
        # mode, which keeps odd-order derivatives of real fields real
        self._k = {}
        self._k_odd = {}
        for ax, (n, L) in enumerate(
            [(self.n_q, self.L_q), (self.n_p, self.L_p), (self.n_x, self.L_x)]
        ):
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
            self._k[ax] = k
            k_odd = k.copy()
            if n % 2 == 0 and n > 1:
                k_odd[n // 2] = 0.0
            self._k_odd[ax] = k_odd

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_q, self.n_p, self.n_x)

    @property
    def size(self) -> int:
        return self.n_q * self.n_p * self.n_x

    @property
    def dq(self) -> float:
        return self.L_q / self.n_q

    @property
    def dp(self) -> float:
        return self.L_p / self.n_p

    @property
    def dx(self) -> float:
        return self.L_x / self.n_x

    @property
    def weight(self) -> float:
        """Quadrature weight of a single grid point."""
        return self.dq * self.dp * self.dx

    def meshes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (Q, P, X) of the full grid."""
        return np.meshgrid(self.q, self.p, self.x, indexing="ij", sparse=True)

    def wavenumbers(self, axis: str) -> np.ndarray:
        return self._k[_AXES[axis]]

    def wrap(self, values: np.ndarray, axis: str) -> np.ndarray:
        """Map coordinate values to their principal representative."""
        o = (self.o_q, self.o_p, self.o_x)[_AXES[axis]]
        L = (self.L_q, self.L_p, self.L_x)[_AXES[axis]]
        return (np.asarray(values) - o) % L + o

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} != grid shape {self.shape}")
        return f

    # -- spectral calculus ------------------------------------------------

    def deriv(self, f: np.ndarray, axis: str, order: int = 1) -> np.ndarray:
        """Spectral derivative d^order/d(axis)^order of a periodic field."""
        f = self.check_field(f)
        ax = _AXES[axis]
        if f.shape[ax] == 1:
            return np.zeros_like(f, dtype=complex if np.iscomplexobj(f) else float)
        k = self._k_odd[ax] if order % 2 else self._k[ax]
        shp = [1, 1, 1]
        shp[ax] = f.shape[ax]
        mult = (1j * k.reshape(shp)) ** order
        out = np.fft.ifft(mult * np.fft.fft(f, axis=ax), axis=ax)
        if not np.iscomplexobj(f):
            return out.real
        return out

    def d_q(self, f: np.ndarray) -> np.ndarray:
        return self.deriv(f, "q")

    def d_p(self, f: np.ndarray) -> np.ndarray:
        return self.deriv(f, "p")

    def d_x(self, f: np.ndarray) -> np.ndarray:
        return self.deriv(f, "x")

    def lap_x(self, f: np.ndarray) -> np.ndarray:
        return self.deriv(f, "x", order=2)

    def dealias_23(self, f: np.ndarray) -> np.ndarray:
        """Zero the top third of the spectrum on every nontrivial axis."""
        F = np.fft.fftn(f)
        for ax in range(3):
            n = f.shape[ax]
            if n < 4:
                continue
            k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
            keep = k < n / 3.0
            shp = [1, 1, 1]
            shp[ax] = n
            F = F * keep.reshape(shp)
        out = np.fft.ifftn(F)
        if not np.iscomplexobj(f):
            return out.real
        return out

    def poisson(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Canonical bracket {f, g} on the (q, p) factor."""
        if self.dealias:
            f = self.dealias_23(f)
            g = self.dealias_23(g)
        out = self.d_q(f) * self.d_p(g) - self.d_p(f) * self.d_q(g)
        if self.dealias:
            out = self.dealias_23(out)
        return out

    # -- quadrature -------------------------------------------------------

    def integrate(self, f: np.ndarray):
        return self.check_field(f).sum() * self.weight

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """L2 inner product <f, g> with the convention conj on the left."""
        return complex((np.conj(self.check_field(f)) * self.check_field(g)).sum()
                       * self.weight)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.abs(self.inner(f, f))))

    def normalize(self, f: np.ndarray) -> np.ndarray:
        n = self.norm(f)
        if n == 0.0:
            raise ValueError("cannot normalize a zero field")
        return f / n

    # -- diagnostics ------------------------------------------------------

    def p_boundary_mass(self, f: np.ndarray) -> float:
        """Fraction of |f|^2 mass within 10% of the p-boundary.

        The torus stands in for an unbounded momentum axis, which is only
        faithful while wavefunctions are negligible near the identified
        edge; this diagnostic quantifies the violation.
        """
        f = self.check_field(f)
        dens = np.abs(f) ** 2
        total = dens.sum()
        if total == 0.0:
            return 0.0
        edge = self.o_p + self.L_p
        dist = np.minimum(self.p - self.o_p, edge - self.p)
        band = dist <= 0.05 * self.L_p
        return float(dens[:, band, :].sum() / total)


def classical_grid(n_q: int, n_p: int, **kw) -> Grid:
    """Grid for classical phase-space fields (degenerate x axis)."""
    return Grid(n_q, n_p, n_x=1, **kw)
