"""Initial-condition builders for phase-space and hybrid wavefunctions.

All builders return complex fields of the grid's full (n_q, n_p, n_x)
shape (broadcast over missing axes), leaving normalization to the
caller unless stated otherwise.  Phases are specified as plain angles;
multiply the angle by 1/hbar yourself when a target action S is wanted,
since the wavefunction convention is Psi = R exp(i S / hbar).
"""

from __future__ import annotations

import numpy as np

from .grids import Grid


def phase_space_gaussian(grid: Grid, q0=0.0, p0=0.0, sigma_q=0.5, sigma_p=0.5,
                         kq=0.0, kp=0.0, chirp=0.0):
    """Gaussian wavepacket in the classical plane.

    The amplitude is exp(-(q-q0)^2/4 sq^2 - (p-p0)^2/4 sp^2), so the
    *density* |Psi|^2 has widths (sigma_q, sigma_p).  The angle is
    kq (q-q0) + kp (p-p0) + chirp (q-q0)(p-p0); with chirp = 1/(2 hbar)
    this realizes the action S = (q-q0)(p-p0)/2.

    The packet is summed over the +-2 pi images of both axes, so the
    sampled field is periodic to machine precision for any center and
    any kq/kp/chirp.  Without the image sum an off-center packet leaves
    a one-sided-tail jump at the box seam (about 4e-5 for sigma = 0.4)
    that contaminates the spectrum far above the packet's own tail.
    """
    Q, P, _ = grid.meshes()
    span = 2.0 * np.pi
    out = np.zeros((grid.n_q, grid.n_p, 1), dtype=complex)
    for mq in (-1, 0, 1) if grid.n_q > 1 else (0,):
        for mp in (-1, 0, 1) if grid.n_p > 1 else (0,):
            dq_ = Q - q0 + span * mq
            dp_ = P - p0 + span * mp
            amp = np.exp(-dq_**2 / (4.0 * sigma_q**2)
                         - dp_**2 / (4.0 * sigma_p**2))
            ang = kq * dq_ + kp * dp_ + chirp * dq_ * dp_
            out = out + amp * np.exp(1j * ang)
    return np.broadcast_to(out, grid.shape).astype(complex)


def uniform_phase_state(grid: Grid, amplitude=1.0, angle=None):
    """Uniform-amplitude field c e^{i angle(q,p)}.

    Such states have classical density identically 2 c^2 regardless of
    the phase: the divergence term contributes +c^2 and the bracket term
    vanishes for constant |Psi|.  `angle` is a callable (q, p) -> angle
    or None for a real constant field.
    """
    Q, P, _ = grid.meshes()
    if angle is None:
        ang = np.zeros(grid.shape)
    else:
        ang = np.broadcast_to(angle(Q, P), grid.shape)
    return amplitude * np.exp(1j * ang) * np.ones(grid.shape)


def quantum_gaussian_x(grid: Grid, x0=0.0, k0=0.0, sigma=0.5):
    """1D Gaussian factor on the quantum axis, L2-normalized on the grid.

    Returns shape (n_x,).  The angle is k0 (x - x0); pass k0 = p0/hbar
    for a coherent state of mean momentum p0.  Summed over the +-2 pi
    images of the periodic x axis (see phase_space_gaussian).
    """
    x = grid.x
    phi = np.zeros(x.shape, dtype=complex)
    for m in (-1, 0, 1):
        dx_ = x - x0 + 2.0 * np.pi * m
        phi = phi + np.exp(-dx_**2 / (4.0 * sigma**2) + 1j * k0 * dx_)
    nrm = np.sqrt(np.sum(np.abs(phi)**2) * grid.dx)
    return (phi / nrm).astype(complex)


def coherent_state_x(grid: Grid, hbar, m=1.0, omega=1.0, x0=0.0, p0=0.0):
    """Harmonic-oscillator coherent state: width-matched Gaussian.

    sigma^2 = hbar / (2 m omega) keeps the profile rigid under the
    harmonic evolution; the center follows the classical trajectory
    x_c(t) = x0 cos(omega t) + (p0 / m omega) sin(omega t).
    """
    sigma = np.sqrt(hbar / (2.0 * m * omega))
    return quantum_gaussian_x(grid, x0=x0, k0=p0 / hbar, sigma=sigma)


def oscillator_ground_state_x(grid: Grid, hbar, m=1.0, omega=1.0):
    return coherent_state_x(grid, hbar, m=m, omega=omega)


def two_level_vector(grid: Grid, chi):
    """Constant two-component quantum factor, shape (2,)."""
    if grid.n_x != 2:
        raise ValueError("two-level vector needs n_x = 2")
    chi = np.asarray(chi, dtype=complex)
    if chi.shape != (2,):
        raise ValueError("chi must have two components")
    return chi


def product_state(grid: Grid, z_part, x_part, normalize=True):
    """Tensor product of a classical-plane field and a quantum factor."""
    z_part = np.asarray(z_part, dtype=complex)
    x_part = np.asarray(x_part, dtype=complex)
    if z_part.ndim == 3:
        z_part = z_part[:, :, 0]
    ups = z_part[:, :, None] * x_part[None, None, :]
    if normalize:
        ups = grid.normalize(ups)
    return ups


def band_limited_random(grid: Grid, kmax=2, seed=0, complex_field=True):
    """Random trigonometric polynomial, |k| <= kmax on every axis.

    Deterministic in `seed`; handy as a generic smooth test field that
    spectral operations treat exactly.
    """
    rng = np.random.default_rng(seed)
    shape = grid.shape
    spec = np.zeros(shape, dtype=complex)
    for axis_n in shape:
        if axis_n > 1 and 2 * kmax + 1 > axis_n:
            raise ValueError("kmax too large for this grid")
    kranges = [
        range(-kmax, kmax + 1) if n > 1 else range(1)
        for n in shape
    ]
    for ka in kranges[0]:
        for kb in kranges[1]:
            for kc in kranges[2]:
                c = rng.standard_normal() + 1j * rng.standard_normal()
                spec[ka, kb, kc] = c
    field = np.fft.ifftn(spec) * grid.size
    if not complex_field:
        field = field.real.astype(complex)
    return grid.normalize(field)
