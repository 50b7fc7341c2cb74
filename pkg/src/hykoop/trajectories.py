"""Trajectory advection along sampled hybrid velocity fields.

Paths follow dPhi/dt = X(Phi, t) for Phi = (q, p, x), with X given as a
series of field snapshots: cubic periodic interpolation in space, linear
interpolation in time, RK4 stepping.  Along each path the compound phase
accumulates as dS/dt = L (the Lagrangian field), and a closed loop of
points yields both sides of the circulation-rate identity

    d/dt  loop-int p dq  =  loop-int (dV/dx) dx

evaluated by independent quadratures.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .grids import Grid
from .hamiltonians import HybridHamiltonian

_AXIS_RANGE_SLACK = 1e-9


class FieldSampler:
    """Samples a time series of scalar grid fields at arbitrary points.

    Space: spline of `order` (default cubic) with periodic wrap, the
    spline coefficients computed once per snapshot.  Time: linear between
    the two bracketing snapshots.  Length-1 axes are dropped (their
    coordinate is ignored), and the order is reduced if an axis is too
    short to support it.
    """

    def __init__(self, grid: Grid, times, fields, order: int = 3):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        fields = np.asarray(fields, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("snapshot times must be a non-empty 1d array")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if fields.shape != (len(self.times),) + grid.shape:
            raise ValueError(
                f"fields shape {fields.shape} does not match "
                f"(n_times,) + grid shape {(len(self.times),) + grid.shape}")
        origins = (grid.o_q, grid.o_p, grid.o_x)
        steps = (grid.dq, grid.dp, grid.dx)
        self._kept = [a for a, n in enumerate(grid.shape) if n > 1]
        self._origin = np.array([origins[a] for a in self._kept])
        self._step = np.array([steps[a] for a in self._kept])
        self.order = min(order, *(grid.shape[a] - 1 for a in self._kept))
        squeezed = fields.reshape((len(self.times),)
                                  + tuple(grid.shape[a] for a in self._kept))
        if self.order > 1:
            self._coeffs = np.stack([
                ndimage.spline_filter(s, order=self.order, mode="grid-wrap")
                for s in squeezed])
        else:
            self._coeffs = squeezed

    def _space(self, k: int, pos: np.ndarray) -> np.ndarray:
        coords = (pos[:, self._kept] - self._origin) / self._step
        return ndimage.map_coordinates(self._coeffs[k], coords.T,
                                       order=self.order, mode="grid-wrap",
                                       prefilter=False)

    def __call__(self, pos: np.ndarray, t: float) -> np.ndarray:
        """Values at positions `pos` (m, 3) and time `t`."""
        ts = self.times
        slack = _AXIS_RANGE_SLACK * (ts[-1] - ts[0] + 1.0)
        if t < ts[0] - slack or t > ts[-1] + slack:
            raise ValueError(
                f"time {t} outside the snapshot range [{ts[0]}, {ts[-1]}]")
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        if len(ts) == 1:
            return self._space(0, pos)
        j = int(np.clip(np.searchsorted(ts, t, side="right") - 1,
                        0, len(ts) - 2))
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        w = float(np.clip(w, 0.0, 1.0))
        lo = self._space(j, pos)
        if w == 0.0:
            return lo
        return (1.0 - w) * lo + w * self._space(j + 1, pos)


class VelocitySampler:
    """Component-wise FieldSampler over a (n_t, 3, n_q, n_p, n_x) series."""

    def __init__(self, grid: Grid, times, velocities, order: int = 3):
        velocities = np.asarray(velocities, dtype=float)
        if velocities.ndim != 5 or velocities.shape[1] != 3:
            raise ValueError("expected velocity series of shape "
                             "(n_times, 3, n_q, n_p, n_x)")
        self.components = [FieldSampler(grid, times, velocities[:, c], order)
                           for c in range(3)]

    def __call__(self, pos: np.ndarray, t: float) -> np.ndarray:
        return np.stack([c(pos, t) for c in self.components], axis=-1)


@dataclass
class TrajectoryEnsemble:
    """A bundle of advected paths.

    seeds: (n, 3) initial points; paths: (n_times, n, 3) wrapped onto the
    torus; phases: accumulated compound-phase increments along each path
    (None until phase_along_path fills them); crossed: per-path flag set
    when a path has sampled a masked (near-node) region; closed_loop:
    seeds are an ordered cycle for loop integrals.
    """

    seeds: np.ndarray
    times: np.ndarray
    paths: np.ndarray
    phases: np.ndarray | None = None
    crossed: np.ndarray | None = None
    closed_loop: bool = False

    @property
    def n_paths(self) -> int:
        return self.paths.shape[1]


def wrap_positions(grid: Grid, pos: np.ndarray) -> np.ndarray:
    out = np.array(pos, dtype=float, copy=True)
    for i, ax in enumerate("qpx"):
        out[..., i] = grid.wrap(out[..., i], ax)
    return out


def advect_trajectories(grid: Grid, times, velocities, seeds, dt: float,
                        closed_loop: bool = False) -> TrajectoryEnsemble:
    """RK4-advect seed points through a velocity snapshot series.

    Steps of size dt from the first snapshot time as far as full steps
    fit inside the last; every stage samples the series (cubic in space,
    linear in time).  Committed positions are wrapped onto the torus.
    """
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.ndim != 2 or seeds.shape[1] != 3:
        raise ValueError("seeds must have shape (n, 3)")
    sampler = VelocitySampler(grid, times, velocities)
    ts = sampler.components[0].times
    n_steps = int(np.floor((ts[-1] - ts[0]) / dt + _AXIS_RANGE_SLACK))
    path_times = ts[0] + dt * np.arange(n_steps + 1)
    paths = np.empty((n_steps + 1,) + seeds.shape)
    pos = wrap_positions(grid, seeds)
    paths[0] = pos
    for k in range(n_steps):
        t = path_times[k]
        k1 = sampler(pos, t)
        k2 = sampler(pos + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = sampler(pos + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = sampler(pos + dt * k3, min(t + dt, ts[-1]))
        pos = wrap_positions(
            grid, pos + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        paths[k + 1] = pos
    return TrajectoryEnsemble(seeds=seeds.copy(), times=path_times,
                              paths=paths, closed_loop=closed_loop)


def phase_along_path(grid: Grid, ensemble: TrajectoryEnsemble, times,
                     lagrangians, masks=None) -> TrajectoryEnsemble:
    """Accumulate dS/dt = L along each path by trapezoid quadrature.

    Returns a new ensemble with `phases` (n_times, n) starting at zero.
    When mask snapshots are supplied, paths whose linear-interpolated
    mask value ever drops below one half are flagged in `crossed`: the
    phase there rode over a near-node region and is unreliable.
    """
    sampler = FieldSampler(grid, times, lagrangians)
    n_times, n = ensemble.paths.shape[:2]
    vals = np.empty((n_times, n))
    for k in range(n_times):
        vals[k] = sampler(ensemble.paths[k], ensemble.times[k])
    dts = np.diff(ensemble.times)[:, None]
    phases = np.zeros((n_times, n))
    phases[1:] = np.cumsum(0.5 * dts * (vals[:-1] + vals[1:]), axis=0)
    crossed = None
    if masks is not None:
        msampler = FieldSampler(grid, times,
                                np.asarray(masks, dtype=float), order=1)
        crossed = np.zeros(n, dtype=bool)
        for k in range(n_times):
            crossed |= msampler(ensemble.paths[k], ensemble.times[k]) < 0.5
    return replace(ensemble, phases=phases, crossed=crossed)


def _minimal_image(d: np.ndarray, length: float) -> np.ndarray:
    return (d + 0.5 * length) % length - 0.5 * length


def _loop_integrals(grid: Grid, ham: HybridHamiltonian, pts: np.ndarray):
    """(loop-int p dq, loop-int dV/dx dx) for one ordered vertex cycle."""
    nxt = np.roll(pts, -1, axis=0)
    dqs = _minimal_image(nxt[:, 0] - pts[:, 0], grid.L_q)
    circulation = float(np.sum(0.5 * (pts[:, 1] + nxt[:, 1]) * dqs))
    if grid.n_x > 1:
        g_here = ham.potential.dv_dx(pts[:, 0], pts[:, 2])
        g_next = ham.potential.dv_dx(nxt[:, 0], nxt[:, 2])
        dxs = _minimal_image(nxt[:, 2] - pts[:, 2], grid.L_x)
        drive = float(np.sum(0.5 * (g_here + g_next) * dxs))
    else:
        drive = 0.0
    return circulation, drive


def _degenerate_loop(grid: Grid, pts: np.ndarray) -> bool:
    """True when non-adjacent vertices nearly collide (proxy for a
    self-crossing of the advected loop)."""
    n = pts.shape[0]
    lengths = np.array([grid.L_q, grid.L_p, grid.L_x])
    diff = _minimal_image(pts[:, None, :] - pts[None, :, :], lengths)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    edges = np.diagonal(dist, offset=1).tolist() + [dist[-1, 0]]
    scale = float(np.median(edges))
    idx = np.arange(n)
    sep = np.minimum((idx[:, None] - idx[None, :]) % n,
                     (idx[None, :] - idx[:, None]) % n)
    nonadjacent = sep >= 2
    if not np.any(nonadjacent):
        return False
    return bool(np.min(dist[nonadjacent]) < 0.25 * scale)


@dataclass
class LoopRateResult:
    """Centered-difference circulation rate vs the drive integral.

    times: interior path times; lhs: d/dt of loop-int p dq by centered
    differences; rhs: loop-int (dV/dx) dx at the same times; degenerate:
    per-time flag that the advected loop nearly self-crossed there.
    """

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    degenerate: np.ndarray

    @property
    def max_mismatch(self) -> float:
        scale = max(np.max(np.abs(self.lhs)), np.max(np.abs(self.rhs)), 1.0)
        return float(np.max(np.abs(self.lhs - self.rhs)) / scale)


def poincare_loop_rate(grid: Grid, times, velocities, loop, dt: float,
                       ham: HybridHamiltonian) -> LoopRateResult:
    """Advect a closed loop and compare both sides of the rate identity.

    The loop (>= 64 ordered vertices) is advected like any seed bundle;
    at each recorded time the circulation loop-int p dq (trapezoid over
    the cycle, minimal-image segment lengths) and the drive
    loop-int (dV/dx) dx are quadratures sharing nothing but the vertex
    positions.  Vertices that nearly collide after advection flag the
    time as degenerate rather than aborting.
    """
    loop = np.asarray(loop, dtype=float)
    if loop.ndim != 2 or loop.shape[1] != 3:
        raise ValueError("loop must have shape (n_vertices, 3)")
    if loop.shape[0] < 64:
        raise ValueError("loop must carry at least 64 vertices")
    ens = advect_trajectories(grid, times, velocities, loop, dt,
                              closed_loop=True)
    n_times = ens.paths.shape[0]
    circulation = np.empty(n_times)
    drive = np.empty(n_times)
    degenerate = np.zeros(n_times, dtype=bool)
    for k in range(n_times):
        circulation[k], drive[k] = _loop_integrals(grid, ham, ens.paths[k])
        degenerate[k] = _degenerate_loop(grid, ens.paths[k])
    lhs = (circulation[2:] - circulation[:-2]) / (2.0 * dt)
    return LoopRateResult(times=ens.times[1:-1], lhs=lhs,
                          rhs=drive[1:-1], degenerate=degenerate[1:-1])
