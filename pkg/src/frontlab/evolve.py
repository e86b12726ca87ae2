"""Time evolution of the reaction-advection-diffusion equation on a truncated
moving-window cylinder, with a comparison-principle-preserving explicit
scheme, plus discrete PDE residual evaluation for sub/supersolution
certification.

The scheme: forward Euler, conservative flux form for div(A grad u) with
face-averaged coefficients, first-order upwind advection, nodal reaction.
Under the stable_dt restriction the update map is non-decreasing in every
input value, which transfers the comparison principle to the discrete level
at machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .medium import CoefficientField, ReactionField

ADEQUACY_EPS = 1e-8      # window-adequacy margin threshold
RETRACT_EPS = 1e-9       # trailing cells frozen once this close to the fill
CLAMP_TOL = 1e-12        # out-of-[0,1] excursions beyond this are an error


class InstabilityError(RuntimeError):
    def __init__(self, index, value):
        super().__init__(f"solution left [0,1] at cell {index} (value {value!r})")
        self.index = index
        self.value = value


# ---------------------------------------------------------------------------
# grid sampling of coefficients and reactions
# ---------------------------------------------------------------------------

def periodic_interp(samples: np.ndarray, period: float, x) -> np.ndarray:
    """Linear interpolation of periodic cell samples at positions x."""
    n = samples.size
    h = period / n
    t = np.asarray(x, dtype=float) / h
    i0 = np.floor(t).astype(int)
    fr = t - i0
    return (1.0 - fr) * samples[i0 % n] + fr * samples[(i0 + 1) % n]


def periodic_interp2(samples: np.ndarray, period: float, x, y) -> np.ndarray:
    n, m = samples.shape
    hx = period / n
    hy = 1.0 / m
    tx = np.asarray(x, dtype=float) / hx
    ty = np.asarray(y, dtype=float) / hy
    i0 = np.floor(tx).astype(int)
    j0 = np.floor(ty).astype(int)
    fx = tx - i0
    fy = ty - j0
    i1, j1 = (i0 + 1) % n, (j0 + 1) % m
    i0, j0 = i0 % n, j0 % m
    return ((1 - fx) * (1 - fy) * samples[i0, j0] + fx * (1 - fy) * samples[i1, j0]
            + (1 - fx) * fy * samples[i0, j1] + fx * fy * samples[i1, j1])


def _faces_1d(coeffs: CoefficientField, x0: float, dx: float, n: int) -> np.ndarray:
    xf = x0 + (np.arange(n + 1) - 0.5) * dx
    return periodic_interp(coeffs.a11, coeffs.period_p, xf)


def _tables_2d(coeffs: CoefficientField, x0: float, dx: float, n: int, ny: int):
    dy = 1.0 / ny
    ys = np.arange(ny) * dy
    xf = x0 + (np.arange(n + 1) - 0.5) * dx
    xn = x0 + np.arange(n) * dx
    yf = (np.arange(ny) - 0.5) * dy
    XF, Y = np.meshgrid(xf, ys, indexing="ij")
    afx = periodic_interp2(coeffs.a11, coeffs.period_p, XF, Y)
    XN, YF = np.meshgrid(xn, yf, indexing="ij")
    afy = periodic_interp2(coeffs.a22, coeffs.period_p, XN, YF)
    XN, Y = np.meshgrid(xn, ys, indexing="ij")
    qx = periodic_interp2(coeffs.q1, coeffs.period_p, XN, Y)
    qy = periodic_interp2(coeffs.q2, coeffs.period_p, XN, Y)
    return afx, afy, qx, qy


ReactionLike = Union[ReactionField, Callable]


def _reaction_table(reaction: ReactionLike, xs: np.ndarray):
    """(ubreaks, rates, slopes) tables on the solver grid.

    Callables f(xs, u) are tabulated exactly at 129 breakpoints for the
    kernels (tests use linear-in-u reactions, which tabulation preserves)."""
    if isinstance(reaction, ReactionField):
        ub = reaction.ubreaks
        rates = reaction.rates_on_grid(xs)
    else:
        ub = np.linspace(0.0, 1.0, 129)
        rates = np.empty((xs.size, ub.size))
        for j, u in enumerate(ub):
            rates[:, j] = reaction(xs, np.full(xs.size, u))
    slopes = np.ascontiguousarray(np.diff(rates, axis=1) / np.diff(ub)[None, :])
    if rates.shape[0] and np.all(rates == rates[0]):
        # homogeneous reaction: single-row tables, stride-0 indexing
        return ub, np.ascontiguousarray(rates[:1]), slopes[:1], 0
    return ub, np.ascontiguousarray(rates), slopes, rates.shape[0] and 1


# ---------------------------------------------------------------------------
# states, snapshots, trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolutionState:
    """Grid function on a truncated window with boundary fill values.

    Nodes sit at x0 + i*dx.  In 2-d, values has shape (n, ny) with transverse
    nodes j/ny on the unit torus.
    """
    time: float
    x0: float
    dx: float
    values: np.ndarray
    left_fill: float
    right_fill: float
    dim: int = 1
    dt: Optional[float] = None
    steps_done: int = 0
    active: Optional[tuple] = None    # (i_lo, i_hi) window bookkeeping for resume

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if not (0.0 <= self.left_fill <= 1.0 and 0.0 <= self.right_fill <= 1.0):
            raise ValueError("fill values must lie in [0,1]")
        if v.min() < -CLAMP_TOL or v.max() > 1.0 + CLAMP_TOL:
            raise ValueError("state values must lie in [0,1]")
        if (self.dim == 1) != (v.ndim == 1):
            raise ValueError("value array rank must match dim")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def window(self) -> tuple:
        return (self.x0, self.x0 + (self.n - 1) * self.dx)

    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    def profile(self) -> np.ndarray:
        """Transverse max in 2-d, the values themselves in 1-d."""
        return self.values if self.dim == 1 else self.values.max(axis=1)


def state_from_function(fn, x_lo: float, x_hi: float, dx: float,
                        left_fill: float, right_fill: float, dim: int = 1,
                        ny: int = 1, time: float = 0.0, dt: Optional[float] = None) -> SolutionState:
    n = int(round((x_hi - x_lo) / dx)) + 1
    xs = x_lo + dx * np.arange(n)
    if dim == 1:
        vals = np.clip(np.asarray(fn(xs), dtype=float), 0.0, 1.0)
    else:
        ys = np.arange(ny) / ny
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        vals = np.clip(np.asarray(fn(X, Y), dtype=float), 0.0, 1.0)
    return SolutionState(time, x_lo, dx, vals, left_fill, right_fill, dim, dt)


@dataclass(frozen=True)
class Snapshot:
    time: float
    x0: float
    dx: float
    values: np.ndarray
    left_fill: float
    right_fill: float

    @property
    def dim(self) -> int:
        return self.values.ndim

    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.shape[0])

    def profile(self) -> np.ndarray:
        return self.values if self.values.ndim == 1 else self.values.max(axis=1)

    def value_on(self, xq: np.ndarray) -> np.ndarray:
        """Profile values at query positions, extended by the fills."""
        prof = self.profile()
        xs = self.xs()
        return np.interp(xq, xs, prof, left=self.left_fill, right=self.right_fill)


def interpolate_snapshots(a: Snapshot, b: Snapshot, t: float) -> Snapshot:
    """Linear time interpolation between two bracketing snapshots."""
    if not a.time <= t <= b.time:
        raise ValueError("t outside the snapshot bracket")
    if b.time == a.time:
        return a
    w = (t - a.time) / (b.time - a.time)
    if a.values.shape == b.values.shape and a.x0 == b.x0:
        vals = (1 - w) * a.values + w * b.values
        return Snapshot(t, a.x0, a.dx, vals, a.left_fill, a.right_fill)
    if a.dim != 1:
        raise ValueError("window changed shape between 2-d snapshots")
    vals = (1 - w) * a.value_on(b.xs()) + w * b.profile()
    return Snapshot(t, b.x0, b.dx, vals, b.left_fill, b.right_fill)


class Trajectory:
    """Time-ordered snapshots with linear interpolation in t."""

    def __init__(self, snapshots: Sequence[Snapshot] = ()):
        self.snapshots = list(snapshots)

    def append(self, s: Snapshot):
        if self.snapshots and s.time <= self.snapshots[-1].time:
            raise ValueError("snapshot times must increase strictly")
        self.snapshots.append(s)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def t_range(self) -> tuple:
        return (self.snapshots[0].time, self.snapshots[-1].time)

    def at(self, t: float) -> Snapshot:
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"time {t} outside the recorded range {ts[0]}..{ts[-1]}")
        j = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        return interpolate_snapshots(self.snapshots[j], self.snapshots[j + 1],
                                     float(np.clip(t, ts[0], ts[-1])))

    def values_on(self, t: float, xq: np.ndarray) -> np.ndarray:
        return self.at(t).value_on(xq)


@dataclass
class Recorder:
    """Snapshot/diagnostics collector at strictly increasing sample times."""
    sample_times: np.ndarray
    storage: str = "full"                       # "full" | "diagnostics-only"
    diagnostics_fn: Optional[Callable] = None   # Snapshot -> row
    trajectory: Trajectory = dc_field(default_factory=Trajectory)
    rows: list = dc_field(default_factory=list)

    def __post_init__(self):
        ts = np.asarray(self.sample_times, dtype=float)
        if ts.size and np.any(np.diff(ts) <= 0):
            raise ValueError("sample times must increase strictly")
        self.sample_times = ts
        if self.storage not in ("full", "diagnostics-only"):
            raise ValueError("storage policy must be 'full' or 'diagnostics-only'")

    def take(self, snap: Snapshot):
        if self.storage == "full":
            self.trajectory.append(snap)
        if self.diagnostics_fn is not None:
            self.rows.append(self.diagnostics_fn(snap))


# ---------------------------------------------------------------------------
# time step restriction
# ---------------------------------------------------------------------------

def stable_dt(coeffs: CoefficientField, field: ReactionField, dx: float,
              dy: Optional[float] = None) -> float:
    """Largest monotone step, halved for margin:
    dt = 0.5 / (2 A_upper d / h^2 + max|q| / h + K)   with h = min(dx, dy)."""
    if dx <= 0:
        raise ValueError("dx must be positive")
    h = dx if (dy is None or coeffs.dim == 1) else min(dx, dy)
    a_hi = coeffs.ellipticity[1]
    k = field.lipschitz_K
    q = coeffs.max_advection()
    return 0.5 / (2.0 * a_hi * coeffs.dim / h ** 2 + q / h + k)


# ---------------------------------------------------------------------------
# simulation driver
# ---------------------------------------------------------------------------

class Simulation:
    """Owns the global buffers for one evolution; single-worker use only."""

    def __init__(self, state: SolutionState, coeffs: CoefficientField,
                 field: ReactionField, *, t_hint: Optional[float] = None,
                 track_left: Optional[bool] = None, track_right: bool = True,
                 margin_len: float = 10.0, full_every: int = 512,
                 speed_bound: Optional[float] = None):
        if coeffs.dim != state.dim:
            raise ValueError("state and coefficients disagree on the dimension")
        self.coeffs = coeffs
        self.field = field
        self.dim = state.dim
        self.dx = state.dx
        self.ny = 1 if state.dim == 1 else state.values.shape[1]
        self.dy = 1.0 / self.ny
        self.dt = state.dt if state.dt else stable_dt(coeffs, field, state.dx, self.dy)
        if self.dt > stable_dt(coeffs, field, state.dx, self.dy) * (1 + 1e-12):
            raise ValueError("dt exceeds the monotone stability bound")
        self.left_fill = state.left_fill
        self.right_fill = state.right_fill
        self.t_start = state.time - state.steps_done * self.dt
        self.steps = state.steps_done
        self.extra_time = 0.0      # set after a partial landing step
        self.margin = max(2, int(np.ceil(margin_len / state.dx)))
        self.chunk = max(1, self.margin // 2)
        self.full_every = full_every
        self.min_increment = np.inf
        if track_left is None:
            track_left = state.left_fill == state.right_fill
        self.track_left = track_left
        self.track_right = track_right

        if speed_bound is None:
            xi = field.upper.sup_rate_over_u()
            speed_bound = 2.0 * np.sqrt(coeffs.ellipticity[1] * max(xi, 1e-6)) \
                + coeffs.max_advection()
        horizon = max(t_hint - state.time, 0.0) if t_hint else 0.0
        sweep = 1.3 * speed_bound * horizon + 2.0 * margin_len + 4.0
        left_room = sweep if self.track_left else margin_len + 2.0
        right_room = sweep if self.track_right else margin_len + 2.0
        self._allocate(state, left_room, right_room)

    # -- buffers -----------------------------------------------------------

    def _allocate(self, state: SolutionState, left_room: float, right_room: float):
        dx = self.dx
        pad_l = int(np.ceil(left_room / dx)) + 2
        pad_r = int(np.ceil(right_room / dx)) + 2
        n_state = state.n
        N = pad_l + n_state + pad_r
        self.x0g = state.x0 - pad_l * dx
        if self.dim == 1:
            u = np.full(N, self.left_fill)
            u[pad_l + n_state:] = self.right_fill
            u[pad_l:pad_l + n_state] = state.values
        else:
            u = np.full((N, self.ny), self.left_fill)
            u[pad_l + n_state:, :] = self.right_fill
            u[pad_l:pad_l + n_state, :] = state.values
        self.u = u
        self.rowbuf = np.zeros((2, self.ny))
        self._sample_tables()
        if state.active is not None:
            lo, hi = state.active
            self.bnd = np.array([pad_l + lo, pad_l + hi, -1], dtype=np.int64)
        else:
            # derive the active range from the values by the kernel's own rule
            prof = u if self.dim == 1 else u.max(axis=1)
            prof_min = u if self.dim == 1 else u.min(axis=1)
            trigger = 0.5 * ADEQUACY_EPS
            dev_l = np.maximum(np.abs(prof - self.left_fill),
                               np.abs(prof_min - self.left_fill)) > trigger
            dev_r = np.maximum(np.abs(prof - self.right_fill),
                               np.abs(prof_min - self.right_fill)) > trigger
            if dev_l.any() or dev_r.any():
                f_lo = int(np.argmax(dev_l)) if dev_l.any() else pad_l
                f_hi = int(N - 1 - np.argmax(dev_r[::-1])) if dev_r.any() else pad_l + n_state
                i0 = max(1, f_lo - self.margin)
                i1 = min(N - 1, f_hi + 1 + self.margin)
            else:
                i0, i1 = pad_l, pad_l + n_state
            self.bnd = np.array([i0, i1, -1], dtype=np.int64)
        self.export_lo = int(self.bnd[0])

    def _sample_tables(self):
        N = self.u.shape[0]
        xs = self.x0g + self.dx * np.arange(N)
        self.ub, self.rates, self.slopes, self.rstride = _reaction_table(self.field, xs)
        if self.dim == 1:
            self.aface = _faces_1d(self.coeffs, self.x0g, self.dx, N)
        else:
            self.afx, self.afy, self.qx, self.qy = _tables_2d(
                self.coeffs, self.x0g, self.dx, N, self.ny)

    def _regrow(self, side: int):
        """Extend the buffer on the exhausted side and re-sample tables."""
        grow = max(self.chunk * 8, self.u.shape[0] // 2)
        dx = self.dx
        if self.dim == 1:
            pad = np.full(grow, self.right_fill if side == _kernels.NEED_RIGHT else self.left_fill)
            if side == _kernels.NEED_RIGHT:
                self.u = np.concatenate([self.u, pad])
            else:
                self.u = np.concatenate([pad, self.u])
        else:
            pad = np.full((grow, self.ny),
                          self.right_fill if side == _kernels.NEED_RIGHT else self.left_fill)
            axis_cat = np.concatenate
            if side == _kernels.NEED_RIGHT:
                self.u = axis_cat([self.u, pad], axis=0)
            else:
                self.u = axis_cat([pad, self.u], axis=0)
        if side == _kernels.NEED_LEFT:
            self.x0g -= grow * dx
            self.bnd[0] += grow
            self.bnd[1] += grow
            self.export_lo += grow
        self._sample_tables()

    # -- stepping ----------------------------------------------------------

    @property
    def time(self) -> float:
        return self.t_start + self.steps * self.dt + self.extra_time

    def _kernel(self, nsteps: int, dt: float):
        if self.dim == 1:
            return _kernels.advance_1d(
                self.u, self.aface, self.ub, self.rates, self.slopes,
                self.rstride, self.dx, dt, nsteps, self.bnd, self.left_fill,
                self.right_fill, self.margin, self.chunk, self.full_every,
                self.track_left, self.track_right, CLAMP_TOL, ADEQUACY_EPS,
                RETRACT_EPS, self.steps)
        return _kernels.advance_2d(
            self.u, self.rowbuf, self.afx, self.afy, self.qx, self.qy, self.ub,
            self.rates, self.slopes, self.rstride, self.dx, self.dy, dt, nsteps,
            self.bnd, self.left_fill, self.right_fill, self.margin, self.chunk,
            self.full_every, self.track_left, self.track_right, CLAMP_TOL,
            ADEQUACY_EPS, RETRACT_EPS, self.steps)

    def advance_steps(self, nsteps: int):
        remaining = nsteps
        while remaining > 0:
            status, min_inc, done = self._kernel(remaining, self.dt)
            self.steps += done
            remaining -= done
            if min_inc < self.min_increment:
                self.min_increment = min_inc
            if status == _kernels.OK:
                continue
            if status == _kernels.OUT_OF_RANGE:
                i = int(self.bnd[2])
                val = self.u.ravel()[i] if self.dim == 1 else self.u[i // self.ny, i % self.ny]
                raise InstabilityError(i, float(val))
            self._regrow(status)

    def advance_to(self, t_end: float):
        """Whole steps to the last grid time <= t_end, then one shorter
        landing step if needed so the state time equals t_end exactly."""
        if t_end < self.time - 1e-12:
            raise ValueError("cannot advance backward")
        n = int(np.floor((t_end - self.time) / self.dt + 1e-9))
        self.advance_steps(n)
        rem = t_end - self.time
        if rem > 1e-12 * max(1.0, self.dt):
            status, min_inc, _ = self._kernel(1, rem)
            if status == _kernels.OUT_OF_RANGE:
                raise InstabilityError(int(self.bnd[2]), None)
            if min_inc < self.min_increment:
                self.min_increment = min_inc
            self.extra_time += rem

    # -- export ------------------------------------------------------------

    def snapshot(self) -> Snapshot:
        lo, hi = self.export_lo, int(self.bnd[1])
        return Snapshot(self.time, self.x0g + lo * self.dx, self.dx,
                        self.u[lo:hi].copy(), self.left_fill, self.right_fill)

    def current_state(self) -> SolutionState:
        lo, hi = self.export_lo, int(self.bnd[1])
        return SolutionState(self.time, self.x0g + lo * self.dx, self.dx,
                             self.u[lo:hi].copy(), self.left_fill,
                             self.right_fill, self.dim, self.dt,
                             steps_done=self.steps,
                             active=(int(self.bnd[0]) - lo, hi - lo))


def step(state: SolutionState, coeffs: CoefficientField,
         field: ReactionField) -> SolutionState:
    """One forward-Euler step (window shifted by whole cells if threatened)."""
    sim = Simulation(state, coeffs, field, t_hint=state.time)
    sim.advance_steps(1)
    return sim.current_state()


def run(state: SolutionState, coeffs: CoefficientField, field: ReactionField,
        t_end: float, recorder: Optional[Recorder] = None, **sim_kwargs):
    """Advance to t_end, recording at the recorder's sample times (snapshots
    interpolated linearly in time for off-grid samples).  Deterministic."""
    if t_end < state.time:
        raise ValueError("t_end must not precede the state time")
    sim = Simulation(state, coeffs, field, t_hint=t_end, **sim_kwargs)
    if recorder is not None:
        for ts in recorder.sample_times:
            if ts < state.time - 1e-12 or ts > t_end + 1e-12:
                raise ValueError("sample time outside the run interval")
            n_before = int(np.floor((ts - sim.time) / sim.dt + 1e-9))
            sim.advance_steps(n_before)
            if abs(sim.time - ts) <= 1e-9 * max(1.0, sim.dt):
                recorder.take(sim.snapshot())
            else:
                prev = sim.snapshot()
                sim.advance_steps(1)
                recorder.take(interpolate_snapshots(prev, sim.snapshot(), ts))
    sim.advance_to(t_end)
    return sim.current_state(), recorder


# ---------------------------------------------------------------------------
# discrete residual certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    """Worst signed residual of a sub/supersolution candidate.

    ``worst`` is the residual normalized by max(1, |u|) at the worst smooth
    node, signed so that positive means violation for subsolutions and
    negative means violation for supersolutions."""
    sign: str
    worst: float
    worst_raw: float
    worst_index: tuple
    kink_ok: bool
    worst_kink_flux: float
    kink_indices: tuple
    n_smooth: int

    def admissible(self, tol: float) -> bool:
        if self.sign == "sub":
            return self.worst <= tol and self.kink_ok
        return self.worst >= -tol and self.kink_ok


def residual(candidate: np.ndarray, coeffs: CoefficientField,
             reaction: ReactionLike, sign: str, *, x0: float, dx: float,
             u_t: Optional[np.ndarray] = None,
             kink_nodes: Optional[Sequence[int]] = None,
             kink_threshold: Optional[float] = None,
             kink_flux_tol: Optional[float] = None) -> ResidualReport:
    """Evaluate r = u_t + q.grad u - div(A grad u) - f(x,u) with the same
    stencils as the stepper.

    Smooth interior nodes report the signed residual; at kink nodes (explicit
    ``kink_nodes`` or auto-detected by slope jumps) the distributional sign
    is checked through the diffusive flux jump: subsolutions admit convex
    kinks (flux jump up), supersolutions concave ones.
    """
    if sign not in ("sub", "super"):
        raise ValueError("sign must be 'sub' or 'super'")
    u = np.asarray(candidate, dtype=float)
    dim = u.ndim
    n = u.shape[0]
    xs = x0 + dx * np.arange(n)
    ub, rates, _slp, rstride = _reaction_table(reaction, xs)
    f_u = np.empty_like(u)
    for i in range(n):
        f_u[i] = np.interp(u[i], ub, rates[i * rstride])

    if dim == 1:
        aface = _faces_1d(coeffs, x0, dx, n)
        flux = aface[1:-1] * np.diff(u) / dx        # flux on interior faces
        divA = (flux[1:] - flux[:-1]) / dx          # at nodes 1..n-2
        fluxjump = (flux[1:] - flux[:-1]) * dx      # dx^2-scaled delta weight
        adv = np.zeros(n - 2)
        s_left = np.diff(u)[:-1] / dx
        s_right = np.diff(u)[1:] / dx
        slope_jump = np.abs(s_right - s_left)
        slope_scale = np.abs(s_left) + np.abs(s_right)
    else:
        ny = u.shape[1]
        dy = 1.0 / ny
        afx, afy, qx, qy = _tables_2d(coeffs, x0, dx, n, ny)
        fx = afx[1:-1] * np.diff(u, axis=0) / dx
        divx = (fx[1:] - fx[:-1]) / dx
        up = np.roll(u, -1, axis=1)
        um = np.roll(u, 1, axis=1)
        fy_hi = np.roll(afy, -1, axis=1) * (up - u) / dy
        fy_lo = afy * (u - um) / dy
        divy = ((fy_hi - fy_lo) / dy)[1:-1]
        divA = divx + divy
        fluxjump = (fx[1:] - fx[:-1]) * dx + ((fy_hi - fy_lo) * dy)[1:-1]
        qxc = qx[1:-1]
        dudx_up = np.where(qxc > 0, (u[1:-1] - u[:-2]) / dx, (u[2:] - u[1:-1]) / dx)
        qyc = qy[1:-1]
        dudy_up = np.where(qyc > 0, ((u - um) / dy)[1:-1], ((up - u) / dy)[1:-1])
        adv = qxc * dudx_up + qyc * dudy_up
        sl2 = np.diff(u, axis=0)[:-1] / dx
        sr2 = np.diff(u, axis=0)[1:] / dx
        slope_jump = np.abs(sr2 - sl2).max(axis=1)
        slope_scale = (np.abs(sl2) + np.abs(sr2)).max(axis=1)

    ut = np.zeros_like(divA) if u_t is None else np.asarray(u_t, dtype=float)[1:-1]
    r = ut + adv - divA - f_u[1:-1]
    scale = np.maximum(1.0, np.abs(u[1:-1]))
    if dim == 2:
        scale = scale.max(axis=1)
        r_node = r / np.maximum(1.0, np.abs(u[1:-1]))
        r = r_node.max(axis=1) if sign == "sub" else r_node.min(axis=1)
        r_raw_rows = r
    else:
        r = r / scale
        r_raw_rows = r * scale

    if kink_nodes is None:
        # a kink is a slope jump comparable to the slope scale itself;
        # smooth nodes only change slope by O(dx * u'')
        thr = kink_threshold if kink_threshold is not None else 2.0 * dx
        kinks = np.nonzero((slope_jump > thr)
                           & (slope_jump > 0.4 * slope_scale))[0] + 1
    else:
        kinks = np.asarray([k for k in kink_nodes if 1 <= k < n - 1], dtype=int)
    kink_set = set(int(k) for k in kinks)
    smooth = np.array([i for i in range(1, n - 1) if i not in kink_set], dtype=int)

    if smooth.size:
        vals = r[smooth - 1]
        j = int(np.argmax(vals)) if sign == "sub" else int(np.argmin(vals))
        worst = float(vals[j])
        widx = int(smooth[j])
        if dim == 1:
            worst_raw = float(r_raw_rows[widx - 1])
            widx_t = (widx,)
        else:
            worst_raw = worst
            widx_t = (widx,)
    else:
        worst, worst_raw, widx_t = (-np.inf if sign == "sub" else np.inf), 0.0, (-1,)

    ftol = kink_flux_tol if kink_flux_tol is not None else 2.0 * coeffs.ellipticity[1] * dx ** 2
    kink_ok = True
    worst_kf = np.inf if sign == "sub" else -np.inf
    for k in kink_set:
        jf = fluxjump[k - 1]
        jf = float(np.min(jf)) if np.ndim(jf) else float(jf)
        if sign == "sub":
            worst_kf = min(worst_kf, jf)
            if jf < -ftol:
                kink_ok = False
        else:
            jf_hi = fluxjump[k - 1]
            jf_hi = float(np.max(jf_hi)) if np.ndim(jf_hi) else float(jf_hi)
            worst_kf = max(worst_kf, jf_hi)
            if jf_hi > ftol:
                kink_ok = False
    if not kink_set:
        worst_kf = 0.0
    return ResidualReport(sign, worst, worst_raw, widx_t, kink_ok, worst_kf,
                          tuple(sorted(kink_set)), int(smooth.size))


# ---------------------------------------------------------------------------
# window adequacy and batched comparison probes
# ---------------------------------------------------------------------------

def window_adequacy(state: SolutionState, margin_len: float) -> dict:
    """Check |u - fill| < 1e-8 within margin_len of each window edge."""
    prof = state.profile()
    xs = state.xs()
    left = prof[xs <= state.x0 + margin_len]
    right = prof[xs >= state.window[1] - margin_len]
    ldev = float(np.max(np.abs(left - state.left_fill))) if left.size else 0.0
    rdev = float(np.max(np.abs(right - state.right_fill))) if right.size else 0.0
    return {"left_dev": ldev, "right_dev": rdev,
            "ok": ldev < ADEQUACY_EPS and rdev < ADEQUACY_EPS}


def comparison_slack(coeffs: CoefficientField, field: ReactionField, *,
                     n_pairs: int, n_steps: int, nx: int, dx: float,
                     seed: int, fills: tuple = (1.0, 0.0), ny: int = 8) -> float:
    """Evolve n_pairs random ordered pairs for n_steps and return the worst
    pointwise ordering slack min(v - u) (>= -1e-12 for a monotone scheme)."""
    rng = np.random.default_rng(seed)
    dt = stable_dt(coeffs, field, dx, 1.0 / ny)
    if coeffs.dim == 1:
        U = np.empty((2 * n_pairs, nx))
        lowers = rng.random((n_pairs, nx))
        uppers = np.maximum(lowers, rng.random((n_pairs, nx)))
        U[0::2] = lowers
        U[1::2] = uppers
        U[:, 0] = fills[0]
        U[:, -1] = fills[1]
        xs = dx * np.arange(nx)
        ub, rates, slopes, rstride = _reaction_table(field, xs)
        aface = _faces_1d(coeffs, 0.0, dx, nx)
        status, slack = _kernels.batch_compare_1d(U, aface, ub, rates, slopes,
                                                  rstride, dx, dt, n_steps, CLAMP_TOL)
    else:
        U = np.empty((2 * n_pairs, nx, ny))
        lowers = rng.random((n_pairs, nx, ny))
        uppers = np.maximum(lowers, rng.random((n_pairs, nx, ny)))
        U[0::2] = lowers
        U[1::2] = uppers
        U[:, 0, :] = fills[0]
        U[:, -1, :] = fills[1]
        xs = dx * np.arange(nx)
        ub, rates, slopes, rstride = _reaction_table(field, xs)
        afx, afy, qx, qy = _tables_2d(coeffs, 0.0, dx, nx, ny)
        status, slack = _kernels.batch_compare_2d(U, np.zeros((2, ny)), afx, afy,
                                                  qx, qy, ub, rates, slopes,
                                                  rstride, dx, 1.0 / ny, dt,
                                                  n_steps, CLAMP_TOL)
    if status != _kernels.OK:
        raise InstabilityError(-1, None)
    return float(slack)
