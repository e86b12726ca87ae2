"""Front machinery: certified subsolution construction, the launch-and-limit
front pipeline, interface diagnostics (ignited edge X, envelope offset Y,
level edges Z), the independent 1-d shooting oracle for the homogeneous front
speed, time-shift distances, pulsating periodicity defects, and spreading
certification.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .cell import (EigenSolution, ExpProfile, KappaEvaluator, SpeedSolution,
                   build_profile, min_speed, principal_eigen, solve_corrector,
                   zeta_for_speed)
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .evolve import (Recorder, Simulation, Snapshot, SolutionState, Trajectory,
                     periodic_interp, periodic_interp2, residual, run,
                     stable_dt, state_from_function)
from .medium import (CoefficientField, ReactionField, ReactionProfile,
                     alpha_on_grid, check_hypotheses, check_majorizes,
                     homogeneous_field, majorant_floor, smallest_rate_root)


class FrontGateError(RuntimeError):
    """A precondition of the front pipeline failed (hypotheses, majorization,
    or the linearized-speed gate)."""


class SubsolutionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# the concave cap rho and the certified subsolution
# ---------------------------------------------------------------------------

def _rho_params(theta: float, theta_tilde: float):
    """Piecewise-quadratic concave cap: identity up to m = (theta+tt)/2, slope
    falling 1 -> delta on [m, m+w], delta -> 0 on [m+w, 1], constant above."""
    m = 0.5 * (theta + theta_tilde)
    height = theta_tilde - m
    w = height
    delta = height / (1.0 - m)
    return m, w, delta


def _rho(v, theta: float, theta_tilde: float):
    m, w, delta = _rho_params(theta, theta_tilde)
    v = np.asarray(v, dtype=float)
    out = np.clip(v, 0.0, None)
    out = np.where(v > m, m + (v - m) - (1.0 - delta) * (v - m) ** 2 / (2 * w), out)
    mid = m + w + 0.5 * w * (1.0 + delta) - m - w   # rho(m+w) - (m+w) offset helper
    rho_mw = m + w * (1.0 + delta) / 2.0
    tail = rho_mw + delta * (v - m - w) - delta * (v - m - w) ** 2 / (2 * (1.0 - m - w))
    out = np.where(v > m + w, tail, out)
    return np.where(v >= 1.0, theta_tilde, out)


def _rho_curvature(theta: float, theta_tilde: float) -> float:
    m, w, delta = _rho_params(theta, theta_tilde)
    return max((1.0 - delta) / w, delta / (1.0 - m - w))


@dataclass(frozen=True)
class Subsolution:
    """A stationary subsolution v with plateau value theta_tilde, certified by
    the discrete residual evaluator at its construction resolution."""
    values: np.ndarray
    x0: float
    dx: float
    theta_tilde: float
    side: str                    # "left" | "compact"
    epsilon_used: float
    support: tuple
    plateau: tuple
    dim: int = 1
    worst_residual: float = 0.0

    def xs(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.shape[0])

    def as_state(self, left_fill: Optional[float] = None, right_fill: float = 0.0,
                 dt: Optional[float] = None, shift: float = 0.0) -> SolutionState:
        """Launch state; the left fill defaults to the plateau value for
        left-supported data (continuous glue keeps the launch a subsolution
        of the truncated problem) and 0 for compact data."""
        if left_fill is None:
            left_fill = self.theta_tilde if self.side == "left" else 0.0
        return SolutionState(0.0, self.x0 + shift, self.dx, self.values.copy(),
                             left_fill, right_fill, self.dim, dt)

    def sampled_on(self, xq: np.ndarray, shift: float = 0.0) -> np.ndarray:
        prof = self.values if self.dim == 1 else self.values.max(axis=1)
        return np.interp(xq, self.xs() + shift, prof, left=prof[0], right=0.0)


def _level_crossing_nodes(arg: np.ndarray, levels) -> list:
    """Indices straddling any level crossing of a (transverse-max) profile."""
    prof = arg if arg.ndim == 1 else arg.max(axis=1)
    prof_min = arg if arg.ndim == 1 else arg.min(axis=1)
    nodes = set()
    for lev in levels:
        for p in (prof, prof_min):
            d = p - lev
            hits = np.nonzero(d[:-1] * d[1:] <= 0.0)[0]
            for i in hits:
                nodes.update((int(i), int(i) + 1))
    return sorted(nodes)


def _grid_corrector(coeffs: CoefficientField, dx: float, ny: Optional[int],
                    direction: int) -> np.ndarray:
    """Zero-mean periodic corrector solved on the evolution grid with the
    evolution stencils (flux-form diffusion, upwind advection), so that
    eps (corrector - x1) is exactly harmonic for the discrete stepper."""
    p = coeffs.period_p
    n = int(round(p / dx))
    if abs(p / dx - n) > 1e-9 or n < 3:
        raise ValueError("the cell period must be a whole number of grid steps")
    s = float(direction)
    if coeffs.dim == 1:
        xf = (np.arange(n + 1) - 0.5) * dx
        af = periodic_interp(coeffs.a11, p, xf)
        idx = np.arange(n)
        right = (idx + 1) % n
        left = (idx - 1) % n
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([idx, right, left])
        vals = np.concatenate([(af[1:] + af[:-1]) / dx ** 2,
                               -af[1:] / dx ** 2, -af[:-1] / dx ** 2])
        E = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        rhs = -s * (af[1:] - af[:-1]) / dx
        N = n
    else:
        if np.max(np.abs(coeffs.a12)) > 0:
            raise ValueError("the monotone stepper needs diagonal diffusion in 2-d")
        nyy = ny
        dy = 1.0 / nyy
        xf = (np.arange(n + 1) - 0.5) * dx
        xn = np.arange(n) * dx
        yn = np.arange(nyy) * dy
        yf = (np.arange(nyy) - 0.5) * dy
        XF, Y = np.meshgrid(xf, yn, indexing="ij")
        afx = periodic_interp2(coeffs.a11, p, XF, Y)
        XN, YF = np.meshgrid(xn, yf, indexing="ij")
        afy = periodic_interp2(coeffs.a22, p, XN, YF)
        XN, Y = np.meshgrid(xn, yn, indexing="ij")
        qx = periodic_interp2(coeffs.q1, p, XN, Y)
        qy = periodic_interp2(coeffs.q2, p, XN, Y)
        N = n * nyy
        rows, cols, vals = [], [], []

        def add(i, j, i2, j2, v):
            rows.append(i * nyy + j)
            cols.append((i2 % n) * nyy + (j2 % nyy))
            vals.append(v)

        for i in range(n):
            for j in range(nyy):
                ae, aw = afx[i + 1, j], afx[i, j]
                an_, as_ = afy[i, (j + 1) % nyy], afy[i, j]
                add(i, j, i, j, (ae + aw) / dx ** 2 + (an_ + as_) / dy ** 2)
                add(i, j, i + 1, j, -ae / dx ** 2)
                add(i, j, i - 1, j, -aw / dx ** 2)
                add(i, j, i, j + 1, -an_ / dy ** 2)
                add(i, j, i, j - 1, -as_ / dy ** 2)
                qv = qx[i, j]
                if qv > 0:
                    add(i, j, i, j, qv / dx)
                    add(i, j, i - 1, j, -qv / dx)
                elif qv < 0:
                    add(i, j, i + 1, j, qv / dx)
                    add(i, j, i, j, -qv / dx)
                qv = qy[i, j]
                if qv > 0:
                    add(i, j, i, j, qv / dy)
                    add(i, j, i, j - 1, -qv / dy)
                elif qv < 0:
                    add(i, j, i, j + 1, qv / dy)
                    add(i, j, i, j, -qv / dy)
        E = sp.csr_matrix((np.array(vals), (np.array(rows), np.array(cols))),
                          shape=(N, N))
        rhs = (s * (qx - (afx[1:] - afx[:-1]) / dx)).ravel()
    ones = np.ones(N)
    bordered = sp.bmat([[E, ones[:, None] / N], [ones[None, :] / N, None]],
                       format="csc")
    sol = spla.splu(bordered).solve(np.concatenate([rhs, [0.0]]))
    v = sol[:N] - np.mean(sol[:N])
    resid = float(np.max(np.abs(E @ v - rhs)))
    if resid > 1e-9 * max(1.0, np.max(np.abs(rhs))):
        raise SubsolutionError(f"grid corrector residual {resid:.3e} too large")
    return v if coeffs.dim == 1 else v.reshape(n, nyy)


def build_subsolution(coeffs: CoefficientField, f0: ReactionProfile,
                      theta_tilde: float, side: str = "left", *,
                      dx: float = 0.02, ny: Optional[int] = None,
                      plateau_len: float = 6.0, eps_start: float = 1.0,
                      eps_floor: float = 1e-6) -> Subsolution:
    """Build the stationary subsolution v = rho(eps (corrector - x1)) (side
    "left") or the compactly supported two-sided variant (side "compact"),
    decreasing eps by halving until the discrete residual certifies it.

    The corrector is re-solved on the evolution grid with the evolution
    stencils, which makes the certificate strict: the discrete residual must
    be nonpositive at every interior node up to the roundoff floor, and one
    forward-Euler step from v can then only move upward.
    """
    if f0.kind != "ignition":
        raise ValueError("subsolutions are built over an ignition profile")
    theta = f0.theta
    if not theta < theta_tilde < 1.0:
        raise ValueError("plateau height must lie in (theta, 1)")
    if side not in ("left", "compact"):
        raise ValueError("side must be 'left' or 'compact'")
    if coeffs.dim == 2:
        ny = ny or coeffs.a11.shape[1]

    corr_p = _grid_corrector(coeffs, dx, ny, +1)
    corr_m = _grid_corrector(coeffs, dx, ny, -1) if side == "compact" else None
    vrange = float(np.max(np.abs(corr_p))) + 1.0
    a_hi = coeffs.ellipticity[1]
    field0 = homogeneous_field(f0)
    n_cell = corr_p.shape[0]
    cert_tol = 1024.0 * np.finfo(float).eps * (a_hi / dx ** 2 + f0.lipschitz + 1.0)

    eps = eps_start
    last_report = None
    while eps >= eps_floor:
        if side == "left":
            x_lo = -(1.0 / eps) - plateau_len - vrange
            x_hi = vrange + 1.0
        else:
            x_lo = -(4.0 / eps) - vrange - 2.0
            x_hi = vrange + 2.0
        i_lo = int(np.floor(x_lo / dx))
        i_hi = int(np.ceil(x_hi / dx))
        n = i_hi - i_lo + 1
        xs = (i_lo + np.arange(n)) * dx
        cell_ix = (i_lo + np.arange(n)) % n_cell
        if coeffs.dim == 1:
            arg = eps * (corr_p[cell_ix] - xs)
            if side == "compact":
                arg = np.minimum(arg, eps * (corr_m[cell_ix] + xs) + 4.0)
        else:
            arg = eps * (corr_p[cell_ix, :] - xs[:, None])
            if side == "compact":
                arg = np.minimum(arg, eps * (corr_m[cell_ix, :] + xs[:, None]) + 4.0)

        vals = np.clip(_rho(arg, theta, theta_tilde), 0.0, theta_tilde)
        rep = residual(vals, coeffs, field0, "sub", x0=float(xs[0]), dx=dx,
                       kink_nodes=[])
        last_report = rep
        if rep.worst <= cert_tol:
            prof = arg if arg.ndim == 1 else arg.max(axis=1)
            sup_ix = np.nonzero(prof > 0.0)[0]
            plat_ix = np.nonzero(prof >= 1.0)[0]
            support = (float(xs[sup_ix[0]]), float(xs[sup_ix[-1]])) if sup_ix.size else (0.0, 0.0)
            plateau = (float(xs[plat_ix[0]]), float(xs[plat_ix[-1]])) if plat_ix.size else (0.0, 0.0)
            return Subsolution(vals, float(xs[0]), dx, theta_tilde, side, eps,
                               support, plateau, coeffs.dim, rep.worst)
        eps *= 0.5
    raise SubsolutionError(
        f"no eps above {eps_floor} certifies the subsolution at dx={dx} "
        f"(last worst residual {last_report.worst:.3e}); the ignition profile "
        f"is too weak on the cap interval at this resolution")


# ---------------------------------------------------------------------------
# interface diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    X: float
    Y: float
    Z_minus: dict
    Z_plus: dict
    width: dict


@dataclass
class FrontDiagnostics:
    zeta: float
    eps_list: tuple
    rows: list = dc_field(default_factory=list)

    def series(self, name: str, eps: Optional[float] = None) -> np.ndarray:
        if name in ("t", "X", "Y"):
            return np.array([getattr(r, name) for r in self.rows])
        return np.array([getattr(r, name)[eps] for r in self.rows])


def _interp_crossing(x_a, x_b, g_a, g_b):
    if g_a == g_b:
        return x_a
    return x_a + (x_b - x_a) * g_a / (g_a - g_b)


def diagnostics(snap: Snapshot, field: ReactionField, zeta: float,
                profile: ExpProfile, eps_list: Sequence[float],
                x_min: Optional[float] = None) -> DiagnosticsRow:
    """One diagnostics row: rightmost ignited point X, envelope offset Y
    (closed-form inversion of the exponential profile), and level edges
    Z_eps- / Z_eps+ with linear interpolation.

    Scans may be restricted to x >= x_min (compact two-front runs).
    """
    xs = snap.xs()
    vals = snap.values
    if x_min is not None:
        sel = xs >= x_min
        xs = xs[sel]
        vals = vals[sel]
    prof_hi = vals if snap.dim == 1 else vals.max(axis=1)
    prof_lo = vals if snap.dim == 1 else vals.min(axis=1)
    n = xs.size

    alpha = alpha_on_grid(field, zeta, xs)
    g = prof_hi - alpha
    X = -np.inf
    idx = np.nonzero(g >= 0.0)[0]
    if idx.size:
        i = int(idx[-1])
        X = xs[i] if i == n - 1 else _interp_crossing(xs[i], xs[i + 1], g[i], g[i + 1])

    # Y: smallest y with u <= scale * exp(-lam (x1 - y)) gamma(x) everywhere
    if snap.dim == 1:
        gam = profile.gamma_at(xs)
        umax = vals
    else:
        ys = np.arange(vals.shape[1]) / vals.shape[1]
        Xg, Yg = np.meshgrid(xs, ys, indexing="ij")
        gam = profile.gamma_at(Xg, Yg)
        umax = vals
    pos = umax > 0.0
    if np.any(pos):
        x1 = xs[:, None] * np.ones_like(gam) if umax.ndim == 2 else xs
        yvals = x1[pos] + np.log(umax[pos] / (profile.scale * gam[pos])) / profile.lam
        Y = float(np.max(yvals))
    else:
        Y = -np.inf

    zm, zp, wd = {}, {}, {}
    for eps in eps_list:
        h = prof_lo - (1.0 - eps)
        viol = np.nonzero(h < 0.0)[0]
        if viol.size == 0:
            zminus = xs[-1]
        else:
            i = int(viol[0])
            zminus = xs[0] if i == 0 else _interp_crossing(xs[i - 1], xs[i], h[i - 1], h[i])
        q = prof_hi - eps
        above = np.nonzero(q > 0.0)[0]
        if above.size == 0:
            zplus = -np.inf
        else:
            i = int(above[-1])
            zplus = xs[i] if i == n - 1 else _interp_crossing(xs[i], xs[i + 1], q[i], q[i + 1])
        zm[eps] = float(zminus)
        zp[eps] = float(zplus)
        wd[eps] = float(zplus - zminus)
    return DiagnosticsRow(snap.time, float(X), float(Y), zm, zp, wd)


def tail_decay_slope(snap: Snapshot, x_from: float, x_to: float) -> float:
    """Least-squares slope of log u over [x_from, x_to] (the leading tail)."""
    xs = snap.xs()
    prof = snap.profile()
    sel = (xs >= x_from) & (xs <= x_to) & (prof > 0.0)
    if np.count_nonzero(sel) < 4:
        return np.nan
    return float(np.polyfit(xs[sel], np.log(prof[sel]), 1)[0])


def fit_speed(times: np.ndarray, positions: np.ndarray,
              last_fraction: float = 0.5) -> tuple:
    """(slope, stderr) of a linear fit over the trailing fraction of a series."""
    t = np.asarray(times, dtype=float)
    z = np.asarray(positions, dtype=float)
    k = max(2, int(np.ceil(t.size * last_fraction)))
    t, z = t[-k:], z[-k:]
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, z, rcond=None)
    dof = max(1, t.size - 2)
    sig2 = float(res[0]) / dof if res.size else 0.0
    cov = sig2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(np.sqrt(max(cov[0, 0], 0.0)))


# ---------------------------------------------------------------------------
# homogeneous-front shooting oracle
# ---------------------------------------------------------------------------

@njit(cache=True)
def _shoot_tail_slack(ub, rates, slopes, theta, c, sigma, n_steps):
    """Integrate ds/dW = c - f(W)/s from W = 1-delta down to theta (RK4) and
    return s(theta) - c*theta; a crashed trajectory reports -c*theta."""
    delta = 1e-7
    W = 1.0 - delta
    s = sigma * delta
    h = (theta - W) / n_steps
    for _ in range(n_steps):
        if s <= 1e-300:
            return -c * theta
        # RK4 on ds/dW
        m = ub.size
        def f_at(wv):
            lo = 0
            hi = m - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if ub[mid] <= wv:
                    lo = mid
                else:
                    hi = mid
            return rates[lo] + slopes[lo] * (wv - ub[lo])
        k1 = c - f_at(W) / s
        s2 = s + 0.5 * h * k1
        if s2 <= 1e-300:
            return -c * theta
        k2 = c - f_at(W + 0.5 * h) / s2
        s3 = s + 0.5 * h * k2
        if s3 <= 1e-300:
            return -c * theta
        k3 = c - f_at(W + 0.5 * h) / s3
        s4 = s + h * k3
        if s4 <= 1e-300:
            return -c * theta
        k4 = c - f_at(W + h) / s4
        s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        W += h
    if s <= 0.0:
        return -c * theta
    return s - c * theta


def _shoot_once(prof: ReactionProfile, c: float, n_steps: int) -> float:
    beta = -(prof.rates[-1] - prof.rates[-2]) / (prof.ubreaks[-1] - prof.ubreaks[-2])
    if beta <= 0:
        raise ValueError("profile must decrease strictly at u = 1 for shooting")
    sigma = 0.5 * (-c + np.sqrt(c * c + 4.0 * beta))
    slopes = np.diff(prof.rates) / np.diff(prof.ubreaks)
    return _shoot_tail_slack(prof.ubreaks, prof.rates, slopes, prof.theta,
                             c, sigma, n_steps)


def shooting_speed(f0: ReactionProfile, tol: float = 1e-8,
                   c_max: float = 1024.0) -> float:
    """Unique front speed of the x-independent ignition problem via
    phase-plane shooting in the slope variable s(W) = -W'.

    Integrates from the unstable direction at W = 1 down to the ignition
    threshold; the exact exponential tail below threshold demands
    s(theta) = c*theta, and bisection on c locates the match.  The step count
    is doubled until the answer is stable to ``tol``.
    """
    if f0.kind != "ignition" or f0.theta <= 0:
        raise ValueError("the shooting oracle requires an ignition profile "
                         "with a positive threshold")

    def bisect(n_steps: int) -> float:
        lo = 1e-9
        hi = 1.0
        k = 0
        while _shoot_once(f0, hi, n_steps) > 0.0:
            hi *= 2.0
            k += 1
            if hi > c_max:
                raise RuntimeError("no speed bracket below the cap")
        while hi - lo > 0.1 * tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if _shoot_once(f0, mid, n_steps) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    n = 2048
    c_prev = bisect(n)
    for _ in range(7):
        n *= 2
        c_new = bisect(n)
        if abs(c_new - c_prev) <= 0.5 * tol * max(1.0, c_new):
            return c_new
        c_prev = c_new
    return c_prev


def c0_estimate(coeffs: CoefficientField, f0: ReactionProfile, **front_kwargs) -> float:
    """Front speed for the x-independent profile f0 under these coefficients.

    Constant scalar diffusion reduces to the shooting oracle with the
    diffusive rescaling c = sqrt(a) c_shoot; other media measure the speed
    from a direct spreading run.
    """
    if coeffs.is_identity() or (coeffs.dim == 1 and np.ptp(coeffs.a11) == 0.0):
        a = float(coeffs.a11.flat[0])
        return float(np.sqrt(a)) * shooting_speed(f0)
    return measured_front_speed(coeffs, homogeneous_field(f0), **front_kwargs)[0]


def default_zeta(coeffs: CoefficientField, field: ReactionField,
                 c0: Optional[float] = None) -> tuple:
    """The experiment default zeta = zeta_0 / 2 (zeta_0 from bisection on the
    linearized speed equalling c_0), with its majorization certificate."""
    if c0 is None:
        c0 = c0_estimate(coeffs, field.lower)
    zeta0 = zeta_for_speed(coeffs, c0)
    zeta = 0.5 * zeta0
    g = majorant_floor(field, zeta)
    chk = check_majorizes(field, zeta, g)
    if not chk.ok:
        raise FrontGateError(f"zeta = zeta_0/2 = {zeta} fails majorization: {chk.reason}")
    return zeta, zeta0, chk.witness


# ---------------------------------------------------------------------------
# front construction pipeline
# ---------------------------------------------------------------------------

@dataclass
class FrontEstimate:
    s_grid: np.ndarray
    xq: np.ndarray
    frames: np.ndarray            # (len(s_grid), len(xq)) for the deepest launch
    tau_n: list
    n_used: int
    cauchy_gap: float
    cauchy_gaps: list
    trajectory: Trajectory        # recorded run of the deepest launch
    speed: SpeedSolution
    eig: EigenSolution
    profile: ExpProfile
    zeta: float
    theta: float
    subsolution: Subsolution


def _monitor_value(snap: Snapshot, x: float) -> float:
    i = int(round((x - snap.x0) / snap.dx))
    i = min(max(i, 0), snap.values.shape[0] - 1)
    return float(snap.values[i]) if snap.dim == 1 else float(snap.values[i, 0])


def evolve_recording(state: SolutionState, coeffs: CoefficientField,
                     field: ReactionField, *, rec_dt: float, t_cap: float,
                     stop: Optional[Callable[[Trajectory], bool]] = None,
                     margin_len: float = 10.0, track_left: Optional[bool] = None,
                     full_snapshots: bool = True) -> Trajectory:
    """Evolve with snapshots every rec_dt (rounded to whole steps) until t_cap
    or until ``stop(trajectory)`` turns true."""
    sim = Simulation(state, coeffs, field, t_hint=t_cap, margin_len=margin_len,
                     track_left=track_left)
    n_sub = max(1, int(round(rec_dt / sim.dt)))
    traj = Trajectory([sim.snapshot()])
    while sim.time < t_cap - 1e-12:
        sim.advance_steps(n_sub)
        traj.append(sim.snapshot())
        if stop is not None and stop(traj):
            break
    return traj


def measured_front_speed(coeffs: CoefficientField, field: ReactionField, *,
                         dx: float = 0.02, T: float = 80.0, level: float = 0.5,
                         datum_height: Optional[float] = None,
                         rec_dt: float = 0.5) -> tuple:
    """Speed of the right-moving interface from a direct run: least squares on
    the level-set position over the trailing half of the record."""
    theta = field.lower.theta
    h = datum_height if datum_height is not None else min(1.0, theta + 0.75 * (1 - theta))
    st = state_from_function(lambda x: np.where(x < 0.0, h, 0.0), -20.0, 10.0,
                             dx, 1.0, 0.0)
    traj = evolve_recording(st, coeffs, field, rec_dt=rec_dt, t_cap=T,
                            track_left=False)
    ts, zs = [], []
    for s in traj.snapshots:
        xs = s.xs()
        prof = s.profile()
        above = np.nonzero(prof >= level)[0]
        if above.size and above[-1] + 1 < xs.size:
            i = int(above[-1])
            ts.append(s.time)
            zs.append(_interp_crossing(xs[i], xs[i + 1], prof[i] - level,
                                       prof[i + 1] - level))
    return fit_speed(np.array(ts), np.array(zs))


def construct_front(coeffs: CoefficientField, field: ReactionField,
                    zeta: float, n_max: int = 5, resolution: float = 0.02, *,
                    launch_period: Optional[float] = None,
                    theta_tilde: Optional[float] = None,
                    s_half_width: float = 6.0, n_s: int = 25,
                    cmp_window: tuple = (-12.0, 10.0), rec_dt: float = 0.05,
                    c0: Optional[float] = None,
                    side: str = "left") -> FrontEstimate:
    """Launch solutions from increasingly left-shifted subsolution data, shift
    each clock so the ignition level crosses x1 = 0 at time 0, and return the
    deepest launch with Cauchy gaps between successive normalized snapshots.

    Preconditions enforced: hypotheses, zeta-majorization with the canonical
    floor profile, initial upper-envelope slope below zeta_0, and a plateau
    height above the lower envelope's zeta-crossing.
    """
    hyp = check_hypotheses(field, coeffs)
    if not hyp.ok:
        raise FrontGateError("hypotheses fail:\n" + hyp.summary())
    g = majorant_floor(field, zeta)
    chk = check_majorizes(field, zeta, g)
    if not chk.ok:
        raise FrontGateError(f"majorization fails: {chk.reason} at {chk.violation}")
    if c0 is None:
        c0 = c0_estimate(coeffs, field.lower)
    zeta0 = zeta_for_speed(coeffs, c0)
    slope1 = field.upper.initial_slope()
    if slope1 >= zeta0:
        raise FrontGateError(
            f"upper envelope's initial slope {slope1} reaches zeta_0 = {zeta0}; "
            "the linearized invasion outruns the ignition front")
    if not zeta < zeta0:
        raise FrontGateError(f"zeta = {zeta} must stay below zeta_0 = {zeta0}")

    theta = field.lower.theta
    theta0 = smallest_rate_root(field.lower, zeta)
    tt = theta_tilde if theta_tilde is not None else max(0.85, 0.5 * (1 + theta0))
    if tt <= theta0:
        raise FrontGateError(f"plateau height {tt} must exceed theta_0 = {theta0}")

    sp = min_speed(coeffs, zeta)
    eig = principal_eigen(coeffs, sp.lambda_zeta)
    psi = build_profile(eig, "Psi")
    vsub = build_subsolution(coeffs, field.lower, tt, side=side, dx=resolution)

    p = launch_period if launch_period is not None else max(coeffs.period_p, 1.0)
    s_grid = np.linspace(-s_half_width, s_half_width, n_s)
    xq = np.arange(cmp_window[0], cmp_window[1] + resolution / 2, resolution)

    frames_prev = None
    valid_prev = None
    frames = None
    taus, gaps = [], []
    traj = None
    for nlaunch in range(1, n_max + 1):
        shift = -nlaunch * p
        st = vsub.as_state(shift=shift)
        t_cap = (nlaunch * p + 30.0) / max(0.25 * c0, 1e-3)

        def crossed(tr: Trajectory) -> bool:
            last = tr.snapshots[-1]
            return (_monitor_value(last, 0.0) >= theta
                    and last.time >= _crossing_time(tr, theta) + s_half_width + rec_dt)

        def _crossing_time(tr: Trajectory, level: float) -> float:
            vals = np.array([_monitor_value(s, 0.0) for s in tr.snapshots])
            ts = tr.times
            above = np.nonzero(vals >= level)[0]
            if not above.size:
                return np.inf
            i = int(above[0])
            if i == 0:
                return ts[0]
            return _interp_crossing(ts[i - 1], ts[i], vals[i - 1] - level,
                                    vals[i] - level)

        traj = evolve_recording(st, coeffs, field, rec_dt=rec_dt, t_cap=t_cap,
                                stop=crossed,
                                margin_len=max(10.0, 5.0 / sp.lambda_zeta),
                                track_left=(side == "compact"))
        tau = _crossing_time(traj, theta)
        if not np.isfinite(tau) or traj.snapshots[-1].time < tau + s_half_width:
            raise FrontGateError(
                f"launch {nlaunch}: ignition level never crossed the origin "
                f"within the time cap (quenching or window misconfiguration)")
        frames = np.full((s_grid.size, xq.size), np.nan)
        valid = np.zeros(s_grid.size, dtype=bool)
        t0r, t1r = traj.t_range()
        for k, sv in enumerate(s_grid):
            if t0r - 1e-9 <= tau + sv <= t1r + 1e-9:
                frames[k] = traj.at(min(max(tau + sv, t0r), t1r)).value_on(xq)
                valid[k] = True
        taus.append(tau)
        if frames_prev is not None:
            both = valid & valid_prev
            gaps.append(float(np.max(np.abs(frames[both] - frames_prev[both]))))
        frames_prev, valid_prev = frames, valid

    return FrontEstimate(s_grid, xq, frames, taus, n_max,
                         gaps[-1] if gaps else np.inf, gaps, traj, sp, eig,
                         psi, zeta, theta, vsub)


# ---------------------------------------------------------------------------
# time-shift distance, pulsating defect, spreading certification
# ---------------------------------------------------------------------------

def time_shift_distance(u_traj: Trajectory, w_traj: Trajectory, t_eval: float,
                        *, search: tuple = (-20.0, 20.0),
                        xq: Optional[np.ndarray] = None,
                        coarse: int = 81, tol: float = 1e-4) -> tuple:
    """Minimize over tau the sup-norm of u(t_eval, .) - w(t_eval + tau, .);
    returns (tau_star, distance).  Raises if the bracket sticks to the search
    boundary (the shift range was too small)."""
    t0w, t1w = w_traj.t_range()
    lo = max(search[0], t0w - t_eval)
    hi = min(search[1], t1w - t_eval)
    if hi - lo <= 0:
        raise ValueError("empty shift search range")
    base = u_traj.at(t_eval)
    if xq is None:
        xs = base.xs()
        xq = xs[2:-2]
    uvals = base.value_on(xq)

    def dist(tau: float) -> float:
        return float(np.max(np.abs(uvals - w_traj.values_on(t_eval + tau, xq))))

    taus = np.linspace(lo, hi, coarse)
    ds = np.array([dist(t) for t in taus])
    j = int(np.argmin(ds))
    if j in (0, coarse - 1):
        raise ValueError("time-shift minimizer at the search boundary; "
                         "widen the search range")
    a, b = taus[j - 1], taus[j + 1]
    gold = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - gold * (b - a)
    x2 = a + gold * (b - a)
    d1, d2 = dist(x1), dist(x2)
    while b - a > tol:
        if d1 <= d2:
            b, x2, d2 = x2, x1, d1
            x1 = b - gold * (b - a)
            d1 = dist(x1)
        else:
            a, x1, d1 = x1, x2, d2
            x2 = a + gold * (b - a)
            d2 = dist(x2)
    tau_star = x1 if d1 <= d2 else x2
    return float(tau_star), dist(tau_star)


def pulsating_defect(w_traj: Trajectory, coeffs: CoefficientField,
                     c_est: float, p: float, *, n_times: int = 12,
                     refine: bool = True, refine_width: float = 0.2,
                     trim: float = 2.0) -> dict:
    """sup over sampled t and the window of |w(t + p/c, x + p) - w(t, x)|,
    with the spatial shift by whole grid cells; optionally refines c by
    minimizing the defect over a bracket around c_est."""
    dx = w_traj.snapshots[0].dx
    if abs(p / dx - round(p / dx)) > 1e-9:
        raise ValueError("the period must be a whole number of grid cells")

    t0, t1 = w_traj.t_range()

    def defect(c: float) -> float:
        tshift = p / c
        lo, hi = t0, t1 - tshift
        if hi <= lo:
            return np.inf
        worst = 0.0
        for t in np.linspace(lo, hi, n_times):
            a = w_traj.at(t)
            b = w_traj.at(t + tshift)
            xs = a.xs()
            sel = (xs >= max(a.x0, b.x0 - p) + trim) \
                & (xs <= min(xs[-1], b.xs()[-1] - p) - trim)
            d = np.max(np.abs(b.value_on(xs[sel] + p) - a.profile()[sel]))
            worst = max(worst, float(d))
        return worst

    d0 = defect(c_est)
    out = {"defect_raw": d0, "c_est": c_est, "defect": d0, "c_refined": c_est}
    if refine:
        cs = np.linspace(c_est * (1 - refine_width), c_est * (1 + refine_width), 17)
        dvals = [defect(c) for c in cs]
        j = int(np.argmin(dvals))
        a = cs[max(j - 1, 0)]
        b = cs[min(j + 1, cs.size - 1)]
        gold = (np.sqrt(5.0) - 1.0) / 2.0
        x1 = b - gold * (b - a)
        x2 = a + gold * (b - a)
        d1, d2 = defect(x1), defect(x2)
        while b - a > 1e-4 * c_est:
            if d1 <= d2:
                b, x2, d2 = x2, x1, d1
                x1 = b - gold * (b - a)
                d1 = defect(x1)
            else:
                a, x1, d1 = x1, x2, d2
                x2 = a + gold * (b - a)
                d2 = defect(x2)
        c_ref = x1 if d1 <= d2 else x2
        out["c_refined"] = float(c_ref)
        out["defect"] = defect(float(c_ref))
    return out


def spreading_check(u_traj: Trajectory, x_center: float, c_right: float,
                    c_left: float, eps: float) -> dict:
    """Earliest recorded t' such that for every later recorded t the solution
    exceeds 1 - eps on [x_center - c_left t, x_center + c_right t] cut to the
    window; reports per-candidate violations otherwise."""
    ts = u_traj.times
    snaps = u_traj.snapshots
    mins = []
    for j, tprime in enumerate(ts):
        ok = True
        worst = 1.0
        for k in range(j, len(ts)):
            dt_rel = ts[k] - tprime
            a = x_center - c_left * dt_rel
            b = x_center + c_right * dt_rel
            s = snaps[k]
            xs = s.xs()
            a_eff = max(a, xs[0])
            b_eff = min(b, xs[-1])
            if b_eff < a_eff:
                continue
            grid = np.linspace(a_eff, b_eff, max(8, int((b_eff - a_eff) / s.dx) + 1))
            m = float(np.min(s.value_on(grid)))
            worst = min(worst, m)
            if m < 1.0 - eps:
                ok = False
                break
        mins.append(worst)
        if ok:
            return {"certified": True, "t_prime": float(tprime), "index": j,
                    "worst_min": worst}
    return {"certified": False, "t_prime": None, "index": None,
            "worst_min": float(max(mins)) if mins else 0.0}
