"""Reaction media: piecewise-linear reaction profiles, inhomogeneous reaction
fields, periodic advection/diffusion coefficients, and the hypothesis checks
that gate every experiment.

Reactions are piecewise linear in u so that ignition levels, crossing points
and majorization checks are exact root-finding problems on linear pieces.
x-dependence is nodal (linear interpolation between nodes) or cell-constant
(disordered media).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# reaction profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReactionProfile:
    """A nonnegative reaction rate u -> f(u) on [0,1], piecewise linear.

    ``kind`` is "ignition" (rate 0 on [0, theta], positive on (theta, 1)) or
    "positive" (positive on all of (0,1), theta == 0).  ``decreasing_from``
    declares a width eps > 0 such that the profile is non-increasing on
    [1-eps, 1].
    """

    ubreaks: np.ndarray          # breakpoint concentrations, 0 = u_0 < ... < u_m = 1
    rates: np.ndarray            # rate at each breakpoint
    kind: str                    # "ignition" | "positive"
    theta: float                 # ignition threshold (0 for positive kind)
    decreasing_from: float       # non-increasing on [1 - decreasing_from, 1]

    def __post_init__(self):
        ub = np.asarray(self.ubreaks, dtype=float)
        r = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "ubreaks", ub)
        object.__setattr__(self, "rates", r)
        if ub.ndim != 1 or r.shape != ub.shape or ub.size < 2:
            raise ValueError("breakpoints and rates must be 1-d arrays of equal length >= 2")
        if ub[0] != 0.0 or ub[-1] != 1.0 or np.any(np.diff(ub) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if r[0] != 0.0 or r[-1] != 0.0:
            raise ValueError("rate must vanish exactly at u=0 and u=1")
        if np.any(r < 0):
            raise ValueError("rate must be nonnegative on [0,1]")
        if self.kind not in ("ignition", "positive", "zero"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "zero":
            if np.any(r != 0.0) or self.theta != 0.0:
                raise ValueError("zero profiles carry no rate and theta == 0")
        elif self.kind == "ignition":
            if not 0.0 < self.theta < 1.0:
                raise ValueError("ignition threshold must lie in (0,1)")
            below = ub <= self.theta + 1e-15
            if np.any(r[below] != 0.0):
                raise ValueError("ignition profile must vanish on [0, theta]")
            inside = (ub > self.theta + 1e-15) & (ub < 1.0)
            if np.any(r[inside] <= 0.0):
                raise ValueError("ignition profile must be positive on (theta, 1)")
        else:
            if self.theta != 0.0:
                raise ValueError("positive profiles carry theta == 0")
            inside = (ub > 0.0) & (ub < 1.0)
            if np.any(r[inside] <= 0.0):
                raise ValueError("positive profile must be positive on (0,1)")
        if not 0.0 < self.decreasing_from <= 1.0:
            raise ValueError("decreasing_from must lie in (0,1]")
        lo = 1.0 - self.decreasing_from
        for j in range(ub.size - 1):
            if ub[j + 1] > lo + 1e-15 and r[j + 1] > r[j]:
                raise ValueError("profile must be non-increasing on [1-decreasing_from, 1]")

    @property
    def lipschitz(self) -> float:
        """Largest absolute slope over all linear pieces."""
        return float(np.max(np.abs(np.diff(self.rates) / np.diff(self.ubreaks))))

    def __call__(self, u):
        return np.interp(u, self.ubreaks, self.rates)

    def scaled(self, c: float) -> "ReactionProfile":
        """Profile with rate multiplied by c > 0 (same breakpoints)."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return ReactionProfile(self.ubreaks.copy(), self.rates * c, self.kind,
                               self.theta, self.decreasing_from)

    def resampled(self, ubreaks: np.ndarray) -> np.ndarray:
        """Rates on a breakpoint grid refining this profile's (exact)."""
        return np.interp(ubreaks, self.ubreaks, self.rates)

    def initial_slope(self) -> float:
        """Slope of the first linear piece (the derivative at u = 0+)."""
        return float((self.rates[1] - self.rates[0]) / (self.ubreaks[1] - self.ubreaks[0]))

    def sup_rate_over_u(self) -> float:
        """sup of f(u)/u over (0,1); attained at a breakpoint or at u -> 0+."""
        vals = [self.initial_slope()]
        ub, r = self.ubreaks, self.rates
        interior = ub > 0
        vals.extend((r[interior] / ub[interior]).tolist())
        return float(max(vals))


def hat_ignition(theta: float, amplitude: float = 1.0, peak: Optional[float] = None) -> ReactionProfile:
    """Tent-shaped ignition profile: 0 on [0,theta], rising to ``amplitude``
    at ``peak`` (default midpoint of (theta,1)), falling to 0 at u=1."""
    if peak is None:
        peak = 0.5 * (theta + 1.0)
    if not theta < peak < 1.0:
        raise ValueError("peak must lie in (theta, 1)")
    ub = np.array([0.0, theta, peak, 1.0])
    r = np.array([0.0, 0.0, amplitude, 0.0])
    return ReactionProfile(ub, r, "ignition", theta, decreasing_from=1.0 - peak)


def zero_profile() -> ReactionProfile:
    """The identically vanishing reaction (pure advection-diffusion runs)."""
    return ReactionProfile(np.array([0.0, 1.0]), np.array([0.0, 0.0]), "zero", 0.0, 1.0)


def tent_positive(amplitude: float = 0.25) -> ReactionProfile:
    """Positive profile amplitude * min(u, 1-u) (piecewise-linear logistic stand-in)."""
    ub = np.array([0.0, 0.5, 1.0])
    r = np.array([0.0, 0.5 * amplitude, 0.0])
    return ReactionProfile(ub, r, "positive", 0.0, decreasing_from=0.5)


def pl_linearized(fn: Callable[[np.ndarray], np.ndarray], n: int, kind: str,
                  theta: float = 0.0, decreasing_from: float = 0.25) -> ReactionProfile:
    """Piecewise-linear interpolant of ``fn`` on n+1 equispaced breakpoints."""
    ub = np.linspace(0.0, 1.0, n + 1)
    r = np.asarray(fn(ub), dtype=float)
    r[0] = 0.0
    r[-1] = 0.0
    return ReactionProfile(ub, r, kind, theta, decreasing_from)


def _merge_breaks(*grids: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate(grids))


def _first_rate_crossing(ub: np.ndarray, r: np.ndarray, zeta: float) -> float:
    """inf({u in (0,1) : f(u) >= zeta*u} union {1}) for piecewise-linear f.

    Exact on the linear pieces.  Degenerates to 0.0 when the first-piece slope
    already meets zeta (the front theory requires zeta above the upper
    profile's initial slope, which rules that out).
    """
    h = r - zeta * ub
    if h[1] >= 0.0:
        # f >= zeta*u immediately to the right of 0
        return 0.0
    for j in range(1, ub.size - 1):
        ha, hb = h[j], h[j + 1]
        if ha >= 0.0:
            return float(ub[j])
        if hb >= 0.0:
            # upcrossing inside the piece
            return float(ub[j] + (ub[j + 1] - ub[j]) * (-ha) / (hb - ha))
    return 1.0


def smallest_rate_root(profile: ReactionProfile, zeta: float) -> float:
    """Smallest positive root of f(u) = zeta*u.

    Requires zeta to exceed the profile's initial slope, so that the root is
    bounded away from 0; this is the theta_j entering the ignition-level
    bracket [theta_1, theta_0].
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    s0 = profile.initial_slope()
    if zeta <= s0:
        raise ValueError(
            f"zeta={zeta} must exceed the profile's initial slope {s0}; no isolated root")
    root = _first_rate_crossing(profile.ubreaks, profile.rates, zeta)
    if root >= 1.0:
        raise ValueError(f"profile never meets zeta*u with zeta={zeta}")
    return root


# ---------------------------------------------------------------------------
# reaction fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReactionField:
    """Inhomogeneous reaction f(x, u) sandwiched between profiles lower <= f <= upper.

    Node profiles share a common breakpoint grid ``ubreaks``; ``node_rates``
    holds one rate row per node.  ``interp`` is "linear" (nodal, linear in x
    between nodes, clamped outside) or "cell" (piecewise constant on cells of
    length ``period`` anchored at x_nodes, used for disordered media).
    """

    lower: ReactionProfile
    upper: ReactionProfile
    lipschitz_K: float
    x_nodes: np.ndarray
    ubreaks: np.ndarray
    node_rates: np.ndarray       # (n_nodes, n_breaks)
    interp: str = "linear"
    period: Optional[float] = None
    seed: Optional[int] = None
    amplitudes: Optional[np.ndarray] = None
    amp_range: Optional[tuple] = None
    periodic: bool = False      # wrap x into the covered span (period * n_nodes)
    unchecked: bool = False     # skip envelope/Lipschitz validation (diagnostics use)

    def __post_init__(self):
        xs = np.asarray(self.x_nodes, dtype=float)
        ub = np.asarray(self.ubreaks, dtype=float)
        nr = np.asarray(self.node_rates, dtype=float)
        object.__setattr__(self, "x_nodes", xs)
        object.__setattr__(self, "ubreaks", ub)
        object.__setattr__(self, "node_rates", nr)
        if nr.shape != (xs.size, ub.size):
            raise ValueError("node_rates must be (n_nodes, n_breaks)")
        if xs.size > 1 and np.any(np.diff(xs) <= 0):
            raise ValueError("x_nodes must be strictly increasing")
        if self.interp not in ("linear", "cell"):
            raise ValueError(f"unknown x-interpolation mode {self.interp!r}")
        if self.interp == "cell" and not self.period:
            raise ValueError("cell-constant fields need a cell length (period)")
        if self.periodic:
            if not self.period:
                raise ValueError("periodic fields need the cell length (period)")
            if self.interp == "linear" and xs.size > 1:
                gaps = np.diff(xs)
                if np.max(np.abs(gaps - self.period)) > 1e-12 * self.period:
                    raise ValueError("periodic nodal fields need uniform node spacing")
        if self.unchecked:
            return
        if np.any(nr[:, 0] != 0.0) or np.any(nr[:, -1] != 0.0):
            raise ValueError("f(x, 0) and f(x, 1) must vanish at every node")
        lo = self.lower.resampled(ub)
        hi = self.upper.resampled(ub)
        if np.min(nr - lo[None, :]) < -1e-12:
            raise ValueError("node profile drops below the lower envelope")
        if np.min(hi[None, :] - nr) < -1e-12:
            raise ValueError("node profile exceeds the upper envelope")
        du = np.diff(ub)
        slopes = np.abs(np.diff(nr, axis=1) / du[None, :])
        if np.max(slopes) > self.lipschitz_K + 1e-9:
            raise ValueError("node profile Lipschitz constant exceeds the declared K")

    @property
    def n_nodes(self) -> int:
        return self.x_nodes.size

    @property
    def span(self) -> float:
        """Length of the covered pattern (one full period for periodic fields)."""
        return self.period * self.x_nodes.size if self.period else \
            float(self.x_nodes[-1] - self.x_nodes[0])

    def rates_at(self, x: float) -> np.ndarray:
        """Rate row of f(x, .) on the shared breakpoint grid.

        Non-periodic fields clamp to the nearest node outside their support;
        periodic ones wrap x into the covered span."""
        xs = self.x_nodes
        m = xs.size
        if self.periodic:
            t = np.fmod(x - xs[0], self.span)
            if t < 0.0:
                t += self.span
            if self.interp == "cell":
                return self.node_rates[min(int(t / self.period), m - 1)]
            j = min(int(t / self.period), m - 1)
            w = t / self.period - j
            return (1.0 - w) * self.node_rates[j] + w * self.node_rates[(j + 1) % m]
        if self.interp == "cell":
            k = int(np.floor((x - xs[0]) / self.period))
            k = min(max(k, 0), m - 1)
            return self.node_rates[k]
        if x <= xs[0]:
            return self.node_rates[0]
        if x >= xs[-1]:
            return self.node_rates[-1]
        j = int(np.searchsorted(xs, x) - 1)
        t = (x - xs[j]) / (xs[j + 1] - xs[j])
        return (1.0 - t) * self.node_rates[j] + t * self.node_rates[j + 1]

    def rates_on_grid(self, xs: np.ndarray) -> np.ndarray:
        """(len(xs), n_breaks) rate table for the solver grid."""
        out = np.empty((len(xs), self.ubreaks.size))
        for i, x in enumerate(xs):
            out[i] = self.rates_at(x)
        return out

    def shifted(self, dx1: float) -> "ReactionField":
        """The field x -> f(x - dx1, u) (translation to the right by dx1)."""
        return ReactionField(self.lower, self.upper, self.lipschitz_K,
                             self.x_nodes + dx1, self.ubreaks, self.node_rates,
                             self.interp, self.period, self.seed,
                             self.amplitudes, self.amp_range, self.periodic)

    def reflected(self) -> "ReactionField":
        """The field x -> f(-x, u)."""
        if self.interp == "cell":
            xs = -(self.x_nodes[::-1] + self.period)
        else:
            xs = -self.x_nodes[::-1]
        return ReactionField(self.lower, self.upper, self.lipschitz_K,
                             xs, self.ubreaks, self.node_rates[::-1].copy(),
                             self.interp, self.period, self.seed,
                             self.amplitudes, self.amp_range, self.periodic)


def homogeneous_field(profile: ReactionProfile,
                      lower: Optional[ReactionProfile] = None,
                      upper: Optional[ReactionProfile] = None) -> ReactionField:
    """x-independent field f(x,u) = profile(u)."""
    lower = lower or profile
    upper = upper or profile
    ub = _merge_breaks(profile.ubreaks, lower.ubreaks, upper.ubreaks)
    rates = profile.resampled(ub)[None, :]
    return ReactionField(lower, upper, profile.lipschitz, np.array([0.0]),
                         ub, rates, interp="linear", period=None)


def amplitude_field(base: ReactionProfile, amplitudes: np.ndarray, period: float,
                    x0: float = 0.0, interp: str = "cell",
                    amp_lo: Optional[float] = None, amp_hi: Optional[float] = None,
                    seed: Optional[int] = None, periodic: bool = False) -> ReactionField:
    """Field f(x,u) = a(x) * base(u) with per-cell (or nodal) amplitudes."""
    amps = np.asarray(amplitudes, dtype=float)
    a_lo = float(np.min(amps)) if amp_lo is None else amp_lo
    a_hi = float(np.max(amps)) if amp_hi is None else amp_hi
    xs = x0 + period * np.arange(amps.size)
    rates = np.outer(amps, base.rates)
    return ReactionField(base.scaled(a_lo), base.scaled(a_hi),
                         a_hi * base.lipschitz, xs, base.ubreaks, rates,
                         interp=interp, period=period, seed=seed,
                         amplitudes=amps, amp_range=(a_lo, a_hi), periodic=periodic)


def periodic_amplitude_field(base: ReactionProfile, amplitudes: np.ndarray,
                             total_period: float, x0: float = 0.0,
                             interp: str = "linear") -> ReactionField:
    """p-periodic field a(x) * base(u); amplitudes sample one period."""
    amps = np.asarray(amplitudes, dtype=float)
    return amplitude_field(base, amps, total_period / amps.size, x0=x0,
                           interp=interp, periodic=True)


def cell_amplitude(seed: int, k: int, a0: float, a1: float) -> float:
    """Counter-based amplitude draw: depends only on (seed, k).

    Makes the stationarity shift identity exact: shifting the cell index and
    reindexing the medium commute bit-for-bit.
    """
    bg = np.random.Philox(key=seed, counter=[0, 0, 0, k & _MASK64])
    return float(a0 + (a1 - a0) * np.random.Generator(bg).random())


def sample_random_reaction(seed: int, base: ReactionProfile,
                           amplitude_range: tuple, cell_count: int,
                           period_p: float, k_lo: int = 0) -> ReactionField:
    """Draw f(x,u) = a(x) base(u), a piecewise constant on cells of length
    period_p with independent uniform amplitudes in [a_0, a_1].

    Reproducible from the seed; cell k's amplitude depends only on (seed, k),
    so the field is stationary and ergodic under integer-cell shifts by
    construction.
    """
    a0, a1 = amplitude_range
    if a0 <= 0:
        raise ValueError("lower amplitude must be positive")
    if not a0 <= 1.0 <= a1:
        raise ValueError("amplitude range must straddle 1")
    if base.kind != "ignition":
        raise ValueError("random media are built from an ignition base profile")
    amps = np.array([cell_amplitude(seed, k, a0, a1)
                     for k in range(k_lo, k_lo + cell_count)])
    return amplitude_field(base, amps, period_p, x0=k_lo * period_p,
                           interp="cell", amp_lo=a0, amp_hi=a1, seed=seed)


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """Periodic advection q and symmetric diffusion A on the unit cell.

    1-d: ``a11`` holds scalar diffusion samples on n cell nodes and q vanishes
    identically (incompressibility plus zero mean force q == 0 on the line).
    2-d: (n, m) samples on [0,p) x [0,1) with periodic wrap in both variables.
    """

    dim: int
    period_p: float
    a11: np.ndarray
    a12: Optional[np.ndarray] = None
    a22: Optional[np.ndarray] = None
    q1: Optional[np.ndarray] = None
    q2: Optional[np.ndarray] = None
    ellipticity: tuple = (0.0, 0.0)

    def __post_init__(self):
        a11 = np.asarray(self.a11, dtype=float)
        object.__setattr__(self, "a11", a11)
        if self.dim == 1:
            if a11.ndim != 1:
                raise ValueError("1-d diffusion samples must be a vector")
            if self.q1 is not None and np.any(np.asarray(self.q1) != 0.0):
                raise ValueError("1-d incompressible mean-zero advection must vanish")
            object.__setattr__(self, "q1", None)
            object.__setattr__(self, "q2", None)
            object.__setattr__(self, "a12", None)
            object.__setattr__(self, "a22", None)
        elif self.dim == 2:
            for name in ("a12", "a22", "q1", "q2"):
                v = getattr(self, name)
                v = np.zeros_like(a11) if v is None else np.asarray(v, dtype=float)
                if v.shape != a11.shape:
                    raise ValueError(f"{name} must match the a11 sample shape")
                object.__setattr__(self, name, v)
        else:
            raise ValueError("dimension must be 1 or 2")
        lo, hi = self.ellipticity
        if lo <= 0 or hi < lo:
            raise ValueError("ellipticity bounds must satisfy 0 < A_lower <= A_upper")
        emin, emax = self.eig_range()
        if emin < lo - 1e-12 or emax > hi + 1e-12:
            raise ValueError("diffusion samples violate the declared ellipticity bounds")

    def eig_range(self) -> tuple:
        """(min, max) eigenvalue of A over all samples."""
        if self.dim == 1:
            return float(np.min(self.a11)), float(np.max(self.a11))
        tr = self.a11 + self.a22
        disc = np.sqrt((self.a11 - self.a22) ** 2 + 4.0 * self.a12 ** 2)
        return float(np.min(0.5 * (tr - disc))), float(np.max(0.5 * (tr + disc)))

    @property
    def n_cells(self) -> tuple:
        return self.a11.shape

    def max_advection(self) -> float:
        if self.dim == 1 or self.q1 is None:
            return 0.0
        return float(np.max(np.sqrt(self.q1 ** 2 + self.q2 ** 2)))

    def is_identity(self) -> bool:
        off = 0.0 if self.dim == 1 else max(np.max(np.abs(self.a12)), self.max_advection())
        return bool(np.all(self.a11 == self.a11.flat[0]) and off == 0.0
                    and (self.dim == 1 or np.all(self.a22 == self.a11)))

    def divergence_q(self) -> np.ndarray:
        """Forward-difference (staggered) divergence of q on the cell grid."""
        if self.dim == 1 or self.q1 is None:
            return np.zeros(1)
        n, m = self.q1.shape
        hx = self.period_p / n
        hy = 1.0 / m
        dq1 = (np.roll(self.q1, -1, axis=0) - self.q1) / hx
        dq2 = (np.roll(self.q2, -1, axis=1) - self.q2) / hy
        return dq1 + dq2

    def mean_q1(self) -> float:
        return 0.0 if self.q1 is None else float(np.mean(self.q1))

    def reflected(self) -> "CoefficientField":
        """Coefficients of the x1 -> -x1 reflected problem."""
        if self.dim == 1:
            return CoefficientField(1, self.period_p, self.a11[::-1].copy(),
                                    ellipticity=self.ellipticity)
        flip = lambda v: np.roll(v[::-1, :], 1, axis=0).copy()
        return CoefficientField(2, self.period_p, flip(self.a11), -flip(self.a12),
                                flip(self.a22), -flip(self.q1), flip(self.q2),
                                self.ellipticity)


def identity_coefficients(dim: int = 1, n: int = 64, period: float = 1.0,
                          value: float = 1.0) -> CoefficientField:
    """A = value * I, q = 0."""
    if dim == 1:
        return CoefficientField(1, period, np.full(n, value), ellipticity=(value, value))
    a = np.full((n, n), value)
    return CoefficientField(2, period, a, np.zeros_like(a), a.copy(),
                            np.zeros_like(a), np.zeros_like(a), ellipticity=(value, value))


def periodic_diffusion_1d(n: int = 256, period: float = 1.0, mean: float = 1.0,
                          ripple: float = 0.5, phase: float = 0.0) -> CoefficientField:
    """1-d scalar diffusion a(x) = mean + ripple * sin(2 pi x / p + phase)."""
    x = period * np.arange(n) / n
    a = mean + ripple * np.sin(2.0 * np.pi * x / period + phase)
    return CoefficientField(1, period, a, ellipticity=(mean - ripple, mean + ripple))


def shear_flow_2d(n: int = 32, m: int = 32, period: float = 1.0,
                  strength: float = 1.0, diffusion: float = 1.0) -> CoefficientField:
    """2-d shear q = (strength * sin(2 pi x2), 0) with A = diffusion * I."""
    x2 = np.arange(m) / m
    q1 = strength * np.sin(2.0 * np.pi * x2)[None, :] * np.ones((n, 1))
    a = np.full((n, m), diffusion)
    return CoefficientField(2, period, a, np.zeros_like(a), a.copy(),
                            q1, np.zeros_like(a), ellipticity=(diffusion, diffusion))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eval_reaction(field: ReactionField, x: float, u) -> float:
    """f(x, u): linear in x between nodes, linear in u within pieces."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0) or np.any(u_arr > 1.0):
        raise ValueError("concentration u must lie in [0,1]")
    r = field.rates_at(x)
    val = np.interp(u_arr, field.ubreaks, r)
    return float(val) if np.isscalar(u) or u_arr.ndim == 0 else val


def alpha_f(field: ReactionField, zeta: float, x: float) -> float:
    """Ignition level at x: inf({u in (0,1) : f(x,u) >= zeta*u} union {1}).

    Exact on the piecewise-linear profile.  Values land in (0,1] whenever
    zeta exceeds the upper envelope's initial slope.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    return _first_rate_crossing(field.ubreaks, field.rates_at(x), zeta)


def alpha_on_grid(field: ReactionField, zeta: float, xs: np.ndarray) -> np.ndarray:
    """Ignition level at each position of a solver grid."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        out[i] = _first_rate_crossing(field.ubreaks, field.rates_at(x), zeta)
    return out


def theta_bracket(field: ReactionField, zeta: float) -> tuple:
    """(theta_1, theta_0): smallest positive roots of f_j(u) = zeta*u for the
    upper (j=1) and lower (j=0) envelopes.  Every alpha_f(x) lies between."""
    return (smallest_rate_root(field.upper, zeta),
            smallest_rate_root(field.lower, zeta))


@dataclass(frozen=True)
class MajorizationWitness:
    zeta: float
    g: ReactionProfile
    alpha_values: np.ndarray     # ignition level per field node


@dataclass(frozen=True)
class MajorizationCheck:
    ok: bool
    witness: Optional[MajorizationWitness] = None
    reason: str = ""
    violation: Optional[tuple] = None   # (x, u, slack) at the worst point


def check_majorizes(field: ReactionField, zeta: float, g: ReactionProfile) -> MajorizationCheck:
    """Verify that f(x, .) dominates g on [alpha_f(x), 1] at every node.

    g must be positive on (0,1).  Piecewise-linear comparison on the merged
    breakpoint grid, hence exact; on failure reports the violating (x, u).
    """
    gi = (g.ubreaks > 0) & (g.ubreaks < 1)
    if np.any(g.rates[gi] <= 0.0):
        bad = int(np.argmax(gi & (g.rates <= 0.0)))
        return MajorizationCheck(False, reason="g must be positive on (0,1)",
                                 violation=(float("nan"), float(g.ubreaks[bad]), 0.0))
    merged = _merge_breaks(field.ubreaks, g.ubreaks)
    g_m = g.resampled(merged)
    alphas = np.empty(field.n_nodes)
    worst = (None, None, np.inf)
    for k in range(field.n_nodes):
        row = field.node_rates[k]
        a_k = _first_rate_crossing(field.ubreaks, row, zeta)
        alphas[k] = a_k
        f_m = np.interp(merged, field.ubreaks, row)
        pts = np.concatenate(([a_k], merged[merged > a_k]))
        slack = np.interp(pts, merged, f_m - g_m)
        j = int(np.argmin(slack))
        if slack[j] < worst[2]:
            worst = (float(field.x_nodes[k]), float(pts[j]), float(slack[j]))
    if worst[2] < 0.0:
        return MajorizationCheck(False, reason="f drops below g after ignition",
                                 violation=worst)
    return MajorizationCheck(True, witness=MajorizationWitness(zeta, g, alphas))


def majorant_floor(field: ReactionField, zeta: float, safety: float = 0.9) -> ReactionProfile:
    """Construct the canonical positive profile g = delta * min(u, 1-u)
    maximal (up to ``safety``) with f(x,.) >= g on [alpha_f(x), 1].

    The ratio of two linear pieces is monotone on each segment, so the
    minimum of f / tent over [alpha, 1] is attained at merged breakpoints or
    as the slope ratio at u = 1; the computation is exact.
    """
    tent = tent_positive(1.0)
    merged = _merge_breaks(field.ubreaks, tent.ubreaks)
    tent_m = tent.resampled(merged)
    delta = np.inf
    for k in range(field.n_nodes):
        row = field.node_rates[k]
        a_k = _first_rate_crossing(field.ubreaks, row, zeta)
        f_m = np.interp(merged, field.ubreaks, row)
        pts = np.concatenate(([a_k], merged[(merged > a_k) & (merged < 1.0)]))
        fv = np.interp(pts, merged, f_m)
        tv = np.interp(pts, merged, tent_m)
        if np.any(fv <= 0.0):
            raise ValueError("field vanishes after ignition; no positive floor exists")
        delta = min(delta, float(np.min(fv / tv)))
        # limiting ratio of the two slopes at u = 1
        f_slope = (row[-1] - row[-2]) / (field.ubreaks[-1] - field.ubreaks[-2])
        delta = min(delta, abs(f_slope) / 0.5)
    if not np.isfinite(delta) or delta <= 0:
        raise ValueError("could not construct a positive floor profile")
    return tent.scaled(safety * delta)


@dataclass(frozen=True)
class ClauseResult:
    name: str
    passed: bool
    slack: float
    detail: str = ""


@dataclass(frozen=True)
class HypothesesReport:
    clauses: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        return "\n".join(f"[{'pass' if c.passed else 'FAIL'}] {c.name}: slack={c.slack:.3e} {c.detail}"
                         for c in self.clauses)


_DIV_TOL = 1e-10   # relative; exact for the shipped shear flows, absorbs rounding


def check_hypotheses(field: ReactionField, coeffs: CoefficientField) -> HypothesesReport:
    """Run every sandwich/Lipschitz/ellipticity/incompressibility invariant and
    report pass/fail with worst-case slack (failures are data, not errors)."""
    clauses = []
    lo = field.lower.resampled(field.ubreaks)
    hi = field.upper.resampled(field.ubreaks)
    s = float(np.min(field.node_rates - lo[None, :]))
    clauses.append(ClauseResult("sandwich_lower", s >= -1e-12, s, "min over nodes of f - f_0"))
    s = float(np.min(hi[None, :] - field.node_rates))
    clauses.append(ClauseResult("sandwich_upper", s >= -1e-12, s, "min over nodes of f_1 - f"))
    du = np.diff(field.ubreaks)
    worst_lip = float(np.max(np.abs(np.diff(field.node_rates, axis=1) / du[None, :])))
    s = field.lipschitz_K - worst_lip
    clauses.append(ClauseResult("lipschitz", s >= -1e-9, s, f"K={field.lipschitz_K}, worst={worst_lip}"))
    s = float(np.max(np.abs(field.node_rates[:, [0, -1]])))
    clauses.append(ClauseResult("endpoint_zeros", s == 0.0, -s, "f(x,0)=f(x,1)=0"))

    emin, emax = coeffs.eig_range()
    a_lo, a_hi = coeffs.ellipticity
    s = min(emin - a_lo, a_hi - emax)
    clauses.append(ClauseResult("ellipticity", s >= -1e-12, s,
                                f"A eigenvalues in [{emin:.6g}, {emax:.6g}]"))
    qscale = max(1.0, coeffs.max_advection())
    div = float(np.max(np.abs(coeffs.divergence_q()))) / qscale
    clauses.append(ClauseResult("incompressible", div <= _DIV_TOL, _DIV_TOL - div,
                                "staggered divergence of q"))
    m = abs(coeffs.mean_q1()) / qscale
    clauses.append(ClauseResult("mean_zero_q1", m <= _DIV_TOL, _DIV_TOL - m,
                                "cell average of q_1"))
    return HypothesesReport(tuple(clauses))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def profile_to_json(p: ReactionProfile) -> dict:
    return {"profile": [[float(u), float(r)] for u, r in zip(p.ubreaks, p.rates)],
            "kind": p.kind, "theta": p.theta, "decreasing_from": p.decreasing_from}


def profile_from_json(doc: dict) -> ReactionProfile:
    pts = np.asarray(doc["profile"], dtype=float)
    return ReactionProfile(pts[:, 0], pts[:, 1], doc["kind"], float(doc["theta"]),
                           float(doc.get("decreasing_from", 0.25)))


def field_to_json(f: ReactionField) -> dict:
    doc = {"lower": profile_to_json(f.lower), "upper": profile_to_json(f.upper),
           "lipschitz_K": f.lipschitz_K, "interp": f.interp,
           "period": f.period, "periodic": f.periodic,
           "x_nodes": f.x_nodes.tolist(),
           "ubreaks": f.ubreaks.tolist(), "node_rates": f.node_rates.tolist()}
    if f.seed is not None:
        doc["seed"] = f.seed
        doc["amplitudes"] = f.amplitudes.tolist()
        doc["amp_range"] = list(f.amp_range)
    return doc


def field_from_json(doc: dict) -> ReactionField:
    return ReactionField(
        profile_from_json(doc["lower"]), profile_from_json(doc["upper"]),
        float(doc["lipschitz_K"]), np.asarray(doc["x_nodes"], dtype=float),
        np.asarray(doc["ubreaks"], dtype=float),
        np.asarray(doc["node_rates"], dtype=float),
        doc.get("interp", "linear"), doc.get("period"),
        doc.get("seed"),
        np.asarray(doc["amplitudes"], dtype=float) if "amplitudes" in doc else None,
        tuple(doc["amp_range"]) if "amp_range" in doc else None,
        bool(doc.get("periodic", False)))


def coeffs_to_json(c: CoefficientField) -> dict:
    if c.dim == 1:
        return {"dim": 1, "period": c.period_p, "A": c.a11.tolist(), "q": [],
                "ellipticity": list(c.ellipticity)}
    return {"dim": 2, "period": c.period_p,
            "A": {"a11": c.a11.tolist(), "a12": c.a12.tolist(), "a22": c.a22.tolist()},
            "q": {"q1": c.q1.tolist(), "q2": c.q2.tolist()},
            "ellipticity": list(c.ellipticity)}


def coeffs_from_json(doc: dict) -> CoefficientField:
    dim = int(doc["dim"])
    if dim == 1:
        return CoefficientField(1, float(doc["period"]), np.asarray(doc["A"], dtype=float),
                                ellipticity=tuple(doc["ellipticity"]))
    A, q = doc["A"], doc["q"]
    return CoefficientField(2, float(doc["period"]),
                            np.asarray(A["a11"], dtype=float), np.asarray(A["a12"], dtype=float),
                            np.asarray(A["a22"], dtype=float), np.asarray(q["q1"], dtype=float),
                            np.asarray(q["q2"], dtype=float), tuple(doc["ellipticity"]))
