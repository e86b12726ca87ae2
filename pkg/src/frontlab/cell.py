"""Periodic cell problems: the elliptic corrector, the principal eigenvalue of
the exponentially tilted operator, the linearized-speed minimization over
decay rates, and the exponential comparison profiles built from them.

Discretization is second-order centered differences on a uniform periodic
cell grid (flux form for the diffusion, centered first-order terms).  The
Perron eigenpair is extracted by shifted inverse power iteration with the
shift kept above the spectral bound, so every iterate stays positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .medium import CoefficientField


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

def _centered_derivative(v: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2.0 * h)


def _assemble_1d(coeffs: CoefficientField, lam: float, direction: int):
    """Matrix of  (a g')' - 2*s*lam*a g' + lam*(lam*a - s*a') g  on the cell."""
    a = coeffs.a11
    n = a.size
    h = coeffs.period_p / n
    ap = 0.5 * (a + np.roll(a, -1))          # face i+1/2
    am = np.roll(ap, 1)                      # face i-1/2
    da = _centered_derivative(a, h)
    s = float(direction)

    idx = np.arange(n)
    right = (idx + 1) % n
    left = (idx - 1) % n
    c_right = ap / h ** 2 - s * lam * a / h
    c_left = am / h ** 2 + s * lam * a / h
    c_diag = -(ap + am) / h ** 2 + lam * (lam * a - s * da)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, right, left])
    vals = np.concatenate([c_diag, c_right, c_left])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _assemble_2d(coeffs: CoefficientField, lam: float, direction: int):
    a11, a12, a22 = coeffs.a11, coeffs.a12, coeffs.a22
    q1, q2 = coeffs.q1, coeffs.q2
    n, m = a11.shape
    hx = coeffs.period_p / n
    hy = 1.0 / m
    s = float(direction)

    div_ae1 = _centered_derivative(a11, hx, 0) + _centered_derivative(a12, hy, 1)

    N = n * m
    rows, cols, vals = [], [], []

    def add(i, j, i2, j2, v):
        rows.append(i * m + j)
        cols.append((i2 % n) * m + (j2 % m))
        vals.append(v)

    a11_e = 0.5 * (a11 + np.roll(a11, -1, 0))
    a11_w = np.roll(a11_e, 1, 0)
    a22_n = 0.5 * (a22 + np.roll(a22, -1, 1))
    a22_s = np.roll(a22_n, 1, 1)

    for i in range(n):
        for j in range(m):
            # flux form for the diagonal diffusion
            add(i, j, i + 1, j, a11_e[i, j] / hx ** 2)
            add(i, j, i - 1, j, a11_w[i, j] / hx ** 2)
            add(i, j, i, j + 1, a22_n[i, j] / hy ** 2)
            add(i, j, i, j - 1, a22_s[i, j] / hy ** 2)
            add(i, j, i, j, -(a11_e[i, j] + a11_w[i, j]) / hx ** 2
                - (a22_n[i, j] + a22_s[i, j]) / hy ** 2)
            # mixed terms Dx(a12 Dy g) + Dy(a12 Dx g), centered
            cxy = 1.0 / (4.0 * hx * hy)
            for (di, dj, sgn) in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
                v = sgn * cxy * (a12[(i + di) % n, j] + a12[i, (j + dj) % m])
                add(i, j, i + di, j + dj, v)
            # -q . grad, centered
            add(i, j, i + 1, j, -q1[i, j] / (2 * hx))
            add(i, j, i - 1, j, q1[i, j] / (2 * hx))
            add(i, j, i, j + 1, -q2[i, j] / (2 * hy))
            add(i, j, i, j - 1, q2[i, j] / (2 * hy))
            # -2 s lam (A e1) . grad
            add(i, j, i + 1, j, -s * lam * a11[i, j] / hx)
            add(i, j, i - 1, j, s * lam * a11[i, j] / hx)
            add(i, j, i, j + 1, -s * lam * a12[i, j] / hy)
            add(i, j, i, j - 1, s * lam * a12[i, j] / hy)
            # zeroth order
            add(i, j, i, j, lam * (lam * a11[i, j] - s * div_ae1[i, j] + s * q1[i, j]))
    return sp.csr_matrix((np.array(vals), (np.array(rows), np.array(cols))), shape=(N, N))


def tilted_operator(coeffs: CoefficientField, lam: float, direction: int = +1):
    """Discrete cell operator whose principal eigenvalue is kappa(lam).

    direction -1 is the left-moving convention: the single-signed terms in
    e_1 and q_1 flip sign.
    """
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    if coeffs.dim == 1:
        return _assemble_1d(coeffs, lam, direction)
    return _assemble_2d(coeffs, lam, direction)


def advection_diffusion_operator(coeffs: CoefficientField):
    """Discrete  E v = -div(A grad v) + q . grad v  (the corrector operator)."""
    return -tilted_operator(coeffs, 0.0, +1)


# ---------------------------------------------------------------------------
# corrector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellFunction:
    values: np.ndarray       # (n,) or (n, m) on the periodic cell
    period: float
    residual_norm: float


def solve_corrector(coeffs: CoefficientField, direction: int = +1,
                    tol: float = 1e-10) -> CellFunction:
    """Zero-mean periodic solution of  -div(A grad v) + q.grad v = rhs  with
    rhs = q_1 - div(A e_1)  (direction -1 flips the sign of the rhs).

    The solution is defined up to constants; a bordered system pins the
    discrete mean to zero.  Raises SolverError if the discrete residual
    max-norm exceeds ``tol``.
    """
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    s = float(direction)
    if coeffs.dim == 1:
        a = coeffs.a11
        h = coeffs.period_p / a.size
        rhs = s * (0.0 - _centered_derivative(a, h))
        shape = a.shape
    else:
        hx = coeffs.period_p / coeffs.a11.shape[0]
        hy = 1.0 / coeffs.a11.shape[1]
        div_ae1 = _centered_derivative(coeffs.a11, hx, 0) + _centered_derivative(coeffs.a12, hy, 1)
        rhs = s * (coeffs.q1 - div_ae1)
        shape = coeffs.a11.shape
    b = rhs.ravel()
    E = advection_diffusion_operator(coeffs)
    N = b.size
    ones = np.ones(N)
    bordered = sp.bmat([[E, ones[:, None] / N], [ones[None, :] / N, None]], format="csc")
    sol = spla.splu(bordered).solve(np.concatenate([b, [0.0]]))
    v = sol[:N]
    resid = float(np.max(np.abs(E @ v - b)))
    if not np.isfinite(resid) or resid > tol * max(1.0, np.max(np.abs(b)) if b.size else 1.0):
        raise SolverError(
            f"corrector solve residual {resid:.3e} above tolerance "
            f"(condition trouble in the cell system)")
    v = v - np.mean(v)
    return CellFunction(v.reshape(shape), coeffs.period_p, resid)


# ---------------------------------------------------------------------------
# principal eigenvalue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenSolution:
    """Principal (Perron) eigenpair of the tilted cell operator.

    gamma is positive, normalized so its infimum over the cell equals 1.
    """
    lam: float
    kappa: float
    gamma: np.ndarray
    residual_norm: float
    period: float
    dim: int
    direction: int = +1

    def __post_init__(self):
        if np.min(self.gamma) <= 0:
            raise SolverError("Perron eigenfunction must be positive")

    @property
    def gamma_sup(self) -> float:
        return float(np.max(self.gamma))


def principal_eigen(coeffs: CoefficientField, lam: float, direction: int = +1,
                    tol: float = 1e-11, maxit: int = 400) -> EigenSolution:
    """Perron eigenpair (kappa, gamma) of the tilted cell operator.

    Shifted inverse power iteration; the shift starts at the Gershgorin upper
    bound + 1 (which makes the shifted matrix an M-matrix, so the iteration
    preserves positivity) and is then walked down toward the eigenvalue
    estimate, always kept above it.  kappa(0) = 0 with gamma == 1 exactly.
    """
    if lam < 0:
        raise ValueError("decay rate lam must be nonnegative")
    shape = coeffs.a11.shape
    if lam == 0.0:
        return EigenSolution(0.0, 0.0, np.ones(shape), 0.0, coeffs.period_p,
                             coeffs.dim, direction)
    M = tilted_operator(coeffs, lam, direction).tocsr()
    N = M.shape[0]
    diag = M.diagonal()
    row_abs = np.abs(M).sum(axis=1).A.ravel() if hasattr(np.abs(M).sum(axis=1), "A") \
        else np.asarray(np.abs(M).sum(axis=1)).ravel()
    gersh = float(np.max(diag + (row_abs - np.abs(diag))))
    scale = max(1.0, float(np.max(row_abs)))

    x = np.ones(N)
    kappa = float(x @ (M @ x)) / N
    resid = float(np.max(np.abs(M @ x - kappa * x)))
    history = [resid]
    floor = 64.0 * np.finfo(float).eps * scale
    sigma = gersh + 1.0
    delta = None
    I = sp.identity(N, format="csr")

    for _ in range(maxit):
        if resid <= max(tol * max(1.0, abs(kappa)), floor):
            gamma = (x / np.min(x)).reshape(shape)
            return EigenSolution(lam, kappa, gamma, resid, coeffs.period_p,
                                 coeffs.dim, direction)
        try:
            lu = spla.splu((sigma * I - M).tocsc())
        except RuntimeError:
            sigma = kappa + (4.0 * (delta or 1.0))
            delta = (delta or 1.0) * 4.0
            continue
        ok = True
        for _inner in range(3):
            y = lu.solve(x)
            if np.min(y) <= 0.0 or not np.all(np.isfinite(y)):
                ok = False
                break
            y = y / np.max(y)
            kappa = float(y @ (M @ y)) / float(y @ y)
            resid = float(np.max(np.abs(M @ y - kappa * y)))
            history.append(resid)
            x = y
            if resid <= max(tol * max(1.0, abs(kappa)), floor):
                break
        if not ok:
            # shift fell below the Perron root; back off upward
            delta = (delta or 1.0) * 8.0
            sigma = kappa + delta
            continue
        delta = max(4.0 * resid, 1e-9 * max(1.0, abs(kappa)))
        sigma = kappa + delta
    raise SolverError(
        f"Perron iteration did not converge (last residuals {history[-5:]})")


class KappaEvaluator:
    """Memoizing kappa(lam) evaluator for one coefficient field/direction."""

    def __init__(self, coeffs: CoefficientField, direction: int = +1,
                 tol: float = 1e-11):
        self.coeffs = coeffs
        self.direction = direction
        self.tol = tol
        self._cache: dict = {}

    def solve(self, lam: float) -> EigenSolution:
        key = float(lam)
        if key not in self._cache:
            self._cache[key] = principal_eigen(self.coeffs, key, self.direction,
                                               tol=self.tol)
        return self._cache[key]

    def __call__(self, lam: float) -> float:
        return self.solve(lam).kappa


# ---------------------------------------------------------------------------
# kappa shape diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaShapeReport:
    lambdas: np.ndarray
    kappas: np.ndarray
    convexity_slack: float        # min over interior samples; >= -tol means convex
    lower_bound_slack: float      # min of kappa - A_lower*lam^2
    monotone_slack: float         # min of consecutive increments
    fd0_sequence: np.ndarray      # kappa(h)/h for shrinking h
    fd0_ok: bool
    kappa0_ok: bool
    tol: float

    @property
    def ok(self) -> bool:
        return (self.convexity_slack >= -self.tol and self.lower_bound_slack >= -self.tol
                and self.fd0_ok and self.kappa0_ok)


def kappa_shape_check(coeffs: CoefficientField, lambdas, direction: int = +1,
                      tol: float = 1e-8) -> KappaShapeReport:
    """Sample kappa on a sorted lam-grid and verify the shape facts that the
    speed minimization leans on: kappa(0)=0, discrete convexity, vanishing
    forward difference at 0, and kappa >= A_lower * lam^2."""
    lams = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lams) <= 0) or np.any(lams < 0):
        raise ValueError("lambdas must be sorted, nonnegative and distinct")
    ev = KappaEvaluator(coeffs, direction)
    kap = np.array([ev(l) for l in lams])

    conv = np.inf
    for j in range(1, lams.size - 1):
        a, b, c = lams[j - 1], lams[j], lams[j + 1]
        chord = ((c - b) * kap[j - 1] + (b - a) * kap[j + 1]) / (c - a)
        conv = min(conv, float(chord - kap[j]))
    if lams.size < 3:
        conv = 0.0

    a_lo = coeffs.ellipticity[0]
    lb = float(np.min(kap - a_lo * lams ** 2)) if lams.size else 0.0
    mono = float(np.min(np.diff(kap))) if lams.size > 1 else 0.0

    h0 = lams[1] if lams.size > 1 and lams[0] == 0.0 else (lams[0] if lams[0] > 0 else 1.0)
    hs = h0 * 0.5 ** np.arange(4)
    fd0 = np.array([ev(h) / h for h in hs])
    fd0_ok = bool(np.all(np.diff(fd0) < tol) and fd0[-1] <= 0.75 * fd0[0] + tol)
    kappa0_ok = (0.0 not in lams) or abs(kap[list(lams).index(0.0)]) <= tol
    return KappaShapeReport(lams, kap, conv, lb, mono, fd0, fd0_ok, kappa0_ok, tol)


# ---------------------------------------------------------------------------
# speed minimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedSolution:
    zeta: float
    lambda_zeta: float
    c_zeta: float
    bracket: tuple
    optimality_ok: bool = True


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def min_speed(coeffs: CoefficientField, zeta: float, direction: int = +1,
              rel_tol: float = 1e-8, evaluator: Optional[KappaEvaluator] = None,
              max_expand: int = 60) -> SpeedSolution:
    """Minimize (zeta + kappa(lam)) / lam over lam > 0.

    Bracket expansion (doubling/halving) followed by golden-section search to
    relative tolerance ``rel_tol``; unimodality comes from convexity of kappa
    with kappa(0) = 0, which makes the objective diverge at 0 and infinity.
    Ties break toward smaller lam.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    ev = evaluator or KappaEvaluator(coeffs, direction)

    def g(lam: float) -> float:
        return (zeta + ev(lam)) / lam

    a_lo = coeffs.ellipticity[0]
    b = float(np.sqrt(zeta / a_lo))
    a, c = 0.5 * b, 2.0 * b
    ga, gb, gc = g(a), g(b), g(c)
    k = 0
    while gc < gb:
        a, b, c = b, c, 2.0 * c
        ga, gb, gc = gb, gc, g(c)
        k += 1
        if k > max_expand:
            raise SolverError("bracket expansion exceeded cap (pathological kappa data)")
    k = 0
    while ga < gb:
        a, b, c = 0.5 * a, a, b
        ga, gb, gc = g(a), ga, gb
        k += 1
        if k > max_expand:
            raise SolverError("bracket expansion exceeded cap (pathological kappa data)")
    bracket = (a, c)

    # golden-section search on [a, c]; stop above the eigenvalue noise floor,
    # a parabolic vertex step below recovers the remaining digits
    gold_tol = max(rel_tol, 3e-5)
    x1 = c - _GOLDEN * (c - a)
    x2 = a + _GOLDEN * (c - a)
    g1, g2 = g(x1), g(x2)
    while (c - a) > gold_tol * max(1.0, abs(a) + abs(c)):
        if g1 <= g2:           # ties toward smaller lam
            c, x2, g2 = x2, x1, g1
            x1 = c - _GOLDEN * (c - a)
            g1 = g(x1)
        else:
            a, x1, g1 = x1, x2, g2
            x2 = a + _GOLDEN * (c - a)
            g2 = g(x2)
    lam_star = x1 if g1 <= g2 else x2
    h = 1e-4 * max(1.0, lam_star)
    gm, g0, gp = g(lam_star - h), g(lam_star), g(lam_star + h)
    denom = gm - 2.0 * g0 + gp
    if denom > 0:
        shift = 0.5 * h * (gm - gp) / denom
        if abs(shift) < 2.0 * h:
            lam_star = lam_star + shift
    c_star = g(lam_star)

    eps = 1e-3 * lam_star
    opt_ok = bool(g(lam_star - eps) >= c_star - 1e-12 and g(lam_star + eps) >= c_star - 1e-12)
    return SpeedSolution(zeta, float(lam_star), float(c_star), bracket, opt_ok)


def zeta_for_speed(coeffs: CoefficientField, c_target: float, direction: int = +1,
                   rel_tol: float = 1e-10, evaluator: Optional[KappaEvaluator] = None) -> float:
    """The unique zeta > 0 whose linearized minimal speed equals c_target
    (bisection; the objective is strictly increasing in zeta)."""
    if c_target <= 0:
        raise ValueError("target speed must be positive")
    ev = evaluator or KappaEvaluator(coeffs, direction)
    lo, hi = 1e-12, 1.0
    k = 0
    while min_speed(coeffs, hi, direction, evaluator=ev).c_zeta < c_target:
        hi *= 4.0
        k += 1
        if k > 40:
            raise SolverError("zeta bracket expansion failed")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if min_speed(coeffs, mid, direction, evaluator=ev).c_zeta < c_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# exponential profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpProfile:
    """Evaluation rule  P(s, x) = scale * exp(-lam * s) * gamma(x)  with gamma
    the inf-normalized periodic Perron eigenfunction."""
    lam: float
    gamma: np.ndarray
    scale: float
    period: float
    dim: int

    def gamma_at(self, x1, x2=None):
        """gamma continued periodically, linear interpolation on the cell grid."""
        g = self.gamma
        if self.dim == 1:
            n = g.size
            h = self.period / n
            t = np.asarray(x1, dtype=float) / h
            i0 = np.floor(t).astype(int)
            fr = t - i0
            return (1.0 - fr) * g[i0 % n] + fr * g[(i0 + 1) % n]
        n, m = g.shape
        hx = self.period / n
        hy = 1.0 / m
        tx = np.asarray(x1, dtype=float) / hx
        ty = np.asarray(x2, dtype=float) / hy
        i0 = np.floor(tx).astype(int)
        j0 = np.floor(ty).astype(int)
        fx = tx - i0
        fy = ty - j0
        i1, j1 = (i0 + 1) % n, (j0 + 1) % m
        i0, j0 = i0 % n, j0 % m
        return ((1 - fx) * (1 - fy) * g[i0, j0] + fx * (1 - fy) * g[i1, j0]
                + (1 - fx) * fy * g[i0, j1] + fx * fy * g[i1, j1])

    def __call__(self, s, x1=0.0, x2=None):
        return self.scale * np.exp(-self.lam * np.asarray(s, dtype=float)) * self.gamma_at(x1, x2)


def build_profile(eig: EigenSolution, variant: str = "Psi",
                  main_eig: Optional[EigenSolution] = None,
                  factor: Optional[float] = None) -> ExpProfile:
    """Exponential comparison profile from a cell eigenpair.

    variant "Psi": scale 1 (gamma is inf-normalized so P(0,x) >= 1 holds by
    construction).  variant "Phi": the slower-decaying envelope built from the
    eigenpair at a reduced rate (typically lam_zeta/2 or a tail rate mu);
    ``main_eig`` supplies the lam_zeta eigen data whose sup fixes the
    prefactor, so that Phi(s,x) >= exp((lam_main - lam) s) * Psi(s, x).
    """
    if variant == "Psi":
        prof = ExpProfile(eig.lam, eig.gamma, 1.0, eig.period, eig.dim)
        if np.min(prof.gamma) < 1.0 - 1e-12:
            raise SolverError("profile normalization lost: P(0, x) >= 1 fails")
        return prof
    if variant != "Phi":
        raise ValueError("variant must be 'Psi' or 'Phi'")
    if main_eig is None:
        raise ValueError("Phi variant needs the main (lam_zeta) eigen data")
    fac = 1.0 if factor is None else factor
    scale = fac * main_eig.gamma_sup
    prof = ExpProfile(eig.lam, eig.gamma, scale, eig.period, eig.dim)
    # domination check on a sample (s, x) grid
    psi = build_profile(main_eig, "Psi")
    ss = np.linspace(-5.0, 5.0, 41)
    if eig.dim == 1:
        xs = np.linspace(0.0, eig.period, 33)
        for s in ss:
            slack = prof(s, xs) - np.exp((main_eig.lam - eig.lam) * s) * psi(s, xs)
            if np.min(slack) < -1e-12 * max(1.0, prof.scale * np.exp(-eig.lam * s)):
                raise SolverError("Phi profile fails to dominate the shifted Psi")
    return prof
