"""JIT-compiled inner loops for the explicit monotone stepper.

All kernels operate on global-length buffers with an active index range
[i_lo, i_hi); cells outside the range hold fill values (or frozen converged
values) and are read only through the stencil.  Window bookkeeping is a
deterministic function of (values, global step count), so split runs resume
bit-exactly.

Updates are single-pass: the pre-step value of the left neighbor is carried
in a register (1-d) or a row buffer (2-d), so no scratch copy of the state is
needed.  Reaction tables come with precomputed per-piece slopes.

Status codes: 0 ok, 1 value out of [0,1] beyond tolerance, 2 right buffer
exhausted, 3 left buffer exhausted.
"""

import numpy as np
from numba import njit

OK = 0
OUT_OF_RANGE = 1
NEED_RIGHT = 2
NEED_LEFT = 3


@njit(cache=True, nogil=True, inline="always", fastmath=True)
def _react(ub, rates, slopes, row, u):
    """Piecewise-linear rate at concentration u (exact on the pieces).

    row indexes the node's rate row; homogeneous tables pass row = 0."""
    lo = 0
    hi = ub.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ub[mid] <= u:
            lo = mid
        else:
            hi = mid
    return rates[row, lo] + slopes[row, lo] * (u - ub[lo])


@njit(cache=True, nogil=True, fastmath=True)
def advance_1d(u, aface, ub, rates, slopes, rstride, dx, dt, nsteps, bnd,
               lfill, rfill, margin, chunk, full_every,
               track_left, track_right, clamp_tol, adeq_eps, retract_eps, step0):
    """Advance nsteps of forward Euler on the active range bnd = [i_lo, i_hi, err].

    Returns (status, min_increment, steps_done).  min_increment is the
    smallest per-step change min_i (u_new - u_old) seen over the call.
    """
    N = u.size
    rdx2 = 1.0 / (dx * dx)
    i0 = bnd[0]
    i1 = bnd[1]
    min_inc = 1.0e300
    steps = 0
    trigger = 0.5 * adeq_eps
    lo_clip = -clamp_tol
    hi_clip = 1.0 + clamp_tol
    for _step in range(nsteps):
        u_left = u[i0 - 1]
        for i in range(i0, i1):
            uc = u[i]
            diff = (aface[i + 1] * (u[i + 1] - uc) - aface[i] * (uc - u_left)) * rdx2
            v = uc + dt * (diff + _react(ub, rates, slopes, i * rstride, uc))
            if v < 0.0:
                if v < lo_clip:
                    bnd[0] = i0
                    bnd[1] = i1
                    bnd[2] = i
                    return OUT_OF_RANGE, min_inc, steps
                v = 0.0
            elif v > 1.0:
                if v > hi_clip:
                    bnd[0] = i0
                    bnd[1] = i1
                    bnd[2] = i
                    return OUT_OF_RANGE, min_inc, steps
                v = 1.0
            inc = v - uc
            if inc < min_inc:
                min_inc = inc
            u_left = uc
            u[i] = v
        steps += 1
        gstep = step0 + steps
        if track_right and i1 - 1 - margin > i0:
            if abs(u[i1 - 1 - margin] - rfill) > trigger:
                i1 += chunk
                if i1 > N - 1:
                    bnd[0] = i0
                    bnd[1] = N - 1
                    return NEED_RIGHT, min_inc, steps
        if track_left and i0 + margin < i1:
            if abs(u[i0 + margin] - lfill) > trigger:
                i0 -= chunk
                if i0 < 1:
                    bnd[0] = 1
                    bnd[1] = i1
                    return NEED_LEFT, min_inc, steps
        if gstep % full_every == 0:
            if track_right:
                need = -1
                for i in range(i1 - 1, i0 - 1, -1):
                    if abs(u[i] - rfill) > trigger:
                        need = i
                        break
                if need >= 0 and i1 < need + margin:
                    i1 = need + margin
                    if i1 > N - 1:
                        bnd[0] = i0
                        bnd[1] = N - 1
                        return NEED_RIGHT, min_inc, steps
            if track_left:
                need = -1
                for i in range(i0, i1):
                    if abs(u[i] - lfill) > trigger:
                        need = i
                        break
                if need >= 0 and i0 > need - margin:
                    i0 = need - margin
                    if i0 < 1:
                        bnd[0] = 1
                        bnd[1] = i1
                        return NEED_LEFT, min_inc, steps
            else:
                # retract the converged trailing zone (frozen cells keep values)
                j = i0
                lim = i1 - margin - chunk
                while j < lim and abs(u[j] - lfill) <= retract_eps:
                    j += 1
                if j - margin > i0:
                    i0 = j - margin
    bnd[0] = i0
    bnd[1] = i1
    bnd[2] = -1
    return OK, min_inc, steps


@njit(cache=True, nogil=True, fastmath=True)
def advance_2d(u, rowbuf, afx, afy, qx, qy, ub, rates, slopes, rstride, dx, dy,
               dt, nsteps, bnd, lfill, rfill, margin, chunk, full_every,
               track_left, track_right, clamp_tol, adeq_eps, retract_eps, step0):
    """2-d analogue of advance_1d; u has shape (N, ny), transverse periodic.

    afx: (N+1, ny) face-averaged a11; afy: (N, ny) face-averaged a22 (face j
    between columns j-1 and j, wrapping); qx, qy at nodes, upwinded.
    rowbuf: (2, ny) scratch carrying the pre-step previous row.
    """
    N, ny = u.shape
    rdx2 = 1.0 / (dx * dx)
    rdy2 = 1.0 / (dy * dy)
    rdx = 1.0 / dx
    rdy = 1.0 / dy
    i0 = bnd[0]
    i1 = bnd[1]
    min_inc = 1.0e300
    steps = 0
    trigger = 0.5 * adeq_eps
    lo_clip = -clamp_tol
    hi_clip = 1.0 + clamp_tol
    for _step in range(nsteps):
        for j in range(ny):
            rowbuf[0, j] = u[i0 - 1, j]
        for i in range(i0, i1):
            ri = i * rstride
            for j in range(ny):
                rowbuf[1, j] = u[i, j]
            for j in range(ny):
                jm = j - 1 if j > 0 else ny - 1
                jp = j + 1 if j < ny - 1 else 0
                uc = rowbuf[1, j]
                diff = (afx[i + 1, j] * (u[i + 1, j] - uc)
                        - afx[i, j] * (uc - rowbuf[0, j])) * rdx2
                diff += (afy[i, jp] * (rowbuf[1, jp] - uc)
                         - afy[i, j] * (uc - rowbuf[1, jm])) * rdy2
                adv = 0.0
                qv = qx[i, j]
                if qv > 0.0:
                    adv += qv * (uc - rowbuf[0, j]) * rdx
                elif qv < 0.0:
                    adv += qv * (u[i + 1, j] - uc) * rdx
                qv = qy[i, j]
                if qv > 0.0:
                    adv += qv * (uc - rowbuf[1, jm]) * rdy
                elif qv < 0.0:
                    adv += qv * (rowbuf[1, jp] - uc) * rdy
                v = uc + dt * (diff - adv + _react(ub, rates, slopes, ri, uc))
                if v < 0.0:
                    if v < lo_clip:
                        bnd[0] = i0
                        bnd[1] = i1
                        bnd[2] = i * ny + j
                        return OUT_OF_RANGE, min_inc, steps
                    v = 0.0
                elif v > 1.0:
                    if v > hi_clip:
                        bnd[0] = i0
                        bnd[1] = i1
                        bnd[2] = i * ny + j
                        return OUT_OF_RANGE, min_inc, steps
                    v = 1.0
                inc = v - uc
                if inc < min_inc:
                    min_inc = inc
                u[i, j] = v
            for j in range(ny):
                rowbuf[0, j] = rowbuf[1, j]
        steps += 1
        gstep = step0 + steps
        if track_right and i1 - 1 - margin > i0:
            dev = 0.0
            for j in range(ny):
                d = abs(u[i1 - 1 - margin, j] - rfill)
                if d > dev:
                    dev = d
            if dev > trigger:
                i1 += chunk
                if i1 > N - 1:
                    bnd[0] = i0
                    bnd[1] = N - 1
                    return NEED_RIGHT, min_inc, steps
        if track_left and i0 + margin < i1:
            dev = 0.0
            for j in range(ny):
                d = abs(u[i0 + margin, j] - lfill)
                if d > dev:
                    dev = d
            if dev > trigger:
                i0 -= chunk
                if i0 < 1:
                    bnd[0] = 1
                    bnd[1] = i1
                    return NEED_LEFT, min_inc, steps
        if gstep % full_every == 0:
            if track_right:
                need = -1
                for i in range(i1 - 1, i0 - 1, -1):
                    hit = False
                    for j in range(ny):
                        if abs(u[i, j] - rfill) > trigger:
                            hit = True
                            break
                    if hit:
                        need = i
                        break
                if need >= 0 and i1 < need + margin:
                    i1 = need + margin
                    if i1 > N - 1:
                        bnd[0] = i0
                        bnd[1] = N - 1
                        return NEED_RIGHT, min_inc, steps
            if not track_left:
                j0 = i0
                lim = i1 - margin - chunk
                conv = True
                while j0 < lim and conv:
                    for j in range(ny):
                        if abs(u[j0, j] - lfill) > retract_eps:
                            conv = False
                            break
                    if conv:
                        j0 += 1
                if j0 - margin > i0:
                    i0 = j0 - margin
    bnd[0] = i0
    bnd[1] = i1
    bnd[2] = -1
    return OK, min_inc, steps


@njit(cache=True, nogil=True, fastmath=True)
def batch_compare_1d(U, aface, ub, rates, slopes, rstride, dx, dt, nsteps, clamp_tol):
    """Advance 2B stacked states (rows of U, boundary columns held fixed) and
    track the worst ordering slack min(v - u) over all pairs and steps.

    Rows 2k and 2k+1 form an ordered pair u <= v.  Returns (status, slack).
    """
    nb, n = U.shape
    rdx2 = 1.0 / (dx * dx)
    slack = 1.0e300
    for _step in range(nsteps):
        for b in range(nb):
            u = U[b]
            u_left = u[0]
            for i in range(1, n - 1):
                uc = u[i]
                diff = (aface[i + 1] * (u[i + 1] - uc) - aface[i] * (uc - u_left)) * rdx2
                v = uc + dt * (diff + _react(ub, rates, slopes, i * rstride, uc))
                if v < 0.0:
                    if v < -clamp_tol:
                        return OUT_OF_RANGE, slack
                    v = 0.0
                elif v > 1.0:
                    if v > 1.0 + clamp_tol:
                        return OUT_OF_RANGE, slack
                    v = 1.0
                u_left = uc
                u[i] = v
        for b in range(0, nb, 2):
            for i in range(n):
                d = U[b + 1, i] - U[b, i]
                if d < slack:
                    slack = d
    return OK, slack


@njit(cache=True, nogil=True, fastmath=True)
def batch_compare_2d(U, rowbuf, afx, afy, qx, qy, ub, rates, slopes, rstride,
                     dx, dy, dt, nsteps, clamp_tol):
    """2-d batch comparison: U has shape (2B, nx, ny), x-boundary columns fixed."""
    nb, nx, ny = U.shape
    rdx2 = 1.0 / (dx * dx)
    rdy2 = 1.0 / (dy * dy)
    rdx = 1.0 / dx
    rdy = 1.0 / dy
    slack = 1.0e300
    for _step in range(nsteps):
        for b in range(nb):
            u = U[b]
            for j in range(ny):
                rowbuf[0, j] = u[0, j]
            for i in range(1, nx - 1):
                ri = i * rstride
                for j in range(ny):
                    rowbuf[1, j] = u[i, j]
                for j in range(ny):
                    jm = j - 1 if j > 0 else ny - 1
                    jp = j + 1 if j < ny - 1 else 0
                    uc = rowbuf[1, j]
                    diff = (afx[i + 1, j] * (u[i + 1, j] - uc)
                            - afx[i, j] * (uc - rowbuf[0, j])) * rdx2
                    diff += (afy[i, jp] * (rowbuf[1, jp] - uc)
                             - afy[i, j] * (uc - rowbuf[1, jm])) * rdy2
                    adv = 0.0
                    qv = qx[i, j]
                    if qv > 0.0:
                        adv += qv * (uc - rowbuf[0, j]) * rdx
                    elif qv < 0.0:
                        adv += qv * (u[i + 1, j] - uc) * rdx
                    qv = qy[i, j]
                    if qv > 0.0:
                        adv += qv * (uc - rowbuf[1, jm]) * rdy
                    elif qv < 0.0:
                        adv += qv * (rowbuf[1, jp] - uc) * rdy
                    v = uc + dt * (diff - adv + _react(ub, rates, slopes, ri, uc))
                    if v < 0.0:
                        if v < -clamp_tol:
                            return OUT_OF_RANGE, slack
                        v = 0.0
                    elif v > 1.0:
                        if v > 1.0 + clamp_tol:
                            return OUT_OF_RANGE, slack
                        v = 1.0
                    u[i, j] = v
                for j in range(ny):
                    rowbuf[0, j] = rowbuf[1, j]
        for b in range(0, nb, 2):
            for i in range(nx):
                for j in range(ny):
                    d = U[b + 1, i, j] - U[b, i, j]
                    if d < slack:
                        slack = d
    return OK, slack


@njit(cache=True, nogil=True, fastmath=True)
def advance_dominate_1d(u, aface, ub, rates, slopes, rstride, dx, dt, nsteps, bnd,
                        lfill, rfill, margin, chunk, full_every,
                        track_left, track_right, clamp_tol, adeq_eps,
                        retract_eps, step0, t0,
                        vtab, tstart, hit_times, prev_slack, lookahead):
    """advance_1d plus per-step domination checks against shifted targets.

    vtab[k] holds target k sampled on its support; tstart[k] is the global
    index of its first sample.  hit_times[k] < 0 marks a pending target; the
    first ``lookahead`` pending targets are checked each step and hits are
    interpolated linearly between the straddling steps.
    """
    N = u.size
    K = tstart.size
    rdx2 = 1.0 / (dx * dx)
    i0 = bnd[0]
    i1 = bnd[1]
    steps = 0
    trigger = 0.5 * adeq_eps
    min_inc = 1.0e300
    for _step in range(nsteps):
        u_left = u[i0 - 1]
        for i in range(i0, i1):
            uc = u[i]
            diff = (aface[i + 1] * (u[i + 1] - uc) - aface[i] * (uc - u_left)) * rdx2
            v = uc + dt * (diff + _react(ub, rates[i], slopes[i], uc))
            if v < 0.0:
                if v < -clamp_tol:
                    bnd[0] = i0
                    bnd[1] = i1
                    bnd[2] = i
                    return OUT_OF_RANGE, min_inc, steps
                v = 0.0
            elif v > 1.0:
                if v > 1.0 + clamp_tol:
                    bnd[0] = i0
                    bnd[1] = i1
                    bnd[2] = i
                    return OUT_OF_RANGE, min_inc, steps
                v = 1.0
            inc = v - uc
            if inc < min_inc:
                min_inc = inc
            u_left = uc
            u[i] = v
        steps += 1
        tnow = t0 + steps * dt
        # domination checks on the pending window of targets
        first = 0
        while first < K and hit_times[first] >= 0.0:
            first += 1
        if first >= K:
            bnd[0] = i0
            bnd[1] = i1
            bnd[2] = -1
            return OK, min_inc, steps
        last = first + lookahead
        if last > K:
            last = K
        for k in range(first, last):
            if hit_times[k] >= 0.0:
                continue
            L = vtab.shape[1]
            s = 1.0e300
            base = tstart[k]
            for l in range(L):
                d = u[base + l] - vtab[k, l]
                if d < s:
                    s = d
            if s >= 0.0:
                sp = prev_slack[k]
                if sp < 0.0 and s > sp:
                    hit_times[k] = tnow - dt * s / (s - sp)
                else:
                    hit_times[k] = tnow
            else:
                prev_slack[k] = s
        gstep = step0 + steps
        if track_right and i1 - 1 - margin > i0:
            if abs(u[i1 - 1 - margin] - rfill) > trigger:
                i1 += chunk
                if i1 > N - 1:
                    bnd[0] = i0
                    bnd[1] = N - 1
                    return NEED_RIGHT, min_inc, steps
        if track_left and i0 + margin < i1:
            if abs(u[i0 + margin] - lfill) > trigger:
                i0 -= chunk
                if i0 < 1:
                    bnd[0] = 1
                    bnd[1] = i1
                    return NEED_LEFT, min_inc, steps
        if gstep % full_every == 0 and not track_left:
            j = i0
            lim = i1 - margin - chunk
            # never retract past the leftmost pending target support
            if first < K and tstart[first] < lim:
                lim = tstart[first]
            while j < lim and abs(u[j] - lfill) <= retract_eps:
                j += 1
            if j - margin > i0:
                i0 = j - margin
    bnd[0] = i0
    bnd[1] = i1
    bnd[2] = -1
    return OK, min_inc, steps
