"""Compiled inner loops for the IMEX time steppers.

Every implicit solve is ``(I + dt*(A + diag(sink))) u_new = rhs`` with the
diffusion bands ``A`` taken from a coefficient table row.  Sinks are
nonnegative, so each system is an M-matrix and nonnegative right-hand sides
give nonnegative solutions.

Status codes: 0 ok, 1 negative value, 2 zero pivot.
"""

import numpy as np
from numba import njit

OK, NEGATIVE, SINGULAR = 0, 1, 2


@njit(cache=True)
def solve_shift(low, dia, up, sink, dt, rhs, out, lo, hi, work):
    piv = 1.0 + dt * (dia[lo] + sink[lo])
    if piv == 0.0:
        return False
    work[lo] = dt * up[lo] / piv if hi - lo > 1 else 0.0
    out[lo] = rhs[lo] / piv
    for j in range(lo + 1, hi):
        lj = dt * low[j]
        piv = 1.0 + dt * (dia[j] + sink[j]) - lj * work[j - 1]
        if piv == 0.0:
            return False
        work[j] = dt * up[j] / piv if j < hi - 1 else 0.0
        out[j] = (rhs[j] - lj * out[j - 1]) / piv
    for j in range(hi - 2, lo - 1, -1):
        out[j] -= work[j] * out[j + 1]
    return True


@njit(cache=True)
def _first_negative(u, lo, hi, tol):
    for j in range(lo, hi):
        if u[j] < tol or u[j] != u[j]:
            return j
    return -1


@njit(cache=True)
def full_block(S, count, dt, a1, b1, c1, l1, a2, b2, c2, l2,
               hl, hd, hu, vl, vd, vu, lo1, hi1, lo2, hi2,
               save_every, phase, saved, neg_tol):
    """Advance the four-component bilinear model ``count`` steps in place.

    The infection transfer uses the freshly solved susceptible density in
    both equations, so the host (and vector) totals follow the logistic step
    exactly.
    """
    n = S.shape[1]
    H = np.empty(n)
    V = np.empty(n)
    sink = np.empty(n)
    rhs = np.empty(n)
    work = np.empty(n)
    new = np.zeros((4, n))
    isave = 0
    for r in range(count):
        for j in range(n):
            H[j] = S[0, j] + S[1, j]
            V[j] = S[2, j] + S[3, j]
        for j in range(lo1, hi1):
            sink[j] = b1[r, j] + c1[r, j] * H[j] + l1[r, j] * S[3, j]
            rhs[j] = S[0, j] + dt * a1[r, j] * H[j]
        if not solve_shift(hl[r], hd[r], hu[r], sink, dt, rhs, new[0], lo1, hi1, work):
            return SINGULAR, r, 0, -1, 0.0
        for j in range(lo1, hi1):
            sink[j] = b1[r, j] + c1[r, j] * H[j]
            rhs[j] = S[1, j] + dt * l1[r, j] * S[3, j] * new[0, j]
        if not solve_shift(hl[r], hd[r], hu[r], sink, dt, rhs, new[1], lo1, hi1, work):
            return SINGULAR, r, 1, -1, 0.0
        for j in range(lo2, hi2):
            sink[j] = b2[r, j] + c2[r, j] * V[j] + l2[r, j] * S[1, j]
            rhs[j] = S[2, j] + dt * a2[r, j] * V[j]
        if not solve_shift(vl[r], vd[r], vu[r], sink, dt, rhs, new[2], lo2, hi2, work):
            return SINGULAR, r, 2, -1, 0.0
        for j in range(lo2, hi2):
            sink[j] = b2[r, j] + c2[r, j] * V[j]
            rhs[j] = S[3, j] + dt * l2[r, j] * S[1, j] * new[2, j]
        if not solve_shift(vl[r], vd[r], vu[r], sink, dt, rhs, new[3], lo2, hi2, work):
            return SINGULAR, r, 3, -1, 0.0
        for c in range(4):
            lo = lo1 if c < 2 else lo2
            hi = hi1 if c < 2 else hi2
            bad = _first_negative(new[c], lo, hi, neg_tol)
            if bad >= 0:
                return NEGATIVE, r, c, bad, new[c, bad]
            for j in range(lo, hi):
                S[c, j] = new[c, j]
        if save_every > 0 and (phase + r + 1) % save_every == 0:
            saved[isave, :, :] = S
            isave += 1
    return OK, count, -1, -1, 0.0


@njit(cache=True)
def modified_block(S, count, dt, a1, b1, c1, l1, a2, b2, c2, l2, g,
                   hl, hd, hu, vl, vd, vu, save_every, phase, saved, neg_tol, eps_den):
    """Standard-incidence variant with host recovery; Robin/Neumann only."""
    n = S.shape[1]
    H = np.empty(n)
    V = np.empty(n)
    D = np.empty(n)
    sink = np.empty(n)
    rhs = np.empty(n)
    work = np.empty(n)
    new = np.zeros((4, n))
    isave = 0
    for r in range(count):
        for j in range(n):
            H[j] = S[0, j] + S[1, j]
            V[j] = S[2, j] + S[3, j]
            D[j] = H[j] if H[j] > eps_den else eps_den
        for j in range(n):
            sink[j] = b1[r, j] + c1[r, j] * H[j] + l1[r, j] * S[3, j] / D[j]
            rhs[j] = S[0, j] + dt * (a1[r, j] * H[j] + g[r, j] * S[1, j])
        if not solve_shift(hl[r], hd[r], hu[r], sink, dt, rhs, new[0], 0, n, work):
            return SINGULAR, r, 0, -1, 0.0
        for j in range(n):
            sink[j] = b1[r, j] + c1[r, j] * H[j] + g[r, j]
            rhs[j] = S[1, j] + dt * l1[r, j] * S[3, j] * new[0, j] / D[j]
        if not solve_shift(hl[r], hd[r], hu[r], sink, dt, rhs, new[1], 0, n, work):
            return SINGULAR, r, 1, -1, 0.0
        for j in range(n):
            sink[j] = b2[r, j] + c2[r, j] * V[j] + l2[r, j] * S[1, j] / D[j]
            rhs[j] = S[2, j] + dt * a2[r, j] * V[j]
        if not solve_shift(vl[r], vd[r], vu[r], sink, dt, rhs, new[2], 0, n, work):
            return SINGULAR, r, 2, -1, 0.0
        for j in range(n):
            sink[j] = b2[r, j] + c2[r, j] * V[j]
            rhs[j] = S[3, j] + dt * l2[r, j] * S[1, j] / D[j] * new[2, j]
        if not solve_shift(vl[r], vd[r], vu[r], sink, dt, rhs, new[3], 0, n, work):
            return SINGULAR, r, 3, -1, 0.0
        for c in range(4):
            bad = _first_negative(new[c], 0, n, neg_tol)
            if bad >= 0:
                return NEGATIVE, r, c, bad, new[c, bad]
            for j in range(n):
                S[c, j] = new[c, j]
        if save_every > 0 and (phase + r + 1) % save_every == 0:
            saved[isave, :, :] = S
            isave += 1
    return OK, count, -1, -1, 0.0


@njit(cache=True)
def logistic_block(S, count, dt, a, b, c, low, dia, up, lo, hi, save_every, phase, saved, neg_tol):
    """Scalar logistic ``u_t = (d u_x)_x + (a - b) u - c u^2`` with lagged crowding."""
    n = S.shape[1]
    u = S[0]
    sink = np.empty(n)
    rhs = np.empty(n)
    work = np.empty(n)
    new = np.zeros(n)
    isave = 0
    for r in range(count):
        for j in range(lo, hi):
            sink[j] = b[r, j] + c[r, j] * u[j]
            rhs[j] = u[j] + dt * a[r, j] * u[j]
        if not solve_shift(low[r], dia[r], up[r], sink, dt, rhs, new, lo, hi, work):
            return SINGULAR, r, 0, -1, 0.0
        bad = _first_negative(new, lo, hi, neg_tol)
        if bad >= 0:
            return NEGATIVE, r, 0, bad, new[bad]
        for j in range(lo, hi):
            u[j] = new[j]
        if save_every > 0 and (phase + r + 1) % save_every == 0:
            saved[isave, :, :] = S
            isave += 1
    return OK, count, -1, -1, 0.0


@njit(cache=True)
def reduced_block(S, count, dt, b1, c1, l1, b2, c2, l2, Hd, Vd,
                  hl, hd, hu, vl, vd, vu, lo1, hi1, lo2, hi2, save_every, phase, saved, neg_tol):
    """Infection pair driven by prescribed totals ``Hd``, ``Vd``.

    ``Hd[r]`` is the total at the start of step ``r`` and ``Hd[r+1]`` at its
    end; the update matches the infection rows of :func:`full_block` when the
    totals coincide.
    """
    n = S.shape[1]
    sink = np.empty(n)
    rhs = np.empty(n)
    work = np.empty(n)
    new = np.zeros((2, n))
    isave = 0
    for r in range(count):
        for j in range(lo1, hi1):
            sink[j] = b1[r, j] + c1[r, j] * Hd[r, j] + l1[r, j] * S[1, j]
            rhs[j] = S[0, j] + dt * l1[r, j] * S[1, j] * Hd[r + 1, j]
        if not solve_shift(hl[r], hd[r], hu[r], sink, dt, rhs, new[0], lo1, hi1, work):
            return SINGULAR, r, 0, -1, 0.0
        for j in range(lo2, hi2):
            sink[j] = b2[r, j] + c2[r, j] * Vd[r, j] + l2[r, j] * S[0, j]
            rhs[j] = S[1, j] + dt * l2[r, j] * S[0, j] * Vd[r + 1, j]
        if not solve_shift(vl[r], vd[r], vu[r], sink, dt, rhs, new[1], lo2, hi2, work):
            return SINGULAR, r, 1, -1, 0.0
        for c in range(2):
            lo = lo1 if c == 0 else lo2
            hi = hi1 if c == 0 else hi2
            bad = _first_negative(new[c], lo, hi, neg_tol)
            if bad >= 0:
                return NEGATIVE, r, c, bad, new[c, bad]
            for j in range(lo, hi):
                S[c, j] = new[c, j]
        if save_every > 0 and (phase + r + 1) % save_every == 0:
            saved[isave, :, :] = S
            isave += 1
    return OK, count, -1, -1, 0.0


_BIG = 1e150


@njit(cache=True)
def _rescale(u, lo, hi):
    m = 0.0
    for j in range(lo, hi):
        a = abs(u[j])
        if a > m:
            m = a
    if m > _BIG or (0.0 < m < 1.0 / _BIG):
        for j in range(lo, hi):
            u[j] /= m
        return np.log(m)
    return 0.0


@njit(cache=True)
def scalar_linear_period(u, dt, decay, source, inv_mu, low, dia, up, lo, hi):
    """One period of ``u_t = (d u_x)_x - decay*u + source*u/mu``.

    Returns the log of the scale factor divided out along the way.
    """
    m = decay.shape[0]
    n = u.shape[0]
    rhs = np.empty(n)
    work = np.empty(n)
    new = np.zeros(n)
    logscale = 0.0
    for r in range(m):
        for j in range(lo, hi):
            rhs[j] = u[j] + dt * inv_mu * source[r, j] * u[j]
        if not solve_shift(low[r], dia[r], up[r], decay[r], dt, rhs, new, lo, hi, work):
            return np.nan
        for j in range(lo, hi):
            u[j] = new[j]
        logscale += _rescale(u, lo, hi)
    return logscale


@njit(cache=True)
def pair_linear_period(u1, u2, dt, decay1, decay2, coup1, coup2, inv_mu,
                       l1, d1, up1, l2, d2, up2, lo1, hi1, lo2, hi2):
    """One period of the cooperative pair with explicit cross coupling."""
    m = decay1.shape[0]
    n = u1.shape[0]
    rhs = np.empty(n)
    work = np.empty(n)
    new1 = np.zeros(n)
    new2 = np.zeros(n)
    logscale = 0.0
    for r in range(m):
        for j in range(lo1, hi1):
            rhs[j] = u1[j] + dt * inv_mu * coup1[r, j] * u2[j]
        if not solve_shift(l1[r], d1[r], up1[r], decay1[r], dt, rhs, new1, lo1, hi1, work):
            return np.nan
        for j in range(lo2, hi2):
            rhs[j] = u2[j] + dt * inv_mu * coup2[r, j] * u1[j]
        if not solve_shift(l2[r], d2[r], up2[r], decay2[r], dt, rhs, new2, lo2, hi2, work):
            return np.nan
        for j in range(lo1, hi1):
            u1[j] = new1[j]
        for j in range(lo2, hi2):
            u2[j] = new2[j]
        m1 = 0.0
        for j in range(lo1, hi1):
            if abs(u1[j]) > m1:
                m1 = abs(u1[j])
        for j in range(lo2, hi2):
            if abs(u2[j]) > m1:
                m1 = abs(u2[j])
        if m1 > _BIG or (0.0 < m1 < 1.0 / _BIG):
            for j in range(lo1, hi1):
                u1[j] /= m1
            for j in range(lo2, hi2):
                u2[j] /= m1
            logscale += np.log(m1)
    return logscale
