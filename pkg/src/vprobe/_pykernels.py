"""Pure-Python equilibrium kernels.

Reference implementation of the per-step contact solve. ``_ckernels.pyx``
mirrors this file operation for operation; keep the two in step.

Every contact branch is a one-parameter family of equilibrium states whose
stylus depth ``z`` increases with the parameter ``p``:

    SLIDE         p = surface tilt theta, sphere tangent to the mass top
    EDGE          p = contact-normal angle phi, sphere resting on the mass corner
    CORNER_FLANK  p = theta, mass corner riding on the cone flank
    FLANK         p = -q, mass surface flush with the cone flank, resultant
                  load at arm q from the beam tip (q < 0 lies on the beam)

``prm`` is the tuple (c_qq, c_qm, c_mm, L, EI, c_s, x_s, Lm, R, theta_f).
"""

from math import acos, asin, cos, sin, tan

import numpy as np

SLIDE = 0
EDGE = 1
CORNER_FLANK = 2
FLANK = 3

BACKEND = "python"


def branch_terms(kind, p, prm):
    """Return (theta, phi, arm, g_theta, g_delta, zoff) at parameter ``p``.

    The tip rotation is ``F * g_theta`` and the tip deflection ``F * g_delta``
    for a contact force of magnitude F; the stylus depth is ``delta + zoff``.
    """
    c_qq, c_qm, c_mm, L, EI, c_s, x_s, Lm, R, theta_f = prm
    if kind == SLIDE:
        theta = p
        phi = p
        c = cos(p)
        arm = x_s / c - R * tan(p)
        zoff = R - (R - x_s * sin(p)) / c
    elif kind == EDGE:
        phi = p
        theta = acos((x_s - R * sin(p)) / Lm)
        c = cos(phi)
        arm = Lm * cos(phi - theta)
        zoff = R + Lm * sin(theta) - R * c
    elif kind == CORNER_FLANK:
        theta = p
        phi = theta_f
        c = cos(phi)
        arm = Lm * cos(phi - theta)
        zoff = R + Lm * sin(theta) + ((x_s - Lm * cos(theta)) * sin(phi) - R) / c
    else:
        theta = theta_f
        phi = theta_f
        c = cos(phi)
        arm = -p
        zoff = R - (R - x_s * sin(phi)) / c
        if arm < 0.0:
            a = L + arm
            g_theta = c * (a * a / (2.0 * EI) + c_s * a)
            g_delta = c * (a * a * a / (3.0 * EI) + a * a * (L - a) / (2.0 * EI) + c_s * a * L)
            return theta, phi, arm, g_theta, g_delta, zoff
    g_theta = c_qm * c + c_mm * arm
    g_delta = c_qq * c + c_qm * arm
    return theta, phi, arm, g_theta, g_delta, zoff


def residual(kind, p, z, prm):
    """Force-balance mismatch (N): force demanded by the rotation minus by the deflection."""
    theta, phi, arm, g_theta, g_delta, zoff = branch_terms(kind, p, prm)
    return theta / g_theta - (z - zoff) / g_delta


def branch_depth(kind, p, prm):
    theta, phi, arm, g_theta, g_delta, zoff = branch_terms(kind, p, prm)
    return theta * g_delta / g_theta + zoff


def solve_branch(kind, z, lo, hi, guess, prm, tol, maxit):
    """Safeguarded Newton/bisection for ``residual(p) = 0`` on [lo, hi].

    Returns (p, residual, iterations, converged). The residual must not be
    positive at ``lo`` nor negative at ``hi``.
    """
    lo0 = lo
    hi0 = hi
    r_lo = residual(kind, lo, z, prm)
    if r_lo >= 0.0:
        return lo, r_lo, 0, abs(r_lo) < tol
    r_hi = residual(kind, hi, z, prm)
    if r_hi <= 0.0:
        return hi, r_hi, 0, abs(r_hi) < tol
    p = guess
    if not lo < p < hi:
        p = 0.5 * (lo + hi)
    h = 1e-7 * (hi0 - lo0)
    r = residual(kind, p, z, prm)
    for it in range(1, maxit + 1):
        if abs(r) < tol:
            return p, r, it, True
        if r < 0.0:
            lo = p
        else:
            hi = p
        pa = p - h
        pb = p + h
        if pa < lo0:
            pa = p
        if pb > hi0:
            pb = p
        slope = (residual(kind, pb, z, prm) - residual(kind, pa, z, prm)) / (pb - pa)
        step_ok = False
        if slope > 0.0:
            p_new = p - r / slope
            step_ok = lo < p_new < hi
        if not step_ok:
            p_new = 0.5 * (lo + hi)
        if p_new == p or hi - lo <= 4e-16 * (abs(lo) + abs(hi)):
            return p, r, it, abs(r) < tol
        p = p_new
        r = residual(kind, p, z, prm)
    return p, r, maxit, abs(r) < tol


def solve_sequence(kinds, los, his, zs, prm, tol, maxit):
    """Solve a run of steps; the guess for each step continues from the previous one.

    ``kinds``, ``los``, ``his`` give the branch and its parameter bracket per
    step. Returns arrays (p, residual, iterations, converged).
    """
    n = len(zs)
    ps = np.empty(n)
    rs = np.empty(n)
    its = np.empty(n, dtype=np.int64)
    ok = np.empty(n, dtype=np.bool_)
    prev_kind = -1
    prev_p = 0.0
    for i in range(n):
        kind = int(kinds[i])
        lo = float(los[i])
        hi = float(his[i])
        if kind == prev_kind:
            guess = prev_p
        else:
            guess = 0.5 * (lo + hi)
        p, r, it, conv = solve_branch(kind, float(zs[i]), lo, hi, guess, prm, tol, maxit)
        ps[i] = p
        rs[i] = r
        its[i] = it
        ok[i] = conv
        prev_kind = kind
        prev_p = p
    return ps, rs, its, ok


def edge_angle(theta, x_s, Lm, R):
    """Contact-normal angle for the mass corner touching the spherical tip."""
    return asin((x_s - Lm * cos(theta)) / R)
