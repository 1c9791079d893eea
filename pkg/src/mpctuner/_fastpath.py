"""JIT-compiled kernel for the controller's cost, gradient and penalties.

One solver evaluation fuses the state roll-out, end-effector Jacobians,
collision-sphere geometry, bilinear field queries, the blended cost, the
quadratic constraint penalties and the exact gradient into a single pass.
This sits inside the innermost loop of every simulation tick, so it is the
one place in the package written for the machine rather than the reader;
the formulas match the docstrings in ``controller``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _bilinear(dist, W, H, ox, oy, res, px, py):
    """Bilinear field value, its in-cell gradient, and an out-of-map flag.

    Mirrors Esdf.query exactly: clamped constant extension outside the
    cell-center hull.
    """
    gx = (px - ox) / res - 0.5
    gy = (py - oy) / res - 0.5
    out = gx < -0.5 or gx > W - 0.5 or gy < -0.5 or gy > H - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > W - 1.0:
        gx = W - 1.0
    if gy < 0.0:
        gy = 0.0
    elif gy > H - 1.0:
        gy = H - 1.0
    x0 = int(gx)
    y0 = int(gy)
    if x0 > W - 2:
        x0 = W - 2
    if y0 > H - 2:
        y0 = H - 2
    wx = gx - x0
    wy = gy - y0
    f00 = dist[y0, x0]
    f10 = dist[y0, x0 + 1]
    f01 = dist[y0 + 1, x0]
    f11 = dist[y0 + 1, x0 + 1]
    val = (1 - wx) * (1 - wy) * f00 + wx * (1 - wy) * f10 \
        + (1 - wx) * wy * f01 + wx * wy * f11
    ddx = ((1 - wy) * (f10 - f00) + wy * (f11 - f01)) / res
    ddy = ((1 - wx) * (f01 - f00) + wx * (f11 - f10)) / res
    return val, ddx, ddy, out


@njit(cache=True)
def eval_cost_grad(q0, U, Ts, Np, Nc, alpha, qdiag, dref,
                   c1, c2, c3,
                   rail_ox, rail_oy, phi, l1, l2,
                   links, offs,
                   dist, eox, eoy, eres,
                   qmin, qmax, amax, jmax, vee,
                   with_pen, rho, u_prev):
    """Returns (total_cost, horizon_cost, grad (Nc,3), max_residual, out_flag).

    horizon_cost is the blended tracking + obstacle cost; total_cost adds
    rho * sum of squared constraint residuals when with_pen. The gradient is
    exact for total_cost. max_residual covers position, acceleration, jerk
    and end-effector speed.
    """
    H = dist.shape[0]
    W = dist.shape[1]
    n_sph = links.shape[0]
    K = Np + 1
    cphi = np.cos(phi)
    sphi = np.sin(phi)

    # Roll-out with move blocking: inputs held at U[Nc-1] beyond Nc.
    Q = np.empty((K, 3))
    for c in range(3):
        Q[0, c] = q0[c]
    for k in range(1, K):
        j = k - 1
        if j > Nc - 1:
            j = Nc - 1
        for c in range(3):
            Q[k, c] = Q[k - 1, c] + Ts * U[j, c]

    gq = np.zeros((K, 3))
    gu = np.zeros((Nc, 3))
    h_cost = 0.0        # blended tracking + obstacle cost
    p_cost = 0.0        # quadratic penalty cost
    max_resid = 0.0
    out_flag = False
    one_m_alpha = 1.0 - alpha

    # Tracking term and end-effector speed penalty over the control horizon.
    for k in range(Nc):
        a2 = phi + Q[k, 1]
        a23 = a2 + Q[k, 2]
        s2 = np.sin(a2)
        co2 = np.cos(a2)
        s23 = np.sin(a23)
        co23 = np.cos(a23)
        j01 = -l1 * s2 - l2 * s23
        j02 = -l2 * s23
        j11 = l1 * co2 + l2 * co23
        j12 = l2 * co23
        u0 = U[k, 0]
        u1 = U[k, 1]
        u2 = U[k, 2]
        vx = cphi * u0 + j01 * u1 + j02 * u2
        vy = sphi * u0 + j11 * u1 + j12 * u2
        vth = u1 + u2
        # (dJ/dq2 u) and (dJ/dq3 u), x and y components (theta row is constant)
        dj2x = (-l1 * co2 - l2 * co23) * u1 + (-l2 * co23) * u2
        dj2y = (-l1 * s2 - l2 * s23) * u1 + (-l2 * s23) * u2
        dj3x = -l2 * co23 * (u1 + u2)
        dj3y = -l2 * s23 * (u1 + u2)

        if alpha > 0.0:
            rx = vx - dref[0]
            ry = vy - dref[1]
            rt = vth - dref[2]
            h_cost += alpha * (qdiag[0] * rx * rx + qdiag[1] * ry * ry
                               + qdiag[2] * rt * rt)
            wx_ = 2.0 * alpha * qdiag[0] * rx
            wy_ = 2.0 * alpha * qdiag[1] * ry
            wt_ = 2.0 * alpha * qdiag[2] * rt
            gu[k, 0] += wx_ * cphi + wy_ * sphi
            gu[k, 1] += wx_ * j01 + wy_ * j11 + wt_
            gu[k, 2] += wx_ * j02 + wy_ * j12 + wt_
            gq[k, 1] += wx_ * dj2x + wy_ * dj2y
            gq[k, 2] += wx_ * dj3x + wy_ * dj3y

        if with_pen:
            speed = np.sqrt(vx * vx + vy * vy)
            viol = speed - vee
            if viol > max_resid:
                max_resid = viol
            if viol > 0.0:
                p_cost += rho * viol * viol
                if speed < 1e-12:
                    speed = 1.0
                ux = vx / speed
                uy = vy / speed
                cf = rho * 2.0 * viol
                gu[k, 0] += cf * (ux * cphi + uy * sphi)
                gu[k, 1] += cf * (ux * j01 + uy * j11)
                gu[k, 2] += cf * (ux * j02 + uy * j12)
                gq[k, 1] += cf * (ux * dj2x + uy * dj2y)
                gq[k, 2] += cf * (ux * dj3x + uy * dj3y)

    # Obstacle barrier over the predicted states k = 1..Np.
    if one_m_alpha > 0.0:
        for k in range(1, K):
            bx = rail_ox + Q[k, 0] * cphi
            by = rail_oy + Q[k, 0] * sphi
            a2 = phi + Q[k, 1]
            a23 = a2 + Q[k, 2]
            s2 = np.sin(a2)
            co2 = np.cos(a2)
            s23 = np.sin(a23)
            co23 = np.cos(a23)
            ex = bx + l1 * co2
            ey = by + l1 * s2
            for m in range(n_sph):
                lox = offs[m, 0]
                loy = offs[m, 1]
                link = links[m]
                if link == 0:
                    px = bx + cphi * lox - sphi * loy
                    py = by + sphi * lox + cphi * loy
                elif link == 1:
                    px = bx + co2 * lox - s2 * loy
                    py = by + s2 * lox + co2 * loy
                else:
                    px = ex + co23 * lox - s23 * loy
                    py = ey + s23 * lox + co23 * loy
                sd, ddx, ddy, out = _bilinear(dist, W, H, eox, eoy, eres, px, py)
                if out:
                    out_flag = True
                z = c2 * (sd - c3)
                if z > 500.0:
                    z = 500.0
                elif z < -500.0:
                    z = -500.0
                b = c1 / (1.0 + np.exp(z))
                h_cost += one_m_alpha * b
                db = -c2 * b * (1.0 - b / c1)
                w = one_m_alpha * db
                gx_ = w * ddx
                gy_ = w * ddy
                gq[k, 0] += gx_ * cphi + gy_ * sphi
                if link == 1:
                    d1x = -s2 * lox - co2 * loy
                    d1y = co2 * lox - s2 * loy
                    gq[k, 1] += gx_ * d1x + gy_ * d1y
                elif link == 2:
                    d2x = -s23 * lox - co23 * loy
                    d2y = co23 * lox - s23 * loy
                    gq[k, 1] += gx_ * (-l1 * s2 + d2x) + gy_ * (l1 * co2 + d2y)
                    gq[k, 2] += gx_ * d2x + gy_ * d2y

    if with_pen:
        # Joint position bounds along the roll-out.
        for k in range(1, K):
            for c in range(3):
                hi = Q[k, c] - qmax[c]
                lo = qmin[c] - Q[k, c]
                if hi > max_resid:
                    max_resid = hi
                if lo > max_resid:
                    max_resid = lo
                if hi > 0.0:
                    p_cost += rho * hi * hi
                    gq[k, c] += rho * 2.0 * hi
                if lo > 0.0:
                    p_cost += rho * lo * lo
                    gq[k, c] -= rho * 2.0 * lo

        # Acceleration (anchored at u_prev) and jerk on input differences.
        for c in range(3):
            prev = u_prev[c]
            for k in range(Nc):
                acc = (U[k, c] - prev) / Ts
                va = abs(acc) - amax[c]
                if va > max_resid:
                    max_resid = va
                if va > 0.0:
                    p_cost += rho * va * va
                    s = 1.0 if acc > 0.0 else -1.0
                    dd = rho * 2.0 * va * s / Ts
                    gu[k, c] += dd
                    if k > 0:
                        gu[k - 1, c] -= dd
                prev = U[k, c]
            for k in range(1, Nc):
                um2 = u_prev[c] if k == 1 else U[k - 2, c]
                jk = (U[k, c] - 2.0 * U[k - 1, c] + um2) / (Ts * Ts)
                vj = abs(jk) - jmax[c]
                if vj > max_resid:
                    max_resid = vj
                if vj > 0.0:
                    p_cost += rho * vj * vj
                    s = 1.0 if jk > 0.0 else -1.0
                    dd = rho * 2.0 * vj * s / (Ts * Ts)
                    gu[k, c] += dd
                    gu[k - 1, c] -= 2.0 * dd
                    if k >= 2:
                        gu[k - 2, c] += dd

    # Chain rule through the roll-out: grad = gu + Ts * counts^T gq. The
    # blocked input U[Nc-1] is applied (k - Nc + 1) times up to state k; every
    # other U[j] exactly once before state k > j, so suffix sums suffice.
    grad = gu
    sfx = np.zeros(3)
    for k in range(K - 1, Nc - 1, -1):
        for c in range(3):
            sfx[c] += gq[k, c]
            grad[Nc - 1, c] += Ts * (k - Nc + 1) * gq[k, c]
    for j in range(Nc - 2, -1, -1):
        for c in range(3):
            sfx[c] += gq[j + 1, c]
            grad[j, c] += Ts * sfx[c]

    return h_cost + p_cost, h_cost, grad, max_resid, out_flag
