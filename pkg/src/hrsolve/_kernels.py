"""Jitted stencil and time-marching kernels.

All kernels work on C-contiguous 3D float64 arrays; lower-dimensional grids
pass trailing axes of size 1 (a size-1 axis contributes exactly zero to the
stencil, so one kernel covers 1D/2D/3D). Reductions are plain sequential
loops so reruns are bit-identical. The marchers advance many steps per call
to keep Python dispatch out of the hot path; they always leave the final
state in the primary (u, v, w) buffers.
"""

import math

from numba import njit


@njit(cache=True)
def lap3(f, ih0, ih1, ih2, out):
    # mirror ghosts: the out-of-range neighbor index clamps to the cell itself
    n0, n1, n2 = f.shape
    for i in range(n0):
        im = i - 1 if i > 0 else 0
        ip = i + 1 if i < n0 - 1 else n0 - 1
        for j in range(n1):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < n1 - 1 else n1 - 1
            for k in range(n2):
                km = k - 1 if k > 0 else 0
                kp = k + 1 if k < n2 - 1 else n2 - 1
                c = f[i, j, k]
                out[i, j, k] = (
                    (f[im, j, k] - 2.0 * c + f[ip, j, k]) * ih0
                    + (f[i, jm, k] - 2.0 * c + f[i, jp, k]) * ih1
                    + (f[i, j, km] - 2.0 * c + f[i, j, kp]) * ih2
                )


@njit(cache=True)
def cg_helmholtz(x, kappa, ih0, ih1, ih2, tol, maxit, invd, rb, pb, ab):
    """Solve (I - kappa*lap) sol = b in place, where x holds b on entry.

    Jacobi-preconditioned conjugate gradients on the SPD operator; invd is
    the precomputed inverse diagonal. The initial guess is b itself, so the
    initial residual is kappa*lap(b). Convergence is a relative 2-norm
    residual below tol. Returns (iterations, converged).
    """
    n0, n1, n2 = x.shape
    lap3(x, ih0, ih1, ih2, ab)
    bn2 = 0.0
    rn2 = 0.0
    rho = 0.0
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                bn2 += x[i, j, k] * x[i, j, k]
                rr = kappa * ab[i, j, k]
                rb[i, j, k] = rr
                pb[i, j, k] = rr * invd[i, j, k]
                rn2 += rr * rr
                rho += rr * rr * invd[i, j, k]
    thr2 = tol * tol * bn2
    if rn2 <= thr2:
        return 0, True
    if rn2 != rn2:
        return 0, False
    it = 0
    while it < maxit:
        lap3(pb, ih0, ih1, ih2, ab)
        pap = 0.0
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    av = pb[i, j, k] - kappa * ab[i, j, k]
                    ab[i, j, k] = av
                    pap += pb[i, j, k] * av
        alpha = rho / pap
        rn2 = 0.0
        rho_new = 0.0
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    x[i, j, k] += alpha * pb[i, j, k]
                    rr = rb[i, j, k] - alpha * ab[i, j, k]
                    rb[i, j, k] = rr
                    rn2 += rr * rr
                    rho_new += rr * rr * invd[i, j, k]
        it += 1
        if rn2 <= thr2:
            return it, True
        if rn2 != rn2:
            return it, False
        beta = rho_new / rho
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    pb[i, j, k] = rb[i, j, k] * invd[i, j, k] + beta * pb[i, j, k]
        rho = rho_new
    return it, False


@njit(cache=True)
def reaction_rhs(u, v, w, jarr, a, b, al, be, q, r, c, d1, d2, d3,
                 ih0, ih1, ih2, lu, out_u, out_v, out_w):
    """Full semi-discrete right-hand side: diagonal diffusion plus reaction."""
    n0, n1, n2 = u.shape
    if d1 > 0.0:
        lap3(u, ih0, ih1, ih2, lu)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    uu = u[i, j, k]
                    out_u[i, j, k] = d1 * lu[i, j, k] + (
                        a * uu * uu - b * uu * uu * uu + v[i, j, k] - w[i, j, k] + jarr[i, j, k]
                    )
    else:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    uu = u[i, j, k]
                    out_u[i, j, k] = a * uu * uu - b * uu * uu * uu + v[i, j, k] - w[i, j, k] + jarr[i, j, k]
    if d2 > 0.0:
        lap3(v, ih0, ih1, ih2, lu)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    uu = u[i, j, k]
                    out_v[i, j, k] = d2 * lu[i, j, k] + (al - be * uu * uu - v[i, j, k])
    else:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    uu = u[i, j, k]
                    out_v[i, j, k] = al - be * uu * uu - v[i, j, k]
    if d3 > 0.0:
        lap3(w, ih0, ih1, ih2, lu)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    out_w[i, j, k] = d3 * lu[i, j, k] + (q * (u[i, j, k] - c) - r * w[i, j, k])
    else:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    out_w[i, j, k] = q * (u[i, j, k] - c) - r * w[i, j, k]


@njit(cache=True)
def gamma_increment(u, v, w, un, vn, wn, jarr, a, b, al, be, q, r, c):
    """Midpoint-rule increment of the reaction path integral: <f(mid), g_new - g_old>.

    The caller multiplies by the cell volume.
    """
    n0, n1, n2 = u.shape
    acc = 0.0
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                mu = 0.5 * (u[i, j, k] + un[i, j, k])
                mv = 0.5 * (v[i, j, k] + vn[i, j, k])
                mw = 0.5 * (w[i, j, k] + wn[i, j, k])
                fu = a * mu * mu - b * mu * mu * mu + mv - mw + jarr[i, j, k]
                fv = al - be * mu * mu - mv
                fw = q * (mu - c) - r * mw
                acc += (
                    fu * (un[i, j, k] - u[i, j, k])
                    + fv * (vn[i, j, k] - v[i, j, k])
                    + fw * (wn[i, j, k] - w[i, j, k])
                )
    return acc


@njit(cache=True)
def _copy3(src_u, src_v, src_w, dst_u, dst_v, dst_w):
    n0, n1, n2 = src_u.shape
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                dst_u[i, j, k] = src_u[i, j, k]
                dst_v[i, j, k] = src_v[i, j, k]
                dst_w[i, j, k] = src_w[i, j, k]


@njit(cache=True)
def imex_march(u, v, w, un, vn, wn, jarr, a, b, al, be, q, r, c,
               d1, d2, d3, dt, ih0, ih1, ih2, tol, maxit,
               invd1, invd2, invd3, rb, pb, ab, ksteps):
    """ksteps of IMEX Euler: explicit reaction predictor, implicit diffusion.

    Returns (cg_iterations, all_converged, gamma_increment_total, steps_done);
    steps_done < ksteps signals a non-finite state (blow-up) detected through
    the gamma increment.
    """
    n0, n1, n2 = u.shape
    cu, cv, cw = u, v, w
    nu, nv, nw = un, vn, wn
    iters = 0
    ok = True
    dFtot = 0.0
    done = 0
    for _ in range(ksteps):
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    uu = cu[i, j, k]
                    vv = cv[i, j, k]
                    ww = cw[i, j, k]
                    nu[i, j, k] = uu + dt * (a * uu * uu - b * uu * uu * uu + vv - ww + jarr[i, j, k])
                    nv[i, j, k] = vv + dt * (al - be * uu * uu - vv)
                    nw[i, j, k] = ww + dt * (q * (uu - c) - r * ww)
        if d1 > 0.0:
            it, conv = cg_helmholtz(nu, dt * d1, ih0, ih1, ih2, tol, maxit, invd1, rb, pb, ab)
            iters += it
            ok = ok and conv
        if d2 > 0.0:
            it, conv = cg_helmholtz(nv, dt * d2, ih0, ih1, ih2, tol, maxit, invd2, rb, pb, ab)
            iters += it
            ok = ok and conv
        if d3 > 0.0:
            it, conv = cg_helmholtz(nw, dt * d3, ih0, ih1, ih2, tol, maxit, invd3, rb, pb, ab)
            iters += it
            ok = ok and conv
        dF = gamma_increment(cu, cv, cw, nu, nv, nw, jarr, a, b, al, be, q, r, c)
        cu, nu = nu, cu
        cv, nv = nv, cv
        cw, nw = nw, cw
        done += 1
        dFtot += dF
        if not (ok and math.isfinite(dF)):
            break
    if done % 2 == 1:
        # state currently sits in the scratch triple; put it back in (u, v, w)
        _copy3(cu, cv, cw, nu, nv, nw)
    return iters, ok, dFtot, done


@njit(cache=True)
def rk4_march(u, v, w, un, vn, wn, jarr, a, b, al, be, q, r, c,
              d1, d2, d3, dt, ih0, ih1, ih2,
              ku, kv, kw, tu, tv, tw, su, sv, sw, lu, ksteps):
    """ksteps of the classical four-stage scheme on the full right-hand side.

    Returns (gamma_increment_total, steps_done).
    """
    n0, n1, n2 = u.shape
    cu, cv, cw = u, v, w
    nu, nv, nw = un, vn, wn
    dFtot = 0.0
    done = 0
    for _ in range(ksteps):
        reaction_rhs(cu, cv, cw, jarr, a, b, al, be, q, r, c, d1, d2, d3, ih0, ih1, ih2, lu, ku, kv, kw)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    su[i, j, k] = ku[i, j, k]
                    sv[i, j, k] = kv[i, j, k]
                    sw[i, j, k] = kw[i, j, k]
                    tu[i, j, k] = cu[i, j, k] + 0.5 * dt * ku[i, j, k]
                    tv[i, j, k] = cv[i, j, k] + 0.5 * dt * kv[i, j, k]
                    tw[i, j, k] = cw[i, j, k] + 0.5 * dt * kw[i, j, k]
        reaction_rhs(tu, tv, tw, jarr, a, b, al, be, q, r, c, d1, d2, d3, ih0, ih1, ih2, lu, ku, kv, kw)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    su[i, j, k] += 2.0 * ku[i, j, k]
                    sv[i, j, k] += 2.0 * kv[i, j, k]
                    sw[i, j, k] += 2.0 * kw[i, j, k]
                    tu[i, j, k] = cu[i, j, k] + 0.5 * dt * ku[i, j, k]
                    tv[i, j, k] = cv[i, j, k] + 0.5 * dt * kv[i, j, k]
                    tw[i, j, k] = cw[i, j, k] + 0.5 * dt * kw[i, j, k]
        reaction_rhs(tu, tv, tw, jarr, a, b, al, be, q, r, c, d1, d2, d3, ih0, ih1, ih2, lu, ku, kv, kw)
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    su[i, j, k] += 2.0 * ku[i, j, k]
                    sv[i, j, k] += 2.0 * kv[i, j, k]
                    sw[i, j, k] += 2.0 * kw[i, j, k]
                    tu[i, j, k] = cu[i, j, k] + dt * ku[i, j, k]
                    tv[i, j, k] = cv[i, j, k] + dt * kv[i, j, k]
                    tw[i, j, k] = cw[i, j, k] + dt * kw[i, j, k]
        reaction_rhs(tu, tv, tw, jarr, a, b, al, be, q, r, c, d1, d2, d3, ih0, ih1, ih2, lu, ku, kv, kw)
        sixth = dt / 6.0
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    nu[i, j, k] = cu[i, j, k] + sixth * (su[i, j, k] + ku[i, j, k])
                    nv[i, j, k] = cv[i, j, k] + sixth * (sv[i, j, k] + kv[i, j, k])
                    nw[i, j, k] = cw[i, j, k] + sixth * (sw[i, j, k] + kw[i, j, k])
        dF = gamma_increment(cu, cv, cw, nu, nv, nw, jarr, a, b, al, be, q, r, c)
        cu, nu = nu, cu
        cv, nv = nv, cv
        cw, nw = nw, cw
        done += 1
        dFtot += dF
        if not math.isfinite(dF):
            break
    if done % 2 == 1:
        _copy3(cu, cv, cw, nu, nv, nw)
    return dFtot, done
