"""Compiled weighted Fréchet-point iterations (reweighted step, any p >= 1).

Follows the array implementation in ``stats``: lowest-cost iterate is kept,
p = 1 uses Vardi-Zhang damping and a direct optimality test at the nearest
data point.  Problems are independent; ``kind`` as in ``_cppa_kernels``.

For p = 1 on the Euclidean and SPD backends the reweighted step is replaced by
a Newton step whenever one is available (Hessian of the cost in normal
coordinates at the iterate, curvature ignored).  A Newton step that does not
lower the cost is undone and the reweighted step taken instead, so every
accepted iterate still descends.
"""
import numpy as np
import numba as nb

from ._spd_kernels import EIG_FLOOR, _compose, _eigh3, _load_sym, _roots, _sandwich

EUCLIDEAN, SPHERE, SPD = 0, 1, 2
ANTIPODAL_TOL = 1e-12
PIVOT_TOL = 1e-12
_R2 = np.sqrt(2.0)


@nb.njit(cache=True)
def _solve_spd_system(H, rhs, out):
    """Gaussian elimination with partial pivoting; False when (nearly) singular."""
    n = H.shape[0]
    scale = 0.0
    for i in range(n):
        scale += abs(H[i, i])
    if not scale > 0:
        return False
    for col in range(n):
        piv = col
        for r in range(col + 1, n):
            if abs(H[r, col]) > abs(H[piv, col]):
                piv = r
        if abs(H[piv, col]) <= PIVOT_TOL * scale:
            return False
        if piv != col:
            for j in range(n):
                H[col, j], H[piv, j] = H[piv, j], H[col, j]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(col + 1, n):
            f = H[r, col] / H[col, col]
            for j in range(col, n):
                H[r, j] -= f * H[col, j]
            rhs[r] -= f * rhs[col]
    for i in range(n - 1, -1, -1):
        acc = rhs[i]
        for j in range(i + 1, n):
            acc -= H[i, j] * out[j]
        out[i] = acc / H[i, i]
    return True


@nb.njit(cache=True)
def _to_coords(kind, v, isq, u, a, m, tmp):
    """Normal coordinates of the tangent vector ``v`` (whitened for SPD)."""
    if kind == EUCLIDEAN:
        for i in range(v.shape[0]):
            u[i] = v[i]
        return
    _load_sym(v.reshape(3, 3), a)
    _sandwich(isq, a, m, tmp)
    u[0], u[1], u[2] = m[0, 0], m[1, 1], m[2, 2]
    u[3], u[4], u[5] = _R2 * m[0, 1], _R2 * m[0, 2], _R2 * m[1, 2]


@nb.njit(cache=True)
def _from_coords(kind, u, sq, g, a, tmp):
    if kind == EUCLIDEAN:
        for i in range(u.shape[0]):
            g[i] = u[i]
        return
    a[0, 0], a[1, 1], a[2, 2] = u[0], u[1], u[2]
    a[0, 1] = a[1, 0] = u[3] / _R2
    a[0, 2] = a[2, 0] = u[4] / _R2
    a[1, 2] = a[2, 1] = u[5] / _R2
    _sandwich(sq, a, g.reshape(3, 3), tmp)


@nb.njit(cache=True)
def _newton_p1(kind, V, d, W, sq, isq, g, H, rhs, sol, u, a, m, tmp):
    """Newton step for ``sum w_i d_i`` into ``g``; all active d_i must be positive."""
    n = H.shape[0]
    H[:, :] = 0.0
    rhs[:] = 0.0
    for i in range(V.shape[0]):
        if W[i] <= 0:
            continue
        _to_coords(kind, V[i], isq, u, a, m, tmp)
        ai = W[i] / d[i]
        for r in range(n):
            ur = u[r] / d[i]
            rhs[r] += W[i] * ur
            H[r, r] += ai
            for c in range(n):
                H[r, c] -= ai * ur * u[c] / d[i]
    if not _solve_spd_system(H, rhs, sol):
        return False
    for r in range(n):
        if not np.isfinite(sol[r]):
            return False
    _from_coords(kind, sol, sq, g, a, tmp)
    return True


@nb.njit(cache=True)
def _base(kind, z, sq, isq, a, w, v):
    if kind == SPD:
        _load_sym(z.reshape(3, 3), a)
        _roots(a, w, v, sq, isq)


@nb.njit(cache=True)
def _log(kind, z, y, sq, isq, out, a, m, w, v, fw, lx, tmp):
    """Log of y at z into ``out``; returns the distance, or -1 if antipodal."""
    c = z.shape[0]
    if kind == EUCLIDEAN:
        acc = 0.0
        for i in range(c):
            out[i] = y[i] - z[i]
            acc += out[i] * out[i]
        return np.sqrt(acc)
    if kind == SPHERE:
        dot = 0.0
        for i in range(c):
            dot += z[i] * y[i]
        if dot <= -1.0 + ANTIPODAL_TOL:
            return -1.0
        acc = 0.0
        for i in range(c):
            out[i] = y[i] - dot * z[i]
            acc += out[i] * out[i]
        nrm = np.sqrt(acc)
        th = np.arctan2(nrm, dot)
        if nrm > 0:
            for i in range(c):
                out[i] *= th / nrm
        return th
    _load_sym(y.reshape(3, 3), a)
    _sandwich(isq, a, m, tmp)
    _eigh3(m, w, v)
    acc = 0.0
    for i in range(3):
        lam = w[i]
        if not lam > EIG_FLOOR:
            lam = EIG_FLOOR
        fw[i] = np.log(lam)
        acc += fw[i] * fw[i]
    _compose(v, fw, lx)
    _sandwich(sq, lx, out.reshape(3, 3), tmp)
    return np.sqrt(acc)


@nb.njit(cache=True)
def _norm(kind, g, isq, m, tmp, a):
    c = g.shape[0]
    if kind != SPD:
        acc = 0.0
        for i in range(c):
            acc += g[i] * g[i]
        return np.sqrt(acc)
    _load_sym(g.reshape(3, 3), a)
    _sandwich(isq, a, m, tmp)
    acc = 0.0
    for i in range(3):
        for j in range(3):
            acc += m[i, j] * m[i, j]
    return np.sqrt(acc)


@nb.njit(cache=True)
def _exp(kind, z, g, sq, isq, out, a, m, w, v, fw, ex, tmp):
    c = z.shape[0]
    if kind == EUCLIDEAN:
        for i in range(c):
            out[i] = z[i] + g[i]
        return
    if kind == SPHERE:
        acc = 0.0
        for i in range(c):
            acc += g[i] * g[i]
        t = np.sqrt(acc)
        if t == 0:
            for i in range(c):
                out[i] = z[i]
            return
        ct, st = np.cos(t), np.sin(t) / t
        acc = 0.0
        for i in range(c):
            out[i] = ct * z[i] + st * g[i]
            acc += out[i] * out[i]
        nrm = np.sqrt(acc)
        for i in range(c):
            out[i] /= nrm
        return
    _load_sym(g.reshape(3, 3), a)
    _sandwich(isq, a, m, tmp)
    _eigh3(m, w, v)
    for i in range(3):
        fw[i] = np.exp(w[i])
    _compose(v, fw, ex)
    _sandwich(sq, ex, out.reshape(3, 3), tmp)


@nb.njit(cache=True)
def frechet_run(kind, points, weights, p, z0, max_iters, tol, hit_tol, record):
    """Returns (best_z, best_cost, iters, converged, history, status)."""
    nb_, nw, c = points.shape
    best_z = z0.copy()
    best_cost = np.full(nb_, np.inf)
    iters = np.zeros(nb_, dtype=np.int64)
    conv = np.zeros(nb_, dtype=np.bool_)
    hist = np.full((max_iters + 1 if record else 1, nb_), np.nan)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    sq2 = np.empty((3, 3))
    isq2 = np.empty((3, 3))
    a = np.empty((3, 3))
    m = np.empty((3, 3))
    w3 = np.empty(3)
    v3 = np.empty((3, 3))
    fw = np.empty(3)
    lx = np.empty((3, 3))
    tmp = np.empty((3, 3))
    V = np.empty((nw, c))
    d = np.empty(nw)
    g = np.empty(c)
    z = np.empty(c)
    znew = np.empty(c)
    zbase = np.empty(c)
    nc = c if kind == EUCLIDEAN else 6
    newton_ok = p == 1.0 and kind != SPHERE
    H = np.empty((nc, nc))
    rhs = np.empty(nc)
    sol = np.empty(nc)
    u = np.empty(nc)
    for b in range(nb_):
        P = points[b]
        W = weights[b]
        z[:] = z0[b]
        wsum = 0.0
        for i in range(nw):
            wsum += W[i]
        k = 0
        pending = False  # a Newton step from zbase awaits its cost check
        base_cost = np.inf
        allow = True
        while True:
            # logs, cost
            _base(kind, z, sq, isq, a, w3, v3)
            cost = 0.0
            dmax = 0.0
            for i in range(nw):
                if W[i] > 0:
                    di = _log(kind, z, P[i], sq, isq, V[i], a, m, w3, v3, fw, lx, tmp)
                    if di < 0:
                        return best_z, best_cost, iters, conv, hist, 1
                    d[i] = di
                    cost += W[i] * di**p
                    if di > dmax:
                        dmax = di
                else:
                    d[i] = 0.0
            cost /= p
            if record:
                hist[k, b] = cost
            if cost < best_cost[b]:
                best_cost[b] = cost
                best_z[b] = z
            if pending:
                pending = False
                if not cost < base_cost:
                    # undo the Newton step, take the reweighted step from zbase
                    z[:] = zbase
                    k -= 1
                    iters[b] = k
                    allow = False
                    continue
            if k == max_iters:
                break
            # reweighted step
            thr = hit_tol * (dmax if dmax > 1.0 else 1.0)
            for j in range(c):
                g[j] = 0.0
            csum = 0.0
            held = 0.0
            for i in range(nw):
                if W[i] <= 0:
                    continue
                if p == 2.0:
                    ci = W[i]
                elif d[i] <= thr:
                    held += W[i]
                    continue
                else:
                    ci = W[i] * d[i] ** (p - 2.0)
                csum += ci
                for j in range(c):
                    g[j] += ci * V[i, j]
            if p == 1.0:
                pull = _norm(kind, g, isq, m, tmp, a)
                damp = 0.0
                if pull > 0:
                    damp = 1.0 - held / pull
                    if damp < 0.0:
                        damp = 0.0
            else:
                damp = 1.0
            if csum > 0:
                for j in range(c):
                    g[j] *= damp / csum
            else:
                for j in range(c):
                    g[j] = 0.0
            res = _norm(kind, g, isq, m, tmp, a)
            if res < tol:
                conv[b] = True
                break
            if p == 1.0:
                # optimality test at the nearest data point
                jn = -1
                dj = np.inf
                for i in range(nw):
                    if W[i] > 0 and d[i] < dj:
                        dj = d[i]
                        jn = i
                if dj <= 4.0 * res and dj > thr:
                    zj = P[jn]
                    _base(kind, zj, sq2, isq2, a, w3, v3)
                    dmax2 = 0.0
                    for i in range(nw):
                        if W[i] > 0:
                            di = _log(kind, zj, P[i], sq2, isq2, V[i], a, m, w3, v3, fw, lx, tmp)
                            if di < 0:
                                return best_z, best_cost, iters, conv, hist, 1
                            d[i] = di
                            if di > dmax2:
                                dmax2 = di
                    thr2 = hit_tol * (dmax2 if dmax2 > 1.0 else 1.0)
                    for j in range(c):
                        g[j] = 0.0
                    held2 = 0.0
                    cost2 = 0.0
                    for i in range(nw):
                        if W[i] <= 0:
                            continue
                        cost2 += W[i] * d[i]
                        if d[i] <= thr2:
                            held2 += W[i]
                            continue
                        for j in range(c):
                            g[j] += W[i] / d[i] * V[i, j]
                    if _norm(kind, g, isq2, m, tmp, a) <= held2:
                        if cost2 <= best_cost[b]:
                            best_cost[b] = cost2
                            best_z[b] = zj
                        conv[b] = True
                        break
                    # restore the step at z
                    _base(kind, z, sq, isq, a, w3, v3)
                    for i in range(nw):
                        if W[i] > 0:
                            d[i] = _log(kind, z, P[i], sq, isq, V[i], a, m, w3, v3, fw, lx, tmp)
                    for j in range(c):
                        g[j] = 0.0
                    csum = 0.0
                    held = 0.0
                    for i in range(nw):
                        if W[i] <= 0:
                            continue
                        if d[i] <= thr:
                            held += W[i]
                            continue
                        ci = W[i] / d[i]
                        csum += ci
                        for j in range(c):
                            g[j] += ci * V[i, j]
                    pull = _norm(kind, g, isq, m, tmp, a)
                    damp = 0.0
                    if pull > 0:
                        damp = 1.0 - held / pull
                        if damp < 0.0:
                            damp = 0.0
                    if csum > 0:
                        for j in range(c):
                            g[j] *= damp / csum
            if newton_ok and allow and held == 0.0:
                zbase[:] = z
                if _newton_p1(kind, V, d, W, sq, isq, znew, H, rhs, sol, u, a, m, tmp):
                    g[:] = znew
                    base_cost = cost
                    pending = True
            allow = True
            k += 1
            iters[b] = k
            _exp(kind, z, g, sq, isq, znew, a, m, w3, v3, fw, lx, tmp)
            z[:] = znew
    return best_z, best_cost, iters, conv, hist, 0
