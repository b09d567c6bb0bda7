"""Compiled cyclic proximal point sweeps on padded batches of signals.

Points are flat coordinate vectors.  ``kind`` selects the geometry:
0 Euclidean, 1 sphere, 2 SPD(3).  Each problem is processed independently in
the reference order (data proxes, anchor proxes, couplings left to right).
"""
import numpy as np
import numba as nb

from ._spd_kernels import EIG_FLOOR, _compose, _eigh3, _load_sym, _roots, _sandwich

EUCLIDEAN, SPHERE, SPD = 0, 1, 2
ANTIPODAL_TOL = 1e-12


@nb.njit(cache=True)
def _prep(kind, x, y, sq, isq, v, w, u, a, m, tmp):
    """Distance from x to y; leaves what ``_along`` needs in the scratch arrays.

    Returns -1.0 for antipodal sphere points.
    """
    c = x.shape[0]
    if kind == EUCLIDEAN:
        acc = 0.0
        for i in range(c):
            t = y[i] - x[i]
            acc += t * t
        return np.sqrt(acc)
    if kind == SPHERE:
        dot = 0.0
        for i in range(c):
            dot += x[i] * y[i]
        if dot <= -1.0 + ANTIPODAL_TOL:
            return -1.0
        acc = 0.0
        for i in range(c):
            u[i] = y[i] - dot * x[i]
            acc += u[i] * u[i]
        nrm = np.sqrt(acc)
        if nrm > 0:
            for i in range(c):
                u[i] /= nrm
        return np.arctan2(nrm, dot)
    _load_sym(x.reshape(3, 3), a)
    _roots(a, w, v, sq, isq)
    _load_sym(y.reshape(3, 3), a)
    _sandwich(isq, a, m, tmp)
    _eigh3(m, w, v)
    acc = 0.0
    for i in range(3):
        if not w[i] > EIG_FLOOR:
            w[i] = EIG_FLOOR
        lg = np.log(w[i])
        acc += lg * lg
    return np.sqrt(acc)


@nb.njit(cache=True)
def _along(kind, x, y, d, frac, sq, v, w, u, out, fw, ex, tmp):
    """Point at fraction ``frac`` of the geodesic from x to y (after ``_prep``)."""
    c = x.shape[0]
    if kind == EUCLIDEAN:
        for i in range(c):
            out[i] = x[i] + frac * (y[i] - x[i])
        return
    if kind == SPHERE:
        ang = frac * d
        ca, sa = np.cos(ang), np.sin(ang)
        acc = 0.0
        for i in range(c):
            out[i] = ca * x[i] + sa * u[i]
            acc += out[i] * out[i]
        nrm = np.sqrt(acc)
        for i in range(c):
            out[i] /= nrm
        return
    for i in range(3):
        fw[i] = np.exp(frac * np.log(w[i]))
    _compose(v, fw, ex)
    _sandwich(sq, ex, out.reshape(3, 3), tmp)


@nb.njit(cache=True)
def _dist(kind, x, y, sq, isq, v, w, u, a, m, tmp):
    return _prep(kind, x, y, sq, isq, v, w, u, a, m, tmp)


@nb.njit(cache=True)
def _energy(kind, xb, fb, ab, n, p, q, alpha, mu, use_anchor, sq, isq, v, w, u, a, m, tmp):
    e = 0.0
    for i in range(n):
        d = _dist(kind, xb[i], fb[i], sq, isq, v, w, u, a, m, tmp)
        e += d**p / p
    if use_anchor:
        for i in range(n):
            d = _dist(kind, xb[i], ab[i], sq, isq, v, w, u, a, m, tmp)
            e += mu * d**p / p
    if alpha > 0:
        for i in range(n - 1):
            d = _dist(kind, xb[i], xb[i + 1], sq, isq, v, w, u, a, m, tmp)
            e += alpha * d**q / q
    return e


@nb.njit(cache=True)
def _data_step(d, lam, p):
    if p == 1:
        return lam if lam < d else d
    return lam / (1.0 + lam) * d


@nb.njit(cache=True)
def _pair_step(d, lam, q):
    if q == 1:
        return lam if lam < 0.5 * d else 0.5 * d
    return lam / (1.0 + 2.0 * lam) * d


@nb.njit(cache=True)
def cppa_run(kind, data, lengths, anchor, use_anchor, mu, p, q, alpha, x,
             lambda0, max_sweeps, tol):
    """Run CPPA in place on ``x`` (shape ``(B, L, C)``).

    Returns ``(energy, sweeps, status)``; status 1 flags antipodal sphere points.
    """
    nb_ = data.shape[0]
    c = data.shape[2]
    energy = np.zeros(nb_)
    sweeps = np.zeros(nb_, dtype=np.int64)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    u = np.empty(c)
    a = np.empty((3, 3))
    m = np.empty((3, 3))
    tmp = np.empty((3, 3))
    fw = np.empty(3)
    ex = np.empty((3, 3))
    o1 = np.empty(c)
    o2 = np.empty(c)
    for b in range(nb_):
        n = lengths[b]
        xb = x[b]
        fb = data[b]
        ab = anchor[b]
        e_prev = _energy(kind, xb, fb, ab, n, p, q, alpha, mu, use_anchor,
                         sq, isq, v, w, u, a, m, tmp)
        e = e_prev
        for k in range(1, max_sweeps + 1):
            lam = lambda0 / k
            for i in range(n):
                d = _prep(kind, xb[i], fb[i], sq, isq, v, w, u, a, m, tmp)
                if d < 0:
                    return energy, sweeps, 1
                s = _data_step(d, lam, p)
                if d > 0 and s > 0:
                    _along(kind, xb[i], fb[i], d, s / d, sq, v, w, u, o1, fw, ex, tmp)
                    xb[i, :] = o1
            if use_anchor:
                lm = lam * mu
                for i in range(n):
                    d = _prep(kind, xb[i], ab[i], sq, isq, v, w, u, a, m, tmp)
                    if d < 0:
                        return energy, sweeps, 1
                    s = _data_step(d, lm, p)
                    if d > 0 and s > 0:
                        _along(kind, xb[i], ab[i], d, s / d, sq, v, w, u, o1, fw, ex, tmp)
                        xb[i, :] = o1
            if alpha > 0:
                la = lam * alpha
                for i in range(n - 1):
                    d = _prep(kind, xb[i], xb[i + 1], sq, isq, v, w, u, a, m, tmp)
                    if d < 0:
                        return energy, sweeps, 1
                    t = _pair_step(d, la, q)
                    if d > 0 and t > 0:
                        _along(kind, xb[i], xb[i + 1], d, t / d, sq, v, w, u, o1, fw, ex, tmp)
                        _along(kind, xb[i], xb[i + 1], d, 1.0 - t / d, sq, v, w, u, o2, fw, ex, tmp)
                        xb[i, :] = o1
                        xb[i + 1, :] = o2
            e = _energy(kind, xb, fb, ab, n, p, q, alpha, mu, use_anchor,
                        sq, isq, v, w, u, a, m, tmp)
            sweeps[b] = k
            scale = abs(e) if abs(e) > 1e-300 else 1e-300
            done = abs(e_prev - e) <= tol * scale
            e_prev = e
            if done:
                break
        energy[b] = e
    return energy, sweeps, 0
