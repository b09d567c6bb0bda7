"""Fused numba kernels for batches of 3x3 symmetric positive definite matrices.

Every kernel takes contiguous ``(N, 3, 3)`` arrays and works matrix by matrix,
so results do not depend on how callers batch their inputs.
"""
import numpy as np
import numba as nb

EIG_FLOOR = 1e-12


@nb.njit(cache=True, inline="always")
def _eigh3(a, w, v):
    """Cyclic Jacobi eigendecomposition of the symmetric 3x3 matrix ``a`` (destroyed)."""
    for i in range(3):
        for j in range(3):
            v[i, j] = 1.0 if i == j else 0.0
    for _ in range(32):
        off = a[0, 1] * a[0, 1] + a[0, 2] * a[0, 2] + a[1, 2] * a[1, 2]
        diag = a[0, 0] * a[0, 0] + a[1, 1] * a[1, 1] + a[2, 2] * a[2, 2]
        if off == 0.0 or off < 1e-34 * diag:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for r in range(3):
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[r, q] = s * arp + c * arq
                for r in range(3):
                    apr = a[p, r]
                    aqr = a[q, r]
                    a[p, r] = c * apr - s * aqr
                    a[q, r] = s * apr + c * aqr
                for r in range(3):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = c * vrp - s * vrq
                    v[r, q] = s * vrp + c * vrq
    for i in range(3):
        w[i] = a[i, i]


@nb.njit(cache=True, inline="always")
def _load_sym(src, a):
    for i in range(3):
        a[i, i] = src[i, i]
        for j in range(i + 1, 3):
            x = 0.5 * (src[i, j] + src[j, i])
            a[i, j] = x
            a[j, i] = x


@nb.njit(cache=True, inline="always")
def _compose(v, fw, out):
    """out = v diag(fw) v^T, written symmetric."""
    for i in range(3):
        for j in range(i, 3):
            x = 0.0
            for k in range(3):
                x += v[i, k] * fw[k] * v[j, k]
            out[i, j] = x
            out[j, i] = x


@nb.njit(cache=True, inline="always")
def _sandwich(s, m, out, tmp):
    """out = s m s for symmetric s, m; result symmetrized."""
    for i in range(3):
        for j in range(3):
            x = 0.0
            for k in range(3):
                x += s[i, k] * m[k, j]
            tmp[i, j] = x
    for i in range(3):
        for j in range(i, 3):
            x = 0.0
            for k in range(3):
                x += tmp[i, k] * s[k, j]
            y = 0.0
            for k in range(3):
                y += tmp[j, k] * s[k, i]
            out[i, j] = 0.5 * (x + y)
            out[j, i] = out[i, j]


@nb.njit(cache=True)
def _roots(a, w, v, sq, isq):
    """Square root and inverse square root of an SPD matrix; returns clamp count."""
    _eigh3(a, w, v)
    clamped = 0
    fw = np.empty(3)
    gw = np.empty(3)
    for k in range(3):
        x = w[k]
        if not x > EIG_FLOOR:
            x = EIG_FLOOR
            clamped += 1
        fw[k] = np.sqrt(x)
        gw[k] = 1.0 / fw[k]
    _compose(v, fw, sq)
    _compose(v, gw, isq)
    return clamped


@nb.njit(cache=True)
def sym_funm(x, code):
    """Apply exp (0), log (1), sqrt (2) or inverse sqrt (3) spectrally."""
    n = x.shape[0]
    out = np.empty_like(x)
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    fw = np.empty(3)
    clamped = 0
    for k in range(n):
        _load_sym(x[k], a)
        _eigh3(a, w, v)
        for i in range(3):
            lam = w[i]
            if code == 0:
                fw[i] = np.exp(lam)
            else:
                if not lam > EIG_FLOOR:
                    lam = EIG_FLOOR
                    clamped += 1
                if code == 1:
                    fw[i] = np.log(lam)
                elif code == 2:
                    fw[i] = np.sqrt(lam)
                else:
                    fw[i] = 1.0 / np.sqrt(lam)
        _compose(v, fw, out[k])
    return out, clamped


@nb.njit(cache=True)
def eigvalsh(x):
    n = x.shape[0]
    out = np.empty((n, 3))
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    for k in range(n):
        _load_sym(x[k], a)
        _eigh3(a, w, v)
        out[k, 0] = w[0]
        out[k, 1] = w[1]
        out[k, 2] = w[2]
    return out


@nb.njit(cache=True)
def dist(x, y):
    n = x.shape[0]
    out = np.empty(n)
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    m = np.empty((3, 3))
    tmp = np.empty((3, 3))
    ys = np.empty((3, 3))
    clamped = 0
    for k in range(n):
        _load_sym(x[k], a)
        clamped += _roots(a, w, v, sq, isq)
        _load_sym(y[k], ys)
        _sandwich(isq, ys, m, tmp)
        _eigh3(m, w, v)
        acc = 0.0
        for i in range(3):
            lam = w[i]
            if not lam > EIG_FLOOR:
                lam = EIG_FLOOR
                clamped += 1
            lg = np.log(lam)
            acc += lg * lg
        out[k] = np.sqrt(acc)
    return out, clamped


@nb.njit(cache=True)
def log_many(base, targets, mask):
    """Logarithms at ``base[b]`` of ``targets[b, j]`` where ``mask[b, j]``.

    Returns tangent vectors (zero where masked out) and their norms.
    """
    nb_, nt = mask.shape
    out = np.zeros((nb_, nt, 3, 3))
    norms = np.zeros((nb_, nt))
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    m = np.empty((3, 3))
    tmp = np.empty((3, 3))
    ys = np.empty((3, 3))
    lx = np.empty((3, 3))
    fw = np.empty(3)
    clamped = 0
    for b in range(nb_):
        _load_sym(base[b], a)
        clamped += _roots(a, w, v, sq, isq)
        for j in range(nt):
            if not mask[b, j]:
                continue
            _load_sym(targets[b, j], ys)
            _sandwich(isq, ys, m, tmp)
            _eigh3(m, w, v)
            acc = 0.0
            for i in range(3):
                lam = w[i]
                if not lam > EIG_FLOOR:
                    lam = EIG_FLOOR
                    clamped += 1
                fw[i] = np.log(lam)
                acc += fw[i] * fw[i]
            norms[b, j] = np.sqrt(acc)
            _compose(v, fw, lx)
            _sandwich(sq, lx, out[b, j], tmp)
    return out, norms, clamped


@nb.njit(cache=True)
def exp(base, tangent):
    n = base.shape[0]
    out = np.empty_like(base)
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    m = np.empty((3, 3))
    tmp = np.empty((3, 3))
    ts = np.empty((3, 3))
    ex = np.empty((3, 3))
    fw = np.empty(3)
    for k in range(n):
        _load_sym(base[k], a)
        _roots(a, w, v, sq, isq)
        _load_sym(tangent[k], ts)
        _sandwich(isq, ts, m, tmp)
        _eigh3(m, w, v)
        for i in range(3):
            fw[i] = np.exp(w[i])
        _compose(v, fw, ex)
        _sandwich(sq, ex, out[k], tmp)
    return out


@nb.njit(cache=True)
def tangent_norm(base, tangent):
    """Norm of ``tangent`` in the affine-invariant metric at ``base``."""
    n = base.shape[0]
    out = np.empty(n)
    a = np.empty((3, 3))
    v = np.empty((3, 3))
    w = np.empty(3)
    sq = np.empty((3, 3))
    isq = np.empty((3, 3))
    m = np.empty((3, 3))
    tmp = np.empty((3, 3))
    ts = np.empty((3, 3))
    for k in range(n):
        _load_sym(base[k], a)
        _roots(a, w, v, sq, isq)
        _load_sym(tangent[k], ts)
        _sandwich(isq, ts, m, tmp)
        acc = 0.0
        for i in range(3):
            for j in range(3):
                acc += m[i, j] * m[i, j]
        out[k] = np.sqrt(acc)
    return out
