"""Exact dynamic programming for univariate Potts and Mumford-Shah problems.

Indices are 0-based.  A segment ``(l, r)`` covers ``f[l], ..., f[r]``; the jump
positions of a partition are the first indices of all segments but the first.

The recursion is

    B[0] = -gamma,    B[r+1] = min_{0 <= l <= r} B[l] + gamma + eps(l, r)

where ``eps(l, r)`` is the optimal approximation error of the data on
``[l, r]``: by a constant (Potts) or by an L^p-V^q minimizer (Mumford-Shah).

Interval errors are computed column by column (fixed ``r``, all ``l`` at once)
and warm-started from the ``(l, r-1)`` minimizers of the previous column.  The
engine runs many independent lines and several values of gamma together,
sharing the interval errors, which do not depend on gamma.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifold import Manifold
from .prox import CppaConfig, cppa_batch
from .stats import MeanConfig, frechet_batch

__all__ = [
    "MsParams",
    "Segment",
    "Partition",
    "DpResult",
    "prune_bound",
    "solve_1d",
    "solve_1d_path",
    "solve_lines",
    "interval_table",
    "potts_energy",
    "ms_energy",
    "functional_energy",
]

POTTS = "potts"
MS = "ms"
# neighbors closer than this count as equal when counting Potts jumps
JUMP_TOL = 1e-6
# relative margin absorbing inner-solver error in the start-elimination test
DROP_SLACK = 1e-7


@dataclass
class MsParams:
    """Model parameters.

    ``variant`` is ``"potts"`` or ``"ms"`` (Mumford-Shah).  ``alpha`` and ``q``
    only matter for Mumford-Shah.  ``extra = (anchor, mu)`` adds
    ``mu/p sum d(x_i, anchor_i)^p`` to the functional.
    """

    variant: str = POTTS
    p: int = 2
    q: int = 2
    alpha: float = 1.0
    gamma: float = 1.0
    extra: tuple | None = None

    def __post_init__(self):
        if self.variant not in (POTTS, MS):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.variant == MS:
            if self.q not in (1, 2):
                raise ValueError("q must be 1 or 2")
            if not self.alpha > 0:
                raise ValueError("alpha must be positive")
        if self.extra is not None and self.extra[1] < 0:
            raise ValueError("mu must be nonnegative")

    @classmethod
    def from_jump_height(cls, alpha: float, s: float, q: int = 2, **kw):
        """Mumford-Shah parameters with jump height ``s`` (gamma = alpha s^q / q)."""
        return cls(variant=MS, q=q, alpha=alpha, gamma=alpha * s**q / q, **kw)

    @property
    def jump_height(self) -> float:
        if self.variant != MS:
            return 0.0
        return (self.q * self.gamma / self.alpha) ** (1.0 / self.q)


@dataclass
class Segment:
    l: int
    r: int
    minimizer: np.ndarray
    error: float


@dataclass
class Partition:
    segments: list[Segment] = field(default_factory=list)

    @property
    def jumps(self) -> list[int]:
        return [s.l for s in self.segments[1:]]

    @property
    def bounds(self) -> list[tuple[int, int]]:
        return [(s.l, s.r) for s in self.segments]

    def __len__(self):
        return len(self.segments)


@dataclass
class DpResult:
    x: np.ndarray
    partition: Partition
    #: functional evaluated at ``x``
    energy: float
    #: optimal value of the recursion, ``B[n]``
    dp_value: float
    may_be_nonunique: bool = False

    @property
    def jumps(self) -> list[int]:
        return self.partition.jumps


def prune_bound(b_prev: float, gamma: float, best_so_far: float) -> bool:
    """True when no candidate starting after ``b_prev`` can beat ``best_so_far``.

    Valid because interval errors are nonnegative.
    """
    return bool(b_prev + gamma >= best_so_far)


# -- energies ---------------------------------------------------------------

def _extra_term(m, x, extra, p):
    if extra is None or not extra[1]:
        return 0.0
    anchor, mu = extra
    return mu / p * float(np.sum(m.dist(x, anchor) ** p))


def potts_energy(m: Manifold, x, f, gamma, p, extra=None, jump_tol=JUMP_TOL):
    """``1/p sum d(x_i, f_i)^p + gamma * #{i : d(x_i, x_{i+1}) > jump_tol}`` (+ extra term).

    The tolerance absorbs roundoff in the distance of equal points and the
    inner-solver error between pieces of one segment.
    """
    x = np.asarray(x, dtype=float)
    e = float(np.sum(m.dist(x, f) ** p)) / p
    if len(x) > 1:
        e += gamma * int(np.sum(m.dist(x[:-1], x[1:]) > jump_tol))
    return e + _extra_term(m, x, extra, p)


def ms_energy(m: Manifold, x, f, alpha, gamma, p, q, extra=None):
    """Mumford-Shah energy in truncated form: couplings ``min(alpha/q d^q, gamma)``."""
    x = np.asarray(x, dtype=float)
    e = float(np.sum(m.dist(x, f) ** p)) / p
    if len(x) > 1:
        e += float(np.sum(np.minimum(alpha / q * m.dist(x[:-1], x[1:]) ** q, gamma)))
    return e + _extra_term(m, x, extra, p)


def functional_energy(m: Manifold, x, f, params: MsParams):
    if params.variant == POTTS:
        return potts_energy(m, x, f, params.gamma, params.p, params.extra)
    return ms_energy(m, x, f, params.alpha, params.gamma, params.p, params.q, params.extra)


# -- interval solvers --------------------------------------------------------

class _PottsIntervals:
    """Constant fits on ``[l, r]`` via weighted Fréchet points."""

    def __init__(self, m, F, A, mu, p, cfg):
        self.m, self.F, self.A, self.mu, self.p = m, F, A, mu, p
        self.cfg = cfg
        nl, n = F.shape[:2]
        self.prev = np.empty_like(F)
        self.prev_ok = np.zeros((nl, n), dtype=bool)
        self.cur = np.empty_like(F)
        self.cur_ok = np.zeros((nl, n), dtype=bool)

    def solve(self, lines, ls, r):
        m, F = self.m, self.F
        nreq = len(lines)
        if self.A is None and np.all(ls == r):
            eps = np.zeros(nreq)
            mins = F[lines, r].copy()
            nonunique = np.zeros(nreq, dtype=bool)
        else:
            lo = int(ls.min())
            win = np.arange(lo, r + 1)
            pts = F[lines[:, None], win[None, :]]
            w = (win[None, :] >= ls[:, None]).astype(float)
            if self.A is not None:
                pts = np.concatenate([pts, self.A[lines[:, None], win[None, :]]], axis=1)
                w = np.concatenate([w, self.mu * w], axis=1)
            ok = self.prev_ok[lines, ls]
            init = np.where(m._expand(ok), self.prev[lines, ls], F[lines, r])
            out = frechet_batch(m, pts, w, self.p, self.cfg, init=init)
            eps, mins, nonunique = out["cost"], out["point"], out["nonunique"]
            if self.A is None:
                single = ls == r
                eps = np.where(single, 0.0, eps)
                mins = np.where(m._expand(single), F[lines, r], mins)
        self.cur[lines, ls] = mins
        self.cur_ok[lines, ls] = True
        return eps, mins, nonunique

    def next_column(self):
        self.prev, self.cur = self.cur, self.prev
        self.prev_ok, self.cur_ok = self.cur_ok, self.prev_ok
        self.cur_ok[:] = False


class _MsIntervals:
    """L^p-V^q fits on ``[l, r]`` via batched CPPA."""

    def __init__(self, m, F, A, mu, p, q, alpha, cfg):
        self.m, self.F, self.A, self.mu = m, F, A, mu
        self.p, self.q, self.alpha, self.cfg = p, q, alpha, cfg
        nl, n = F.shape[:2]
        shape = (nl, n, n) + m.point_shape
        self.prev = np.empty(shape)
        self.prev_ok = np.zeros((nl, n), dtype=bool)
        self.cur = np.empty(shape)
        self.cur_ok = np.zeros((nl, n), dtype=bool)

    def solve(self, lines, ls, r):
        m, F = self.m, self.F
        width = r + 1 - int(ls.min())
        off = np.arange(width)
        idx = np.minimum(ls[:, None] + off[None, :], r)
        data = F[lines[:, None], idx]
        anchor = None if self.A is None else self.A[lines[:, None], idx]
        lengths = r - ls + 1
        # warm start: previous column's solution on [l, r-1], then f_r
        ok = self.prev_ok[lines, ls] & (ls < r)
        init = data.copy()
        if np.any(ok):
            sel = np.flatnonzero(ok)
            prev = self.prev[lines[sel], ls[sel], :width]
            keep = off[None, :] < (lengths[sel, None] - 1)
            init[sel] = np.where(m._expand(keep), prev, data[sel])
        x, eps, _ = cppa_batch(m, data, lengths, self.p, self.q, self.alpha,
                               anchor, self.mu, init, self.cfg)
        self.cur[lines, ls, :width] = x
        self.cur_ok[lines, ls] = True
        return eps, x, np.zeros(len(lines), dtype=bool)

    def next_column(self):
        self.prev, self.cur = self.cur, self.prev
        self.prev_ok, self.cur_ok = self.cur_ok, self.prev_ok
        self.cur_ok[:] = False


def _make_intervals(m, F, params, anchors, mu, cfg):
    if params.variant == POTTS:
        if cfg is None:
            cfg = MeanConfig()
        elif not isinstance(cfg, MeanConfig):
            raise TypeError("Potts problems take a MeanConfig")
        return _PottsIntervals(m, F, anchors, mu, params.p, cfg)
    if cfg is None:
        cfg = CppaConfig(tol=1e-9)
    elif not isinstance(cfg, CppaConfig):
        raise TypeError("Mumford-Shah problems take a CppaConfig")
    return _MsIntervals(m, F, anchors, mu, params.p, params.q, params.alpha, cfg)


# -- engine -------------------------------------------------------------------

def _engine(m, F, lengths, params, gammas, anchors, mu, cfg, prune, want_table=False):
    """Run the recursion for every line and every gamma.

    Returns ``(X, dp_value, jumps, nonunique, table)`` with ``X`` of shape
    ``(G, NL, L) + point_shape``.
    """
    nl, n = F.shape[:2]
    gammas = np.asarray(gammas, dtype=float)
    ng = len(gammas)
    solver = _make_intervals(m, F, params, anchors, mu, cfg)
    ms = params.variant == MS
    g3 = gammas[:, None, None]

    B = np.full((ng, nl, n + 1), np.inf)
    B[:, :, 0] = -gammas[:, None]
    arg = np.zeros((ng, nl, n), dtype=int)
    seg_shape = (ng, nl, n) + ((n,) if ms else ()) + m.point_shape
    seg = np.empty(seg_shape)
    seg_nonunique = np.zeros((ng, nl, n), dtype=bool)
    table = np.full((nl, n, n), np.nan) if want_table else None
    # start positions still worth trying (see the elimination step below)
    alive = np.ones((nl, n), dtype=bool)
    drop = prune and not ms

    for r in range(n):
        live = np.flatnonzero(lengths > r)
        eps_col = np.full((nl, n), np.inf)
        mins_col = {}
        nu_col = np.zeros((nl, n), dtype=bool)

        def run(lines, ls):
            if lines.size == 0:
                return
            eps, mins, nu = solver.solve(lines, ls, r)
            eps_col[lines, ls] = eps
            nu_col[lines, ls] = nu
            for k, (a, b) in enumerate(zip(lines.tolist(), ls.tolist())):
                mins_col[a, b] = mins[k]

        # the single-point segment first; it seeds the pruning bound
        run(live, np.full(live.size, r))
        if r > 0:
            need = np.zeros((nl, r), dtype=bool)
            need[live] = alive[live, :r]
            if prune:
                best = B[:, :, r] + gammas[:, None] + eps_col[:, r][None, :]
                skip = B[:, :, :r] + g3 >= best[:, :, None]
                need &= ~np.all(skip, axis=0)
            lines, ls = np.nonzero(need)
            run(lines, ls)
        solver.next_column()
        if want_table:
            table[:, :, r] = np.where(np.isfinite(eps_col), eps_col, np.nan)

        # candidates over l <= r; ties go to the largest l
        cand = B[:, :, : r + 1] + g3 + eps_col[None, :, : r + 1]
        rev = cand[:, :, ::-1]
        best_l = r - np.argmin(rev, axis=2)
        bval = np.take_along_axis(cand, best_l[:, :, None], axis=2)[:, :, 0]
        for li in live:
            for gi in range(ng):
                l = int(best_l[gi, li])
                B[gi, li, r + 1] = bval[gi, li]
                arg[gi, li, r] = l
                seg_nonunique[gi, li, r] = nu_col[li, l]
                mn = mins_col[li, l]
                if ms:
                    seg[gi, li, r, : r - l + 1] = mn[: r - l + 1]
                else:
                    seg[gi, li, r] = mn
        if drop:
            # eps(l, r') >= eps(l, r) + eps(r+1, r') for r' > r, so a start l with
            # B[l] + eps(l, r) >= B[r+1] never beats the later start r+1
            e = eps_col[None, :, : r + 1]
            ref = B[:, :, r + 1 : r + 2]
            dead = np.all(B[:, :, : r + 1] + e >= ref + DROP_SLACK * (1 + np.abs(ref)), axis=0)
            alive[:, : r + 1] &= ~(dead & np.isfinite(eps_col[:, : r + 1]))

    X = np.empty((ng, nl, n) + m.point_shape)
    parts = [[None] * nl for _ in range(ng)]
    nonunique = np.zeros((ng, nl), dtype=bool)
    for gi in range(ng):
        for li in range(nl):
            r = int(lengths[li]) - 1
            segs = []
            while r >= 0:
                l = int(arg[gi, li, r])
                val = seg[gi, li, r, : r - l + 1] if ms else seg[gi, li, r]
                X[gi, li, l : r + 1] = val
                segs.append(Segment(l, r, np.array(val),
                                    float(B[gi, li, r + 1] - B[gi, li, l] - gammas[gi])))
                nonunique[gi, li] |= seg_nonunique[gi, li, r]
                r = l - 1
            parts[gi][li] = Partition(segs[::-1])
            X[gi, li, lengths[li]:] = X[gi, li, lengths[li] - 1]
    dp_value = B[:, np.arange(nl), lengths]
    return X, dp_value, parts, nonunique, table


def _prepare(m, f, params):
    f = m.check_points(f)
    if len(m.batch_shape(f)) != 1:
        raise ValueError("expected a 1D signal")
    n = f.shape[0]
    if n == 0:
        raise ValueError("empty signal")
    anchor, mu = (None, 0.0) if params.extra is None else params.extra
    if anchor is not None:
        anchor = np.asarray(anchor, dtype=float)
        if anchor.shape != f.shape:
            raise ValueError("anchor must have the same shape as the data")
        if mu == 0:
            anchor = None
    return f, anchor, mu


def solve_1d_path(m: Manifold, f, params: MsParams, gammas, cfg=None, prune: bool = True):
    """Solve for several jump penalties at once; ``params.gamma`` is ignored."""
    f, anchor, mu = _prepare(m, f, params)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if np.any(~(gammas > 0)):
        raise ValueError("gamma must be positive")
    X, val, parts, nu, _ = _engine(m, f[None], np.array([f.shape[0]]), params, gammas,
                                   None if anchor is None else anchor[None], mu, cfg, prune)
    out = []
    for gi, g in enumerate(gammas):
        p = MsParams(params.variant, params.p, params.q, params.alpha, float(g), params.extra)
        x = X[gi, 0]
        out.append(DpResult(x, parts[gi][0], functional_energy(m, x, f, p), float(val[gi, 0]),
                            bool(nu[gi, 0])))
    return out


def solve_1d(m: Manifold, f, params: MsParams, cfg=None, prune: bool = True) -> DpResult:
    """Global minimizer of the univariate Potts or Mumford-Shah functional.

    ``cfg`` configures the interval solver: a :class:`MeanConfig` for Potts, a
    :class:`CppaConfig` for Mumford-Shah.
    """
    return solve_1d_path(m, f, params, [params.gamma], cfg, prune)[0]


def solve_lines(m: Manifold, F, lengths, params: MsParams, anchors=None, mu: float = 0.0,
                cfg=None, prune: bool = True):
    """Solve independent padded lines ``F[i, :lengths[i]]`` with one parameter set.

    Returns ``(X, dp_values)``; ``X`` is padded like ``F``.
    """
    F = np.asarray(F, dtype=float)
    lengths = np.asarray(lengths, dtype=int)
    if anchors is not None and mu == 0:
        anchors = None
    X, val, _, _, _ = _engine(m, F, lengths, params, [params.gamma], anchors, mu, cfg, prune)
    return X[0], val[0]


def interval_table(m: Manifold, f, params: MsParams, cfg=None):
    """All interval errors ``eps[l, r]`` (NaN below the diagonal) as used by the DP."""
    f, anchor, mu = _prepare(m, f, params)
    *_, table = _engine(m, f[None], np.array([f.shape[0]]), params, [params.gamma],
                        None if anchor is None else anchor[None], mu, cfg, False, True)
    return table[0]
