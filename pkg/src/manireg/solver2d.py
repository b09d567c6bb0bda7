"""Bivariate Potts and Mumford-Shah problems by penalty splitting.

The image functional

    1/p sum d(x, f)^p + sum_s w_s Psi_{a_s}(x)

(``Psi`` counts jumps times gamma for Potts, and sums ``min(alpha/q d^q, gamma)``
for Mumford-Shah, over pixel pairs ``(p, p + a_s)`` inside the grid) is split
into one copy ``x_s`` per direction.  Outer iteration ``k`` updates the copies
in turn; copy ``s`` solves, line by line along ``a_s`` and exactly,

    1/p d^p(x, f) + R w_s Psi_{a_s}(x) + mu_k/p d^p(x, x_{s-1})

with ``x_0 := x_R`` of the previous iteration.  ``mu_k`` grows geometrically.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dp1d import JUMP_TOL, POTTS, MsParams, solve_lines
from .grid import grid_lines, neighbor_pairs
from .manifold import Manifold
from .stats import MeanConfig, frechet_point

__all__ = [
    "Neighborhood",
    "SplitConfig",
    "IterRecord",
    "Result2D",
    "solve_2d",
    "image_energy",
    "block_energy",
    "iterate_decay_check",
]

_R2 = np.sqrt(2.0)
INNER_TOL = 1e-6


@dataclass
class Neighborhood:
    dirs: tuple = ((1, 0), (0, 1), (1, 1), (1, -1))
    weights: tuple = (_R2 - 1, _R2 - 1, 1 - _R2 / 2, 1 - _R2 / 2)

    def __post_init__(self):
        self.dirs = tuple(tuple(int(c) for c in a) for a in self.dirs)
        self.weights = tuple(float(w) for w in self.weights)
        if len(self.dirs) != len(self.weights) or not self.dirs:
            raise ValueError("need one weight per direction")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if any(a == (0, 0) for a in self.dirs):
            raise ValueError("offsets must be nonzero")

    def __len__(self):
        return len(self.dirs)


@dataclass
class SplitConfig:
    mu0: float = 1e-2
    #: growth factor of mu; None means 2**p
    tau: float | None = None
    outer_iters: int = 40
    stop_tol: float = 1e-4
    #: interval-solver configuration passed to the line solver; None uses
    #: MeanConfig(tol=INNER_TOL) for Potts and the line solver's default otherwise
    inner: object = None
    prune: bool = True

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if self.tau is not None and not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be at least 1")

    def growth(self, p) -> float:
        return float(2.0**p if self.tau is None else self.tau)

    def mu(self, k: int, p) -> float:
        """Penalty weight of outer iteration ``k`` (counting from 1)."""
        return self.mu0 * self.growth(p) ** (k - 1)


@dataclass
class IterRecord:
    k: int
    mu: float
    #: per-block subproblem energies before and after the block update
    block_before: list[float]
    block_after: list[float]
    #: largest pixel distance between consecutive copies after the iteration
    consensus: float
    #: largest (over copies) mean pixel distance moved during the iteration
    change: float
    #: sum over pixels of d^p(x_1^{k+1}, x_R^k)
    decay: float
    seconds: float

    def as_dict(self, with_time=True):
        d = dict(k=self.k, mu=self.mu, block_before=self.block_before,
                 block_after=self.block_after, consensus=self.consensus,
                 change=self.change, decay=self.decay)
        if with_time:
            d["seconds"] = self.seconds
        return d


@dataclass
class Result2D:
    x: np.ndarray
    energy: float
    trace: list[IterRecord] = field(default_factory=list)
    converged: bool = False
    copies: np.ndarray | None = None


def _line_params(params: MsParams, scale: float) -> MsParams:
    return MsParams(params.variant, params.p, params.q, params.alpha * scale,
                    params.gamma * scale)


def _pair_term(m, x, a, params):
    (i, j), (i2, j2) = neighbor_pairs(x.shape[:2], a)
    if i.size == 0:
        return 0.0
    d = m.dist(x[i, j], x[i2, j2])
    if params.variant == POTTS:
        return params.gamma * float(np.count_nonzero(d > JUMP_TOL))
    return float(np.sum(np.minimum(params.alpha / params.q * d**params.q, params.gamma)))


def image_energy(m: Manifold, x, f, params: MsParams, nb: Neighborhood | None = None) -> float:
    """The single-image functional with boundary pairs omitted."""
    nb = nb or Neighborhood()
    e = float(np.sum(m.dist(x, f) ** params.p)) / params.p
    for a, w in zip(nb.dirs, nb.weights):
        if w:
            e += w * _pair_term(m, x, a, params)
    return e


def block_energy(m, x, f, anchor, mu, params, a, scale):
    """Energy of one block subproblem (divided by p), summed over its lines."""
    p = params.p
    e = float(np.sum(m.dist(x, f) ** p)) / p
    e += mu / p * float(np.sum(m.dist(x, anchor) ** p))
    return e + scale * _pair_term(m, x, a, params)


def _mean_dist(m, x, y):
    return float(np.mean(m.dist(x, y)))


def solve_2d(m: Manifold, f, params: MsParams, nb: Neighborhood | None = None,
             cfg: SplitConfig | None = None) -> Result2D:
    """Approximate minimizer of the bivariate Potts or Mumford-Shah functional.

    Returns the last copy ``x_R`` and its single-image energy.  ``converged`` is
    False when ``outer_iters`` was reached before the stopping rule held.
    """
    nb = nb or Neighborhood()
    cfg = cfg or SplitConfig()
    f = m.check_points(f)
    if len(m.batch_shape(f)) != 2 or f.size == 0:
        raise ValueError("expected a nonempty 2D image")
    if params.extra is not None:
        raise ValueError("image problems do not take an extra term")
    shape = f.shape[:2]
    nr = len(nb)
    lines = [grid_lines(shape, a) for a in nb.dirs]
    scales = [nr * w for w in nb.weights]
    lparams = [_line_params(params, s) for s in scales]
    inner = cfg.inner
    if inner is None and params.variant == POTTS:
        inner = MeanConfig(tol=INNER_TOL)

    copies = np.repeat(f[None], nr, axis=0)
    trace: list[IterRecord] = []
    converged = False
    for k in range(1, cfg.outer_iters + 1):
        t0 = time.perf_counter()
        mu = cfg.mu(k, params.p)
        old = copies.copy()
        before, after = [], []
        for s in range(nr):
            anchor = copies[s - 1]  # s = 0 picks the last copy of the previous round
            a = nb.dirs[s]
            before.append(block_energy(m, copies[s], f, anchor, mu, params, a, scales[s]))
            if scales[s] > 0:
                rows, cols, lengths = lines[s]
                X, _ = solve_lines(m, f[rows, cols], lengths, lparams[s], anchor[rows, cols], mu,
                                   inner, cfg.prune)
                new = np.empty_like(copies[s])
                for li, n in enumerate(lengths):
                    new[rows[li, :n], cols[li, :n]] = X[li, :n]
            else:
                # no coupling: pointwise fit between data and anchor
                new = _pointwise(m, f, anchor, mu, params.p)
            copies[s] = new
            after.append(block_energy(m, new, f, anchor, mu, params, a, scales[s]))
        change = max(_mean_dist(m, copies[s], old[s]) for s in range(nr))
        consensus = max(float(np.max(m.dist(copies[s], copies[s - 1]))) for s in range(nr)) \
            if nr > 1 else 0.0
        decay = float(np.sum(m.dist(copies[0], old[-1]) ** params.p))
        trace.append(IterRecord(k, mu, before, after, consensus, change, decay,
                                time.perf_counter() - t0))
        if change < cfg.stop_tol:
            converged = True
            break
    x = copies[-1].copy()
    return Result2D(x, image_energy(m, x, f, params, nb), trace, converged, copies)


def _pointwise(m, f, anchor, mu, p):
    h, w = f.shape[:2]
    out = np.empty_like(f)
    for i in range(h):
        for j in range(w):
            pts = np.stack([f[i, j], anchor[i, j]])
            out[i, j] = frechet_point(m, pts, np.array([1.0, mu]), p).point
    return out


def iterate_decay_check(trace, fit: int = 3, rtol: float = 1e-9) -> bool:
    """Check ``d^p(x_1^{k+1}, x_R^k) <= C / (mu_k - 1)`` along a run.

    Only iterations with ``mu_k > 1`` enter.  ``C`` is the largest value of
    ``decay * (mu_k - 1)`` over the first ``fit`` of them; every later one must
    respect the bound (with a relative slack ``rtol``).  Runs with too few such
    iterations pass vacuously.
    """
    recs = [(r.decay if isinstance(r, IterRecord) else r["decay"],
             r.mu if isinstance(r, IterRecord) else r["mu"]) for r in trace]
    recs = [(d, mu) for d, mu in recs if mu > 1]
    if len(recs) <= fit:
        return True
    c = max(d * (mu - 1) for d, mu in recs[:fit])
    return all(d <= c / (mu - 1) * (1 + rtol) + 1e-300 for d, mu in recs[fit:])
