"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured quantity and then
asserts the same condition, so ``pytest -s`` or the captured log shows the
numbers even when a check fails.
"""
import itertools
import json
import os
import time

import numpy as np
import pytest
from scipy.linalg import expm, logm, solve_banded, sqrtm
from scipy.optimize import minimize, minimize_scalar
from scipy.stats import kstest, rice

from manireg import dti, metrics, phantoms
from manireg.cli import main
from manireg.dp1d import MsParams, interval_table, solve_1d, solve_1d_path
from manireg.manifold import Euclidean, Spd3, Sphere
from manireg.prox import CppaConfig, VqProblem, cppa_solve, prox_data, prox_pair
from manireg.solver2d import SplitConfig, iterate_decay_check, solve_2d
from manireg.stats import frechet_point

SPD = Spd3()


def report(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


# -- DP optimality ------------------------------------------------------------

def _partition_minima(table, gammas):
    """Exhaustive minimum over all 2^(n-1) partitions for each gamma."""
    n = table.shape[0]
    sums, counts = [], []
    for mask in range(1 << (n - 1)):
        cuts = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        sums.append(sum(table[l, r - 1] for l, r in zip(cuts[:-1], cuts[1:])))
        counts.append(len(cuts) - 2)
    sums, counts = np.array(sums), np.array(counts)
    return np.min(sums[None] + np.asarray(gammas)[:, None] * counts[None], axis=1)


def test_euclidean_dp_matches_exhaustive_search(capsys):
    rng = np.random.default_rng(101)
    models = [("potts", 1, 1), ("potts", 2, 1)] + [("ms", p, q) for p in (1, 2) for q in (1, 2)]
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(200):
        n = int(rng.integers(4, 13))
        variant, p, q = models[k % len(models)]
        f = rng.normal(size=(n, 1)) * 2
        gammas = np.sort(rng.uniform(0.01, 6, 20))
        params = MsParams(variant, p, q, float(rng.uniform(0.3, 3)), 1.0)
        res = solve_1d_path(Euclidean(1), f, params, gammas, prune=False)
        ref = _partition_minima(interval_table(Euclidean(1), f, params), gammas)
        worst = max(worst, float(np.max(np.abs([r.dp_value for r in res] - ref))))
    secs = time.perf_counter() - t0
    report(capsys, "C1 Euclidean DP = exhaustive partitions", worst <= 1e-9 and secs < 120,
           f"max |DP - exhaustive| = {worst:.2e} (tol 1e-9), {secs:.1f} s (limit 120 s)")


def test_spd_dp_not_worse_than_exhaustive_search(capsys):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = -np.inf
    for _ in range(50):
        n = int(rng.integers(2, 9))
        f = SPD.random_point(rng, size=n, scale=0.6)
        gamma = float(rng.uniform(0.05, 2))
        dp = solve_1d(SPD, f, MsParams(p=2, gamma=gamma)).energy
        eps = {(l, r): frechet_point(SPD, f[l:r + 1], p=2).cost
               for l in range(n) for r in range(l, n)}
        best = np.inf
        for cuts in itertools.product((0, 1), repeat=n - 1):
            bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
            e = sum(eps[l, r - 1] for l, r in zip(bounds[:-1], bounds[1:]))
            best = min(best, e + gamma * (len(bounds) - 2))
        worst = max(worst, dp - best)
    secs = time.perf_counter() - t0
    report(capsys, "C2 Spd3 DP <= exhaustive partitions", worst <= 1e-6 and secs < 300,
           f"max (DP - exhaustive) = {worst:.2e} (tol 1e-6), {secs:.1f} s (limit 300 s)")


# -- manifolds and proxes --------------------------------------------------------

def _quadrature_length(D, E, nodes=40):
    Dh = np.real(sqrtm(D))
    Dih = np.linalg.inv(Dh)
    L = np.real(logm(Dih @ E @ Dih))
    curve = lambda t: Dh @ expm(t * L) @ Dh
    x, w = np.polynomial.legendre.leggauss(nodes)
    t, w = (x + 1) / 2, w / 2
    h = 1e-5
    total = 0.0
    for ti, wi in zip(t, w):
        c = curve(ti)
        dc = (curve(ti + h) - curve(ti - h)) / (2 * h)
        ci = np.linalg.inv(np.real(sqrtm(c)))
        total += wi * np.linalg.norm(ci @ dc @ ci)
    return total


def test_manifold_correctness(capsys):
    rng = np.random.default_rng(303)
    errs = {}
    for m in (Euclidean(3), Sphere(3), Sphere(181), SPD):
        x = m.random_point(rng, size=1000)
        if isinstance(m, Sphere):
            v = m.random_tangent(rng, x, 1.0)
            nrm = m.norm(x, v)
            v = v * np.minimum(1.0, (np.pi - 0.1) / nrm)[:, None]
            y = m.exp(x, v)
        else:
            y = m.random_point(rng, size=1000)
        errs[repr(m)] = float(np.max(m.dist(m.exp(x, m.log(x, y)), y)))
    D = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 0.8]])
    E = np.array([[0.7, -0.1, 0.05], [-0.1, 1.2, 0.4], [0.05, 0.4, 2.5]])
    quad = abs(SPD.dist(D, E) - _quadrature_length(D, E))
    quarter = abs(Sphere(3).dist(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) - np.pi / 2)
    ok = max(errs.values()) < 1e-8 and quad < 1e-6 and quarter <= 1e-12
    detail = ", ".join(f"{k} roundtrip {v:.1e}" for k, v in errs.items())
    report(capsys, "C3 manifold correctness", ok,
           f"{detail}; SPD vs quadrature {quad:.1e}; quarter circle {quarter:.1e}")


def _data_oracle(x, f, lam, p):
    d = SPD.dist(x, f)
    obj = lambda t: lam / p * SPD.dist(SPD.geopoint(x, f, t), f) ** p \
        + 0.5 * SPD.dist(SPD.geopoint(x, f, t), x) ** 2
    r = minimize_scalar(obj, bounds=(0, d), method="bounded", options={"xatol": 1e-12})
    return min(r.fun, obj(0.0), obj(d))


def _pair_oracle(x, y, lam, q):
    d = SPD.dist(x, y)

    def obj(st):
        s, t = np.clip(st, 0, d)
        a, b = SPD.geopoint(x, y, s), SPD.geopoint(y, x, t)
        # exact penalty outside [0, d]^2 so the simplex is pushed back inside
        out = np.sum(np.abs(np.asarray(st) - (s, t)))
        return lam / q * SPD.dist(a, b) ** q + 0.5 * (SPD.dist(a, x) ** 2 + SPD.dist(b, y) ** 2) \
            + 10 * (1 + lam + d) * out

    g = np.linspace(0, d, 21)
    start = np.array(min(((s, t) for s in g for t in g), key=obj))
    step = d / 20
    best = obj(start)
    for _ in range(4):
        r = minimize(obj, start, method="Nelder-Mead",
                     options=dict(xatol=1e-11, fatol=1e-14, maxiter=4000,
                                  initial_simplex=[start, start + [step, 0], start + [0, step]]))
        if r.fun >= best - 1e-14:
            break
        best, start = r.fun, r.x
    return best, obj


def test_prox_closed_forms_against_numerical_minimization(capsys):
    rng = np.random.default_rng(404)
    worst = {}
    for case in ("pair q=1", "pair q=2", "data p=1", "data p=2"):
        kind, e = case.split()
        e = int(e[-1])
        gap = 0.0
        for _ in range(500):
            x, y = SPD.random_point(rng, size=2, scale=0.7)
            lam = float(rng.uniform(0.05, 3))
            if kind == "data":
                z = prox_data(SPD, x, y, lam, e)
                ours = lam / e * SPD.dist(z, y) ** e + 0.5 * SPD.dist(z, x) ** 2
                gap = max(gap, abs(ours - _data_oracle(x, y, lam, e)))
            else:
                a, b = prox_pair(SPD, x, y, lam, e)
                ref, obj = _pair_oracle(x, y, lam, e)
                ours = lam / e * SPD.dist(a, b) ** e + 0.5 * (SPD.dist(a, x) ** 2 + SPD.dist(b, y) ** 2)
                gap = max(gap, abs(ours - ref))
        worst[case] = gap
    ok = max(worst.values()) <= 1e-5
    report(capsys, "C4 prox closed forms", ok,
           ", ".join(f"{k}: max objective gap {v:.1e}" for k, v in worst.items()) + " (tol 1e-5)")


def test_cppa_against_tridiagonal_solve(capsys):
    rng = np.random.default_rng(505)
    n, alpha = 20, 1.0
    f = rng.normal(size=(n, 1))
    ab = np.zeros((3, n))
    ab[0, 1:] = ab[2, :-1] = -alpha
    ab[1] = 1 + 2 * alpha
    ab[1, 0] = ab[1, -1] = 1 + alpha
    exact = solve_banded((1, 1), ab, f[:, 0])
    r = cppa_solve(Euclidean(1), VqProblem(f, 2, 2, alpha), cfg=CppaConfig(sweeps=500, tol=0))
    err = float(np.max(np.abs(r.x[:, 0] - exact)))
    report(capsys, "C5 CPPA vs tridiagonal solve", err < 1e-5,
           f"sup error after {r.sweeps} sweeps = {err:.2e} (tol 1e-5)")


# -- bivariate splitting ----------------------------------------------------------

def test_splitting_convergence(capsys):
    rng = np.random.default_rng(606)
    out, ok = [], True
    for m, f in ((Euclidean(1), rng.normal(size=(16, 16, 1))),
                 (SPD, SPD.random_point(rng, size=(16, 16), scale=0.5))):
        cfg = SplitConfig(mu0=1.5, stop_tol=1e-6, outer_iters=40)
        t0 = time.perf_counter()
        r = solve_2d(m, f, MsParams(p=2, gamma=0.4), cfg=cfg)
        secs = time.perf_counter() - t0
        cons = r.trace[-1].consensus
        decay = iterate_decay_check(r.trace)
        good = cons < 10 * cfg.stop_tol and decay and len(r.trace) >= 5 and secs < 600
        ok &= good
        out.append(f"{m!r}: consensus {cons:.1e} after {len(r.trace)} iterations, "
                   f"decay bound {'holds' if decay else 'violated'}, {secs:.0f} s")
    report(capsys, "C6 splitting convergence", ok, "; ".join(out))


# -- phantom reconstructions ---------------------------------------------------------

ROW_GAMMAS = 84.5 * 2.0 ** np.arange(-6, 2)


def test_row_phantom_jump_recovery(capsys):
    hits = np.zeros(len(ROW_GAMMAS), dtype=int)
    for seed in range(20):
        T, info = phantoms.dti_pwconst(1, 60, seed)
        stack = dti.add_rician(dti.simulate_dwi(T), dti.A0 / 85, 1000 + seed)
        F = dti.fit_tensors(stack)[0]
        for gi, r in enumerate(solve_1d_path(SPD, F, MsParams(p=1, gamma=1.0), ROW_GAMMAS)):
            hits[gi] += metrics.jump_set(SPD, r.x) == info["jumps"]
    best = int(np.argmax(hits))
    rate = hits[best] / 20
    table = ", ".join(f"{g:g}: {h}/20" for g, h in zip(ROW_GAMMAS, hits))
    report(capsys, "C7 1x60 tensor signal exact jump sets", rate >= 0.9,
           f"best gamma {ROW_GAMMAS[best]:g} recovers {rate:.0%} (need 90%); {table}")


SQUARE_GAMMAS = (1.875, 3.75)


def test_square_phantom_boundary_f1(capsys):
    scores = np.zeros((len(SQUARE_GAMMAS), 10))
    for seed in range(10):
        T, info = phantoms.dti_pwconst(32, 32, seed)
        F = dti.fit_tensors(dti.add_rician(dti.simulate_dwi(T), dti.A0 / 75, 1000 + seed))
        truth = metrics.label_boundary_mask(info["labels"])
        for gi, g in enumerate(SQUARE_GAMMAS):
            x = solve_2d(SPD, F, MsParams(p=1, gamma=g)).x
            scores[gi, seed] = metrics.boundary_f1(metrics.boundary_mask(SPD, x), truth)
    med = np.median(scores, axis=1)
    best = int(np.argmax(med))
    table = ", ".join(f"{g:g}: median {s:.3f}" for g, s in zip(SQUARE_GAMMAS, med))
    report(capsys, "C8 32x32 tensor image boundary F1", med[best] >= 0.95,
           f"best gamma {SQUARE_GAMMAS[best]:g} median F1 {med[best]:.3f} (need 0.95); {table}")


# -- DTI pipeline and determinism --------------------------------------------------

def test_dti_pipeline(capsys):
    rng = np.random.default_rng(909)
    lam = rng.uniform(0.1e-3, 3e-3, size=(8, 8, 3))
    T = np.array([[phantoms.tensor(l, phantoms.rotation(rng.normal(size=3))) for l in row]
                  for row in lam])
    err = float(np.max(np.abs(dti.fit_tensors(dti.simulate_dwi(T)) - T)))
    D, sigma = 250.0, 50.0
    stack = dti.DwiStack(dti.default_directions(), np.full((15, 80, 84), D))
    x = dti.add_rician(stack, sigma, 99).images.ravel()[:100_000]
    ks = kstest(x, rice(D / sigma, scale=sigma).cdf).statistic
    report(capsys, "C9 DTI pipeline", err <= 1e-8 and ks < 0.01,
           f"noiseless roundtrip max error {err:.1e} (tol 1e-8); Rician KS {ks:.4f} (tol 0.01)")


def _pipelines(root, threads):
    root.mkdir()
    t = ["--threads", str(threads)]
    steps = [
        ["simulate", "--kind", "dti-pwconst", "--rows", "1", "--cols", "60", "--seed", "7",
         "--out", "row.mrg"],
        ["noise", "--kappa", "85", "--seed", "3", "--in", "row.mrg", "--out", "row_dwi"],
        ["fit", "--in", "row_dwi", "--out", "row_fit.mrg"],
        ["regularize", "--model", "potts", "--p", "1", "--q", "1", "--gamma", "5",
         "--in", "row_fit.mrg", "--out", "row_potts.mrg"],
        ["regularize", "--model", "ms", "--p", "1", "--q", "1", "--alpha", "1.45", "--gamma", "1.5",
         "--in", "row_fit.mrg", "--out", "row_ms.mrg"],
        ["simulate", "--kind", "dti-pwconst", "--rows", "8", "--cols", "8", "--seed", "2",
         "--out", "sq.mrg"],
        ["noise", "--kappa", "75", "--seed", "4", "--in", "sq.mrg", "--out", "sq_dwi"],
        ["fit", "--in", "sq_dwi", "--out", "sq_fit.mrg"],
        ["regularize", "--model", "potts", "--p", "1", "--gamma", "1", "--trace",
         "--in", "sq_fit.mrg", "--out", "sq_potts.mrg"],
        ["regularize", "--model", "lpvq", "--p", "1", "--q", "1", "--alpha", "0.4",
         "--in", "sq_fit.mrg", "--out", "sq_tv.mrg"],
        ["export", "--glyphs", "ellipsoid", "--in", "sq_potts.mrg", "--out", "sq_glyphs.txt"],
        ["simulate", "--kind", "qball-crossing", "--rows", "4", "--cols", "4", "--samples", "31",
         "--seed", "5", "--out", "q.mrg"],
        ["noise", "--sigma", "0.003", "--seed", "6", "--in", "q.mrg", "--out", "q_noisy.mrg"],
        ["regularize", "--model", "ms", "--p", "2", "--q", "2", "--alpha", "32", "--gamma", "0.03",
         "--mu0", "1", "--outer", "6", "--in", "q_noisy.mrg", "--out", "q_ms.mrg"],
        ["export", "--glyphs", "odf", "--in", "q_ms.mrg", "--out", "q_glyphs.txt"],
    ]
    # identical flags, relative paths: each run works inside its own directory
    cwd = os.getcwd()
    os.chdir(root)
    try:
        for s in steps:
            code = main(t + s)
            if code:
                raise RuntimeError(f"{' '.join(s)} exited with {code}")
    finally:
        os.chdir(cwd)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def test_cli_determinism(tmp_path, capsys):
    runs = [_pipelines(tmp_path / f"run{i}", th) for i, th in enumerate((1, 2, 1, 2))]
    same = all(r == runs[0] for r in runs[1:])
    diag = json.loads(runs[0]["row_potts.mrg.json"])
    report(capsys, "C10 CLI determinism", same and diag["command"] == "regularize",
           f"{len(runs[0])} output files compared over 4 runs (threads 1 and 2): "
           f"{'byte-identical' if same else 'DIFFERENT'}")
