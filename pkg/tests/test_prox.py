import numpy as np
import pytest
from hypothesis import given, strategies as st

from manireg.manifold import Euclidean, Spd3, Sphere
from manireg.prox import (CppaConfig, VqProblem, cppa_batch, cppa_image, cppa_solve,
                          image_vq_energy, prox_data, prox_pair, vq_energy)

E1 = Euclidean(1)
SPD = Spd3()


def s(v):
    return np.array([float(v)])


@pytest.mark.parametrize("q,lam,expect", [(1, 2.0, (2, 8)), (1, 7.0, (5, 5)),
                                          (2, 1.0, (10 / 3, 20 / 3))])
def test_prox_pair_closed_forms(q, lam, expect):
    a, b = prox_pair(E1, s(0), s(10), lam, q)
    assert a[0] == pytest.approx(expect[0]) and b[0] == pytest.approx(expect[1])


@pytest.mark.parametrize("p,lam,expect", [(2, 1.0, 3.0), (1, 9.0, 6.0), (1, 2.0, 2.0)])
def test_prox_data_closed_forms(p, lam, expect):
    assert prox_data(E1, s(0), s(6), lam, p)[0] == pytest.approx(expect)


@pytest.mark.parametrize("q", [1, 2])
def test_prox_pair_equal_points(q, rng):
    x = SPD.random_point(rng)
    a, b = prox_pair(SPD, x, x, 3.0, q)
    assert np.allclose(a, x) and np.allclose(b, x)


def test_prox_rejects_bad_lambda():
    with pytest.raises(ValueError):
        prox_data(E1, s(0), s(1), 0.0, 1)
    with pytest.raises(ValueError):
        prox_pair(E1, s(0), s(1), -1.0, 2)


def _pair_objective(m, x, y, a, b, lam, q):
    return lam / q * m.dist(a, b) ** q + 0.5 * (m.dist(a, x) ** 2 + m.dist(b, y) ** 2)


@pytest.mark.parametrize("q", [1, 2])
def test_prox_pair_spd_grid_oracle(q, rng):
    for _ in range(3):
        x, y = SPD.random_point(rng, size=2)
        lam = rng.uniform(0.1, 2.0)
        d = SPD.dist(x, y)
        t = np.linspace(0, d, 121)
        gx = SPD.geopoint(np.broadcast_to(x, (121, 3, 3)), np.broadcast_to(y, (121, 3, 3)), t)
        gy = SPD.geopoint(np.broadcast_to(y, (121, 3, 3)), np.broadcast_to(x, (121, 3, 3)), t)
        A = np.broadcast_to(gx[:, None], (121, 121, 3, 3))
        B = np.broadcast_to(gy[None, :], (121, 121, 3, 3))
        grid = _pair_objective(SPD, x, y, A, B, lam, q)
        a, b = prox_pair(SPD, x, y, lam, q)
        ours = _pair_objective(SPD, x, y, a, b, lam, q)
        assert ours <= grid.min() + 1e-5


@pytest.mark.parametrize("m", [Euclidean(2), SPD, Sphere(3)], ids=repr)
@pytest.mark.parametrize("q", [1, 2])
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.01, 5.0))
def test_prox_pair_beats_perturbations(m, q, seed, lam):
    rng = np.random.default_rng(seed)
    x = m.random_point(rng)
    y = m.exp(x, m.random_tangent(rng, x, 0.4))
    a, b = prox_pair(m, x, y, lam, q)
    ours = _pair_objective(m, x, y, a, b, lam, q)
    d = m.dist(x, y)
    t1, t2 = rng.uniform(0, d, 50), rng.uniform(0, d, 50)
    xb, yb = np.broadcast_to(x, (50,) + x.shape), np.broadcast_to(y, (50,) + y.shape)
    other = _pair_objective(m, x, y, m.geopoint(xb, yb, t1), m.geopoint(yb, xb, t2), lam, q)
    assert np.all(ours <= other + 1e-9)


@pytest.mark.parametrize("m", [Euclidean(2), SPD, Sphere(3)], ids=repr)
@pytest.mark.parametrize("p", [1, 2])
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.01, 5.0))
def test_prox_data_beats_perturbations(m, p, seed, lam):
    rng = np.random.default_rng(seed)
    x = m.random_point(rng)
    f = m.exp(x, m.random_tangent(rng, x, 0.4))
    obj = lambda z: lam / p * m.dist(z, f) ** p + 0.5 * m.dist(z, x) ** 2
    ours = obj(prox_data(m, x, f, lam, p))
    t = rng.uniform(0, m.dist(x, f), 50)
    other = obj(m.geopoint(np.broadcast_to(x, (50,) + x.shape), np.broadcast_to(f, (50,) + f.shape), t))
    assert np.all(ours <= other + 1e-9)


@pytest.mark.parametrize("m", [Euclidean(2), SPD, Sphere(3)], ids=repr)
@given(seed=st.integers(0, 2**32 - 1))
def test_prox_pair_swap_symmetry(m, seed):
    rng = np.random.default_rng(seed)
    x = m.random_point(rng)
    y = m.exp(x, m.random_tangent(rng, x, 0.5))
    for q in (1, 2):
        a, b = prox_pair(m, x, y, 0.3, q)
        b2, a2 = prox_pair(m, y, x, 0.3, q)
        assert m.dist(a, a2) < 1e-10 and m.dist(b, b2) < 1e-10


def test_cppa_trivial_cases(rng):
    f = SPD.random_point(rng, size=6)
    r = cppa_solve(SPD, VqProblem(f, 1, 1, 0.0))
    assert np.array_equal(r.x, f)
    r = cppa_solve(SPD, VqProblem(f[:1], 2, 2, 3.0))
    assert np.allclose(r.x, f[:1])


def test_cppa_spd_cauchy(rng):
    f = SPD.random_point(rng, size=10, scale=0.4)
    prob = VqProblem(f, 1, 1, 0.7)
    short = cppa_solve(SPD, prob, cfg=CppaConfig(sweeps=300, tol=0))
    long = cppa_solve(SPD, prob, cfg=CppaConfig(sweeps=3000, tol=0))
    assert abs(short.energy - long.energy) < 1e-4


@pytest.mark.parametrize("m", [Euclidean(1), SPD], ids=repr)
@given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from([1, 2]), q=st.sampled_from([1, 2]))
def test_cppa_descends_from_init(m, seed, p, q):
    rng = np.random.default_rng(seed)
    f = m.random_point(rng, size=7)
    init = m.random_point(rng, size=7)
    prob = VqProblem(f, p, q, 0.8)
    r = cppa_solve(m, prob, init=init, cfg=CppaConfig(sweeps=60))
    assert r.energy <= vq_energy(m, init[None], f[None], p, q, 0.8)[0] + 1e-12


@pytest.mark.parametrize("m", [Euclidean(2), SPD], ids=repr)
def test_cppa_extra_with_zero_mu_is_plain(m, rng):
    f = m.random_point(rng, size=8)
    anchor = m.random_point(rng, size=8)
    a = cppa_solve(m, VqProblem(f, 2, 1, 0.5))
    b = cppa_solve(m, VqProblem(f, 2, 1, 0.5, extra=(anchor, 0.0)))
    assert np.all(m.dist(a.x, b.x) < 1e-9)


@pytest.mark.parametrize("m", [Euclidean(2), SPD, Sphere(4)], ids=repr)
def test_compiled_and_generic_cppa_agree(m, rng):
    data = m.random_point(rng, size=(3, 6), scale=0.3) if not isinstance(m, Sphere) else None
    if data is None:
        c = m.random_point(rng)
        base = np.broadcast_to(c, (3, 6, 4))
        data = m.exp(base, m.random_tangent(rng, base, 0.3))
    lengths = np.array([6, 4, 1])
    anchor = data[:, ::-1].copy()
    cfg = CppaConfig(sweeps=40, tol=0)
    xa, ea, _ = cppa_batch(m, data, lengths, 1, 2, 0.6, anchor, 0.3, cfg=cfg)
    import manireg.prox as px
    xb, eb, _ = px._cppa_batch_generic(m, data, lengths, 1, 2, 0.6, anchor, 0.3, data.copy(), cfg)
    assert np.allclose(ea, eb, rtol=1e-12, atol=1e-12)
    for i, n in enumerate(lengths):
        assert np.all(m.dist(xa[i, :n], xb[i, :n]) < 1e-12)


def test_cppa_image_descends(rng):
    f = rng.normal(size=(6, 7, 1))
    x, e, sweeps = cppa_image(E1, f, 2, 2, 1.0, cfg=CppaConfig(sweeps=100))
    assert e <= image_vq_energy(E1, f, f, 2, 2, 1.0)
    assert x.shape == f.shape and sweeps >= 1
