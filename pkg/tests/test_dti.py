import numpy as np
import pytest
from hypothesis import given, strategies as st

from manireg import dti
from manireg.manifold import Spd3
from manireg.phantoms import rotation, tensor

SPD = Spd3()


def test_default_directions_span_symmetric_matrices():
    v = dti.default_directions()
    assert v.shape == (15, 3)
    assert np.allclose(np.linalg.norm(v, axis=1), 1, atol=1e-12)
    assert np.linalg.matrix_rank(dti.design_matrix(v)) == 6


def test_stejskal_tanner_cases():
    b = dti.B_VALUE
    t = np.broadcast_to(np.eye(3) / b, (1, 1, 3, 3))
    s = dti.simulate_dwi(t)
    assert np.allclose(s.images, dti.A0 * np.exp(-1), rtol=1e-14)
    tiny = np.broadcast_to(np.eye(3) * 1e-14, (1, 1, 3, 3))
    assert np.allclose(dti.simulate_dwi(tiny).images, dti.A0, rtol=1e-9)
    iso = dti.simulate_dwi(np.broadcast_to(np.eye(3) * 1e-3, (2, 2, 3, 3))).images
    assert np.allclose(iso, iso[0], rtol=1e-14)


def test_rician_small_sigma_and_determinism(rng):
    T = SPD.random_point(rng, size=(3, 4), scale=0.3) * 1e-3
    s = dti.simulate_dwi(T)
    n = dti.add_rician(s, 1e-12, seed=5)
    assert np.allclose(n.images, s.images, rtol=1e-6)
    a, b = dti.add_rician(s, 30.0, 11), dti.add_rician(s, 30.0, 11)
    assert np.array_equal(a.images, b.images)
    with pytest.raises(ValueError):
        dti.add_rician(s, 0.0, 1)


def test_rayleigh_mean():
    dirs = dti.default_directions()
    zero = dti.DwiStack(dirs, np.zeros((15, 200, 400)))
    sigma = 7.0
    m = dti.add_rician(zero, sigma, 3).images.mean()
    assert abs(m / (sigma * np.sqrt(np.pi / 2)) - 1) < 0.02


def test_rician_marginal_matches_rice_cdf():
    from scipy.stats import kstest, rice
    dirs = dti.default_directions()
    D, sigma = 300.0, 40.0
    stack = dti.DwiStack(dirs, np.full((15, 80, 84), D))
    x = dti.add_rician(stack, sigma, 9).images.ravel()[:100_000]
    assert kstest(x, rice(D / sigma, scale=sigma).cdf).statistic < 0.01


@given(seed=st.integers(0, 2**32 - 1))
def test_noiseless_roundtrip(seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.1e-3, 3e-3, size=(2, 3, 3))
    T = np.array([[tensor(l, rotation(rng.normal(size=3))) for l in row] for row in lam])
    fit = dti.fit_tensors(dti.simulate_dwi(T))
    assert np.max(np.abs(fit - T)) <= 1e-8


def test_principal_direction_recovered():
    R = rotation((0.3, -0.7, 0.2))
    T = tensor((2.0e-3, 0.3e-3, 0.2e-3), R)[None, None]
    fit = dti.fit_tensors(dti.simulate_dwi(T))[0, 0]
    e = np.linalg.eigh(fit)[1][:, -1]
    angle = np.degrees(np.arccos(min(1.0, abs(e @ R[:, 0]))))
    assert angle < 1.0


def test_zero_signal_is_clamped_and_flagged():
    dirs = dti.default_directions()
    stack = dti.DwiStack(dirs, np.full((15, 1, 2), dti.A0))
    T, flags = dti.fit_tensors(stack, return_flags=True)
    assert flags.all()
    assert np.all(np.linalg.eigvalsh(T) > 0)


def test_noisy_mean_fit_close_to_truth():
    T0 = tensor((1.2e-3, 0.8e-3, 0.6e-3), rotation((0.1, 0.2, 0.3)))
    img = np.broadcast_to(T0, (10, 20, 3, 3))
    s = dti.simulate_dwi(img)
    fits = dti.fit_tensors(dti.add_rician(s, 25.0, 17))
    mean = fits.reshape(-1, 3, 3).mean(axis=0)
    assert np.linalg.norm(mean - T0) / np.linalg.norm(T0) < 0.05
    assert not np.any(SPD.invalid_points(fits))


def test_rank_deficient_directions_rejected():
    v = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]] * 2)
    stack = dti.DwiStack(v, np.ones((6, 1, 1)))
    with pytest.raises(ValueError, match="rank"):
        dti.fit_tensors(stack)


def test_stack_validation():
    with pytest.raises(ValueError):
        dti.DwiStack(dti.default_directions()[:5], np.ones((5, 1, 1)))
    with pytest.raises(ValueError):
        dti.DwiStack(dti.default_directions() * 2, np.ones((15, 1, 1)))


def test_glyphs():
    axes, _ = dti.semi_axes(np.diag([4.0, 1.0, 1.0]))
    assert np.allclose(np.sort(axes), [0.5, 1, 1])
    img = np.broadcast_to(np.eye(3), (2, 3, 3, 3))
    text = dti.format_glyphs(img, 1.0).splitlines()
    assert len(text) == 6
    first = text[0].split()
    assert first[:2] == ["0", "0"] and len(first) == 15
    assert [tuple(map(int, ln.split()[:2])) for ln in text] == [(i, j) for i in range(2) for j in range(3)]
    lam = np.array(first[2:5], dtype=float)
    assert np.allclose(np.sqrt(1.0 / lam), 1.0)
