"""Riemannian backends: Euclidean space, the unit sphere, and SPD(3).

Points are numpy arrays whose trailing axes equal ``point_shape``; any leading
axes are batch axes and broadcast like ordinary numpy arithmetic.  Tangent
vectors are arrays of the same shape expressed in ambient coordinates (a
symmetric matrix for SPD(3), a vector orthogonal to the base for the sphere).
"""
from __future__ import annotations

import warnings

import numpy as np

from . import _spd_kernels as _k

__all__ = [
    "Manifold",
    "Euclidean",
    "Sphere",
    "Spd3",
    "ManifoldError",
    "DimensionMismatch",
    "AntipodalPoints",
    "NotPositiveDefinite",
    "EigenvalueClampWarning",
    "from_tag",
]

ANTIPODAL_TOL = 1e-12


class ManifoldError(ValueError):
    pass


class DimensionMismatch(ManifoldError):
    pass


class AntipodalPoints(ManifoldError):
    """Sphere logarithm requested between (numerically) antipodal points."""


class NotPositiveDefinite(ManifoldError):
    pass


class EigenvalueClampWarning(RuntimeWarning):
    """Eigenvalues of an SPD input were raised to the 1e-12 floor."""


class Manifold:
    name: str = ""
    point_shape: tuple[int, ...] = ()
    #: complete, simply connected, nonpositive curvature (unique geodesics)
    hadamard: bool = True

    @property
    def coord_size(self) -> int:
        return int(np.prod(self.point_shape))

    @property
    def dims(self) -> int:
        raise NotImplementedError

    def tag(self) -> str:
        return f"{self.name} {self.dims}"

    def __repr__(self):
        return f"{type(self).__name__}({self.dims})"

    def __eq__(self, other):
        return type(self) is type(other) and self.dims == other.dims

    def __hash__(self):
        return hash((type(self).__name__, self.dims))

    # -- shape plumbing -------------------------------------------------
    def _check_shape(self, *arrays):
        k = len(self.point_shape)
        out = []
        for a in arrays:
            a = np.asarray(a, dtype=float)
            if a.shape[a.ndim - k:] != self.point_shape or a.ndim < k:
                raise DimensionMismatch(
                    f"{self!r} expects trailing shape {self.point_shape}, got {a.shape}")
            out.append(a)
        return out

    def batch_shape(self, x) -> tuple[int, ...]:
        return np.shape(x)[: np.ndim(x) - len(self.point_shape)]

    def coords(self, x) -> np.ndarray:
        """Flat per-point coordinates, shape ``batch + (coord_size,)``."""
        (x,) = self._check_shape(x)
        return x.reshape(self.batch_shape(x) + (self.coord_size,))

    def from_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != self.coord_size:
            raise DimensionMismatch(f"expected {self.coord_size} coordinates, got {c.shape[-1]}")
        return c.reshape(c.shape[:-1] + self.point_shape)

    # -- interface ------------------------------------------------------
    def invalid_points(self, x) -> np.ndarray:
        """Boolean mask over the batch axes marking points violating the invariants."""
        raise NotImplementedError

    def check_points(self, x):
        (x,) = self._check_shape(x)
        bad = self.invalid_points(x)
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ManifoldError(f"invalid {self.name} point at index {idx}")
        return x

    def dist(self, x, y):
        raise NotImplementedError

    def log(self, x, y):
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def norm(self, x, v):
        raise NotImplementedError

    def log_many(self, base, targets, mask=None):
        """Logs from ``base[b]`` to each ``targets[b, j]``; returns ``(V, |V|)``.

        Entries with ``mask[b, j]`` false are returned as zero vectors of norm 0.
        """
        base, targets = self._check_shape(base, targets)
        v = self.log(base[:, None], targets)
        d = self.norm(base[:, None], v)
        if mask is not None:
            v = np.where(self._expand(mask), v, 0.0)
            d = np.where(mask, d, 0.0)
        return v, d

    def _expand(self, a):
        a = np.asarray(a)
        return a.reshape(a.shape + (1,) * len(self.point_shape))

    def zero_tangent(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def move_toward(self, x, y, s):
        """Point at arclength ``s`` along the geodesic from ``x`` to ``y`` (no range check)."""
        v = self.log(x, y)
        d = self.norm(x, v)
        s = np.asarray(s, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(d > 0, s / np.where(d > 0, d, 1.0), 0.0)
        out = self.exp(x, self._expand(scale) * v)
        return np.where(self._expand((d > 0) & (s != 0)), out, x)

    def geopoint(self, x, y, t):
        """Point reached after arclength ``t`` on the unit-speed geodesic from x to y."""
        x, y = self._check_shape(x, y)
        t = np.asarray(t, dtype=float)
        d = self.dist(x, y)
        slack = 1e-9 * np.maximum(1.0, d)
        if np.any(t < -slack) or np.any(t > d + slack):
            raise ValueError("geodesic arclength must lie in [0, dist(x, y)]")
        return self.move_toward(x, y, np.clip(t, 0.0, d))

    def geodesic_fraction(self, x, y, frac):
        """Point at fraction ``frac`` of the way from x to y."""
        return self.exp(x, self._expand(np.asarray(frac, dtype=float)) * self.log(x, y))

    def random_point(self, rng, size=(), scale=1.0):
        raise NotImplementedError

    def random_tangent(self, rng, x, scale=1.0):
        raise NotImplementedError


class Euclidean(Manifold):
    name = "euclidean"

    def __init__(self, dim: int = 1):
        if int(dim) < 1:
            raise ValueError("Euclidean dimension must be positive")
        self.dim = int(dim)
        self.point_shape = (self.dim,)

    @property
    def dims(self):
        return self.dim

    def invalid_points(self, x):
        return ~np.all(np.isfinite(x), axis=-1)

    def dist(self, x, y):
        x, y = self._check_shape(x, y)
        return np.linalg.norm(y - x, axis=-1)

    def log(self, x, y):
        x, y = self._check_shape(x, y)
        return y - x

    def exp(self, x, v):
        x, v = self._check_shape(x, v)
        return x + v

    def norm(self, x, v):
        return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)

    def random_point(self, rng, size=(), scale=1.0):
        return scale * rng.standard_normal(_size(size) + self.point_shape)

    def random_tangent(self, rng, x, scale=1.0):
        return scale * rng.standard_normal(np.shape(x))


class Sphere(Manifold):
    """Unit sphere S^{n-1} embedded in R^n."""

    name = "sphere"
    hadamard = False

    def __init__(self, ambient_dim: int = 3):
        if int(ambient_dim) < 2:
            raise ValueError("sphere ambient dimension must be at least 2")
        self.ambient_dim = int(ambient_dim)
        self.point_shape = (self.ambient_dim,)

    @property
    def dims(self):
        return self.ambient_dim

    def invalid_points(self, x):
        return ~(np.abs(np.linalg.norm(x, axis=-1) - 1.0) <= 1e-10)

    def _angle(self, x, y):
        c = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
        u = y - c[..., None] * x
        nu = np.linalg.norm(u, axis=-1)
        # atan2 keeps full precision for nearby points where arccos(c) does not
        return c, u, nu, np.arctan2(nu, c)

    def dist(self, x, y):
        x, y = self._check_shape(x, y)
        return self._angle(x, y)[3]

    def log(self, x, y):
        x, y = self._check_shape(x, y)
        c, u, nu, theta = self._angle(x, y)
        if np.any(c <= -1.0 + ANTIPODAL_TOL):
            raise AntipodalPoints("sphere logarithm is undefined for antipodal points")
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(nu > 0, theta / np.where(nu > 0, nu, 1.0), 0.0)
        return scale[..., None] * u

    def exp(self, x, v):
        x, v = self._check_shape(x, v)
        n = np.linalg.norm(v, axis=-1)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            sinc = np.where(n > 0, np.sin(n) / np.where(n > 0, n, 1.0), 1.0)
        out = np.cos(n) * x + sinc * v
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def norm(self, x, v):
        return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)

    def random_point(self, rng, size=(), scale=1.0):
        z = rng.standard_normal(_size(size) + self.point_shape)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def random_tangent(self, rng, x, scale=1.0):
        x = np.asarray(x, dtype=float)
        z = rng.standard_normal(x.shape)
        z -= np.sum(z * x, axis=-1, keepdims=True) * x
        return scale * z


class Spd3(Manifold):
    """3x3 symmetric positive definite matrices with the affine-invariant metric."""

    name = "spd3"
    point_shape = (3, 3)

    @property
    def dims(self):
        return 3

    def invalid_points(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 3, 3)
        asym = np.abs(flat - flat.transpose(0, 2, 1)).max(axis=(1, 2)) > 1e-10
        finite = np.all(np.isfinite(flat), axis=(1, 2))
        lam = np.full((flat.shape[0], 3), -1.0)
        lam[finite] = _k.eigvalsh(np.ascontiguousarray(flat[finite]))
        bad = asym | ~finite | ~(lam.min(axis=1) > 0)
        return bad.reshape(self.batch_shape(x))

    @staticmethod
    def _flat(*arrays):
        arrays = np.broadcast_arrays(*arrays)
        shape = arrays[0].shape[:-2]
        return shape, [np.ascontiguousarray(a.reshape(-1, 3, 3)) for a in arrays]

    @staticmethod
    def _warn(clamped):
        if clamped:
            warnings.warn(
                f"{clamped} eigenvalue(s) clamped to {_k.EIG_FLOOR:g}",
                EigenvalueClampWarning, stacklevel=3)

    def dist(self, x, y):
        x, y = self._check_shape(x, y)
        shape, (xf, yf) = self._flat(x, y)
        d, clamped = _k.dist(xf, yf)
        if clamped:
            bad = self.invalid_points(xf) | self.invalid_points(yf)
            if np.any(bad):
                raise NotPositiveDefinite("dist requires positive definite inputs")
            self._warn(clamped)
        return d.reshape(shape)

    def log(self, x, y):
        x, y = self._check_shape(x, y)
        shape, (xf, yf) = self._flat(x, y)
        mask = np.ones((xf.shape[0], 1), dtype=bool)
        v, _, clamped = _k.log_many(xf, yf[:, None], mask)
        self._warn(clamped)
        return v.reshape(shape + (3, 3))

    def log_many(self, base, targets, mask=None):
        base, targets = self._check_shape(base, targets)
        nb_, nt = targets.shape[:2]
        if mask is None:
            mask = np.ones((nb_, nt), dtype=bool)
        v, d, clamped = _k.log_many(
            np.ascontiguousarray(np.broadcast_to(base, (nb_, 3, 3))),
            np.ascontiguousarray(targets), np.ascontiguousarray(mask))
        self._warn(clamped)
        return v, d

    def exp(self, x, v):
        x, v = self._check_shape(x, v)
        shape, (xf, vf) = self._flat(x, v)
        return _k.exp(xf, vf).reshape(shape + (3, 3))

    def norm(self, x, v):
        x, v = self._check_shape(x, v)
        shape, (xf, vf) = self._flat(x, v)
        return _k.tangent_norm(xf, vf).reshape(shape)

    def random_point(self, rng, size=(), scale=1.0):
        w = scale * rng.standard_normal(_size(size) + (3, 3))
        w = 0.5 * (w + np.swapaxes(w, -1, -2))
        return self.expm(w)

    def random_tangent(self, rng, x, scale=1.0):
        w = scale * rng.standard_normal(np.shape(x))
        w = 0.5 * (w + np.swapaxes(w, -1, -2))
        # whitened symmetric matrix mapped into the tangent space at x
        s = self.sqrtm(x)
        return s @ w @ s

    # spectral matrix functions
    def _funm(self, x, code):
        x = np.asarray(x, dtype=float)
        shape, (xf,) = self._flat(x)
        out, clamped = _k.sym_funm(xf, code)
        if code != 0:
            self._warn(clamped)
        return out.reshape(shape + (3, 3))

    def expm(self, x):
        return self._funm(x, 0)

    def logm(self, x):
        return self._funm(x, 1)

    def sqrtm(self, x):
        return self._funm(x, 2)

    def invsqrtm(self, x):
        return self._funm(x, 3)

    def eigvalsh(self, x):
        x = np.asarray(x, dtype=float)
        shape, (xf,) = self._flat(x)
        return np.sort(_k.eigvalsh(xf), axis=-1).reshape(shape + (3,))


def _size(size):
    return tuple(np.atleast_1d(size).tolist()) if np.ndim(size) or size != () else ()


def from_tag(name: str, dims: int) -> Manifold:
    """Construct a backend from its serialized ``<name> <dims>`` tag."""
    if name == "euclidean":
        return Euclidean(dims)
    if name == "sphere":
        return Sphere(dims)
    if name == "spd3":
        if dims != 3:
            raise DimensionMismatch("spd3 backend has dims 3")
        return Spd3()
    raise ManifoldError(f"unknown manifold {name!r}")
