"""Binary image files with a one-line text header, and DWI stack directories.

File layout::

    MANIREG v1 <manifold> <dims> <rows> <cols>\\n
    <rows * cols * coords little-endian float64 values, row-major>

``<manifold>`` is ``euclidean``, ``sphere`` or ``spd3``; ``<dims>`` is the
vector length, the ambient dimension or ``3``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dti import DwiStack
from .manifold import Euclidean, Manifold, from_tag

__all__ = ["Dataset", "FormatError", "save", "load", "save_dwi", "load_dwi", "MAGIC", "VERSION"]

MAGIC = "MANIREG"
VERSION = "v1"
DTYPE = np.dtype("<f8")
MAX_HEADER = 256


class FormatError(ValueError):
    """Malformed, truncated or invalid file contents."""


def _manifold(tag: str, dims: int) -> Manifold:
    try:
        return from_tag(tag, dims)
    except (ValueError, TypeError) as exc:
        raise FormatError(str(exc)) from None


@dataclass
class Dataset:
    """A ``rows x cols`` image over a manifold (stored as ``(rows, cols, *point_shape)``)."""

    manifold: Manifold
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        ps = self.manifold.point_shape
        if v.ndim != 2 + len(ps) or v.shape[2:] != ps:
            raise ValueError(f"values must have shape (rows, cols) + {ps}")
        self.values = v

    @property
    def shape(self):
        return self.values.shape[:2]

    @property
    def header(self) -> str:
        return f"{MAGIC} {VERSION} {self.manifold.tag()} {self.shape[0]} {self.shape[1]}"


def _check(m: Manifold, values) -> None:
    bad = m.invalid_points(values)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise FormatError(f"cell ({i}, {j}) (index {i * values.shape[1] + j}) "
                          f"is not a valid {m.name} point")


def encode(ds: Dataset) -> bytes:
    _check(ds.manifold, ds.values)
    return (ds.header + "\n").encode("ascii") + ds.values.astype(DTYPE).tobytes(order="C")


def decode(raw: bytes) -> Dataset:
    nl = raw.find(b"\n", 0, MAX_HEADER)
    if nl < 0:
        raise FormatError("missing header line")
    parts = raw[:nl].decode("ascii", errors="replace").split()
    if len(parts) != 6 or parts[0] != MAGIC:
        raise FormatError(f"bad header {raw[:nl]!r}")
    if parts[1] != VERSION:
        raise FormatError(f"unsupported format version {parts[1]!r} (expected {VERSION})")
    try:
        dims, rows, cols = (int(x) for x in parts[3:])
    except ValueError:
        raise FormatError(f"bad header {raw[:nl]!r}") from None
    if dims < 1 or rows < 0 or cols < 0:
        raise FormatError("header sizes must be positive")
    m = _manifold(parts[2], dims)
    per = int(np.prod(m.point_shape))
    want = rows * cols * per * DTYPE.itemsize
    got = len(raw) - nl - 1
    if got != want:
        raise FormatError(f"payload has {got} bytes, expected {want}")
    values = np.frombuffer(raw, dtype=DTYPE, offset=nl + 1).astype(float)
    values = values.reshape((rows, cols) + m.point_shape)
    _check(m, values)
    return Dataset(m, values)


def save(ds: Dataset, path) -> None:
    Path(path).write_bytes(encode(ds))


def load(path) -> Dataset:
    return decode(Path(path).read_bytes())


SIDECAR = "directions.txt"


def _image_name(k: int) -> str:
    return f"dwi_{k:03d}.mrg"


def save_dwi(stack: DwiStack, dir_path) -> None:
    """``directions.txt`` (``# b A0`` header, one ``x y z`` per line) plus one file per direction."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"# b {stack.b!r} A0 {stack.A0!r}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in stack.directions]
    (d / SIDECAR).write_text("\n".join(lines) + "\n")
    e1 = Euclidean(1)
    for k, img in enumerate(stack.images):
        save(Dataset(e1, img[..., None]), d / _image_name(k))


def load_dwi(dir_path) -> DwiStack:
    d = Path(dir_path)
    side = d / SIDECAR
    if not side.is_file():
        raise FormatError(f"missing {SIDECAR} in {os.fspath(d)}")
    text = side.read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise FormatError(f"{SIDECAR}: missing '# b <b> A0 <A0>' header")
    head = text[0][1:].split()
    try:
        meta = dict(zip(head[::2], (float(x) for x in head[1::2])))
        b, a0 = meta["b"], meta["A0"]
        dirs = np.array([[float(x) for x in ln.split()] for ln in text[1:] if ln.strip()])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{SIDECAR}: {exc}") from None
    files = sorted(d.glob("dwi_*.mrg"))
    if len(files) != len(dirs):
        raise FormatError(f"{len(dirs)} directions but {len(files)} images")
    imgs = []
    for k in range(len(dirs)):
        ds = load(d / _image_name(k))
        if not isinstance(ds.manifold, Euclidean) or ds.manifold.dim != 1:
            raise FormatError(f"{_image_name(k)}: expected 'euclidean 1' images")
        imgs.append(ds.values[..., 0])
    try:
        return DwiStack(dirs, np.stack(imgs), b, a0)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
