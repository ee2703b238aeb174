"""Raster/vector containers and the linear-operator contract shared by all modules.

Signals live in two forms: an :class:`Image` (height x width x channels raster
with double-precision intensities) and a flat ``Vector`` (one channel in
row-major order).  Every matrix-like object in the pipeline is expressed as a
:class:`LinearOperator`: a declared-dimension ``apply`` callable, so downstream
solvers never see an assembled matrix.

All reductions (dot products, norms) go through :func:`dot`, which uses numpy's
pairwise summation: single-threaded and bit-reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Vector = np.ndarray


class DimensionMismatchError(ValueError):
    """Operands have incompatible lengths or shapes."""


@dataclass(frozen=True)
class Image:
    """Dense raster, shape (height, width, channels), float64 intensities.

    Values must be finite.  File loaders produce intensities in [0, 1];
    intermediate pipeline stages (noise injection, smoothing) may leave that
    range, and only the savers clamp.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"image data must be 3-D (h, w, c), got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"images must have 1 or 3 channels, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"empty image: shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def image_from_array(arr: np.ndarray) -> Image:
    """Wrap a 2-D (grayscale) or 3-D array as an Image."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(arr)


def flatten(img: Image, channel: int = 0) -> Vector:
    """Extract one channel as a row-major vector of length width*height."""
    if not 0 <= channel < img.channels:
        raise IndexError(f"channel {channel} out of range for {img.channels}-channel image")
    return img.data[:, :, channel].ravel().copy()


def unflatten(values: Vector, width: int, height: int) -> Image:
    """Inverse of :func:`flatten` for a single-channel image."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != width * height:
        raise DimensionMismatchError(
            f"expected {width * height} values for a {width}x{height} image, got {values.size}"
        )
    return Image(values.reshape(height, width)[:, :, None].copy())


def image_from_channels(channels: list[Vector], width: int, height: int) -> Image:
    """Stack per-channel vectors (row-major) back into an interleaved Image."""
    planes = [np.asarray(c, dtype=np.float64).reshape(height, width) for c in channels]
    return Image(np.stack(planes, axis=2))


def dot(u: Vector, v: Vector) -> float:
    """Inner product with a deterministic (pairwise) reduction order."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"dot: length mismatch {u.shape} vs {v.shape}")
    return float(np.sum(u * v))


def norm2(v: Vector) -> float:
    """Euclidean norm, routed through :func:`dot` for reproducibility."""
    return float(np.sqrt(dot(v, v)))


@dataclass(frozen=True)
class LinearOperator:
    """Matrix-free operator: everything the solvers see.

    ``symmetric`` declares <Av, w> == <v, Aw>; for operators that are symmetric
    only on an invariant subspace (the projected guiding system), the flag
    refers to that subspace and callers are responsible for staying in it.
    """

    dim_in: int
    dim_out: int
    symmetric: bool
    apply: Callable[[Vector], Vector]

    def __call__(self, x: Vector) -> Vector:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim_in,):
            raise DimensionMismatchError(
                f"operator expects length {self.dim_in}, got shape {x.shape}"
            )
        out = self.apply(x)
        if out.shape != (self.dim_out,):
            raise DimensionMismatchError(
                f"operator produced shape {out.shape}, declared dim_out {self.dim_out}"
            )
        return out


def identity_operator(n: int) -> LinearOperator:
    return LinearOperator(dim_in=n, dim_out=n, symmetric=True, apply=lambda x: x.copy())


def symmetry_defect(
    op: LinearOperator,
    n_pairs: int = 100,
    rng: Optional[np.random.Generator] = None,
    sample: Optional[Callable[[Vector], Vector]] = None,
) -> float:
    """Largest relative symmetry violation of ``op`` over random vector pairs.

    Returns max over pairs of |<Av,w> - <v,Aw>| / (|Av||w| + |v||Aw|).
    ``sample`` optionally maps raw Gaussian vectors into the subspace on which
    the operator claims symmetry.
    """
    if op.dim_in != op.dim_out:
        raise ValueError("symmetry check needs a square operator")
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for _ in range(n_pairs):
        v = rng.standard_normal(op.dim_in)
        w = rng.standard_normal(op.dim_in)
        if sample is not None:
            v = sample(v)
            w = sample(w)
        av = op(v)
        aw = op(w)
        scale = norm2(av) * norm2(w) + norm2(v) * norm2(aw)
        if scale == 0.0:
            continue
        worst = max(worst, abs(dot(av, w) - dot(v, aw)) / scale)
    return worst
