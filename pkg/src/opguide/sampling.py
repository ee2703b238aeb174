"""Decimation operator A, its adjoint/pseudoinverse, and the sampling projector.

A keeps every k-th pixel starting at a fixed offset, so its rows are distinct
standard basis vectors and A A^T is the identity on the low-resolution grid.
That makes the pseudoinverse equal the transpose (zero-fill upsampling) and
S = A^+ A a diagonal 0/1 projector onto the retained-pixel coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError, Vector


@dataclass(frozen=True)
class SamplingOperator:
    """Pure decimation on a (hr_width x hr_height) grid.

    ``factor``/``offset`` may be a single int (both dimensions) or an (x, y)
    pair.  The low-resolution grid keeps pixels at columns offset_x,
    offset_x + factor_x, ... and rows offset_y, offset_y + factor_y, ...
    """

    hr_width: int
    hr_height: int
    factor: tuple[int, int]
    offset: tuple[int, int] = (0, 0)

    def __post_init__(self):
        fx, fy = _as_pair(self.factor)
        ox, oy = _as_pair(self.offset)
        object.__setattr__(self, "factor", (fx, fy))
        object.__setattr__(self, "offset", (ox, oy))
        if self.hr_width < 1 or self.hr_height < 1:
            raise ValueError("grid dimensions must be positive")
        if fx < 1 or fy < 1:
            raise ValueError(f"decimation factors must be >= 1, got {(fx, fy)}")
        if not (0 <= ox < fx and 0 <= oy < fy):
            raise ValueError(f"offsets must satisfy 0 <= offset < factor, got {(ox, oy)}")
        if ox >= self.hr_width or oy >= self.hr_height:
            raise ValueError("offset outside the high-resolution grid")

    @property
    def lr_width(self) -> int:
        return math.ceil((self.hr_width - self.offset[0]) / self.factor[0])

    @property
    def lr_height(self) -> int:
        return math.ceil((self.hr_height - self.offset[1]) / self.factor[1])

    @property
    def hr_size(self) -> int:
        return self.hr_width * self.hr_height

    @property
    def lr_size(self) -> int:
        return self.lr_width * self.lr_height

    @property
    def selected_indices(self) -> np.ndarray:
        """Flat row-major HR indices kept by the decimation, in LR row-major order."""
        cols = self.offset[0] + self.factor[0] * np.arange(self.lr_width)
        rows = self.offset[1] + self.factor[1] * np.arange(self.lr_height)
        return (rows[:, None] * self.hr_width + cols[None, :]).ravel()

    @property
    def sample_mask(self) -> np.ndarray:
        """Boolean HR mask of retained pixels (the diagonal of S)."""
        mask = np.zeros(self.hr_size, dtype=bool)
        mask[self.selected_indices] = True
        return mask


def _as_pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


def _check_hr(op: SamplingOperator, x: Vector) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.hr_size,):
        raise DimensionMismatchError(f"expected HR length {op.hr_size}, got shape {x.shape}")
    return x


def _check_lr(op: SamplingOperator, y: Vector) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.lr_size,):
        raise DimensionMismatchError(f"expected LR length {op.lr_size}, got shape {y.shape}")
    return y


def downsample(op: SamplingOperator, x: Vector) -> Vector:
    """y = A x: pure pixel selection, no blur."""
    return _check_hr(op, x)[op.selected_indices].copy()


def upsample_adjoint(op: SamplingOperator, y: Vector) -> Vector:
    """A^T y (== A^+ y since A A^T = I): sample values zero-filled onto the HR grid."""
    y = _check_lr(op, y)
    out = np.zeros(op.hr_size)
    out[op.selected_indices] = y
    return out


def apply_projector(op: SamplingOperator, x: Vector) -> Vector:
    """S x with S = A^+ A: zero every non-retained HR pixel."""
    x = _check_hr(op, x)
    out = np.zeros(op.hr_size)
    out[op.selected_indices] = x[op.selected_indices]
    return out


def apply_complement(op: SamplingOperator, x: Vector) -> Vector:
    """(I - S) x: zero the retained pixels, keep the rest."""
    x = _check_hr(op, x)
    out = x.copy()
    out[op.selected_indices] = 0.0
    return out


INIT_MODES = ("zero", "nearest", "bilinear")


def consistent_initial_guess(op: SamplingOperator, y: Vector, mode: str = "bilinear") -> Vector:
    """HR vector x0 with A x0 == y exactly (bitwise).

    The interpolation estimate is corrected by writing the sample values back
    into the retained pixels, which realizes u + A^+(y - A u) without the
    floating-point cancellation of the literal formula.
    """
    y = _check_lr(op, y)
    mode = "zero" if mode == "zero_fill" else mode
    if mode not in INIT_MODES:
        raise ValueError(f"unknown initial-guess mode {mode!r}, expected one of {INIT_MODES}")
    if mode == "zero":
        return upsample_adjoint(op, y)
    lr_grid = y.reshape(op.lr_height, op.lr_width)
    if mode == "nearest":
        estimate = _nearest_expand(op, lr_grid)
    else:
        estimate = _bilinear_expand(op, lr_grid)
    x0 = estimate.ravel()
    x0[op.selected_indices] = y
    return x0


def _cell_assignment(n_hr: int, k: int, o: int, n_lr: int) -> np.ndarray:
    """Index of the nearest retained sample along one axis, for each HR position."""
    pos = np.arange(n_hr)
    idx = np.rint((pos - o) / k).astype(np.int64)
    return np.clip(idx, 0, n_lr - 1)


def _nearest_expand(op: SamplingOperator, lr: np.ndarray) -> np.ndarray:
    ix = _cell_assignment(op.hr_width, op.factor[0], op.offset[0], op.lr_width)
    iy = _cell_assignment(op.hr_height, op.factor[1], op.offset[1], op.lr_height)
    return lr[np.ix_(iy, ix)]


def _axis_lerp(n_hr: int, k: int, o: int, n_lr: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Left/right sample indices and blend weight per HR position, clamped at borders."""
    t = (np.arange(n_hr, dtype=np.float64) - o) / k
    t = np.clip(t, 0.0, n_lr - 1.0)
    j0 = np.floor(t).astype(np.int64)
    j0 = np.minimum(j0, n_lr - 1)
    j1 = np.minimum(j0 + 1, n_lr - 1)
    return j0, j1, t - j0


def _bilinear_expand(op: SamplingOperator, lr: np.ndarray) -> np.ndarray:
    jx0, jx1, tx = _axis_lerp(op.hr_width, op.factor[0], op.offset[0], op.lr_width)
    jy0, jy1, ty = _axis_lerp(op.hr_height, op.factor[1], op.offset[1], op.lr_height)
    rows = (1.0 - tx)[None, :] * lr[:, jx0] + tx[None, :] * lr[:, jx1]
    return (1.0 - ty)[:, None] * rows[jy0, :] + ty[:, None] * rows[jy1, :]
