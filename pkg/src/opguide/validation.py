"""Dense small-scale oracles for the matrix-free pipeline.

Materializes the guiding operator and sampling projector as explicit
matrices, solves the penalized system (S + rho L) x = s and the constrained
system (exact sample consistency, minimal guided energy) directly, and
measures how the penalized solution approaches the constrained one as the
penalty weight vanishes: the gap shrinks linearly in rho, and the first-order
Schur-complement correction of the sampled block is accurate to second order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla

from .core import Vector
from .guidance import GuidingOperator, apply_L
from .sampling import SamplingOperator

MAX_DENSE_DIM = 4096
_PIVOT_RTOL = 1e-12


class SingularSystemError(RuntimeError):
    """Pivoted symmetric factorization met a pivot below the threshold."""

    def __init__(self, message: str, min_pivot: float, threshold: float):
        super().__init__(f"{message} (min pivot {min_pivot:.3e}, threshold {threshold:.3e})")
        self.min_pivot = min_pivot
        self.threshold = threshold


@dataclass
class DenseSystem:
    """Explicit form of one reconstruction instance, feasible up to N=4096."""

    n: int
    laplacian: np.ndarray
    sample_mask: np.ndarray
    sample: np.ndarray


def assemble_dense(
    L: GuidingOperator, S: SamplingOperator, sample: Optional[Vector] = None
) -> DenseSystem:
    """Materialize L column by column (one operator application per basis vector)."""
    n = S.hr_size
    if n != L.n:
        raise ValueError(f"sampling grid has {n} pixels, guiding operator {L.n}")
    if n > MAX_DENSE_DIM:
        raise ValueError(f"dense assembly capped at {MAX_DENSE_DIM} pixels, got {n}")
    dense = np.empty((n, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        dense[:, j] = apply_L(L, basis)
        basis[j] = 0.0
    mask = S.sample_mask
    if sample is None:
        s = np.zeros(n)
    else:
        s = np.asarray(sample, dtype=np.float64).copy()
        if s.shape != (n,):
            raise ValueError(f"sample must be a zero-filled HR vector of length {n}")
        s[~mask] = 0.0
    return DenseSystem(n=n, laplacian=dense, sample_mask=mask, sample=s)


def _ldl_blocks(d: np.ndarray) -> list[tuple[int, int]]:
    """(start, size) of the 1x1/2x2 pivot blocks on the factor's diagonal."""
    n = d.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return blocks


def _block_pivot_magnitudes(d: np.ndarray, blocks: list[tuple[int, int]]) -> np.ndarray:
    mags = []
    for start, size in blocks:
        if size == 1:
            mags.append(abs(d[start, start]))
        else:
            p, q, r = d[start, start], d[start + 1, start], d[start + 1, start + 1]
            mean = 0.5 * (p + r)
            rad = np.hypot(0.5 * (p - r), q)
            mags.append(min(abs(mean - rad), abs(mean + rad)))
    return np.asarray(mags)


def symmetric_solve(a: np.ndarray, b: np.ndarray, context: str = "dense system") -> np.ndarray:
    """Solve a symmetric system by pivoted LDL^T with a singularity guard.

    Raises :class:`SingularSystemError` when the smallest pivot magnitude
    falls below 1e-12 times the max-norm of the matrix.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return np.zeros_like(b)
    lu, d, perm = sla.ldl(a)
    blocks = _ldl_blocks(d)
    pivots = _block_pivot_magnitudes(d, blocks)
    threshold = _PIVOT_RTOL * float(np.max(np.abs(a))) if a.size else 0.0
    min_pivot = float(np.min(pivots))
    if min_pivot < threshold or min_pivot == 0.0:
        raise SingularSystemError(f"singular {context}", min_pivot, threshold)

    lower = lu[perm]
    z = sla.solve_triangular(lower, b[perm], lower=True, unit_diagonal=True)
    w = np.empty_like(z)
    for start, size in blocks:
        if size == 1:
            w[start] = z[start] / d[start, start]
        else:
            p, q, r = d[start, start], d[start + 1, start], d[start + 1, start + 1]
            det = p * r - q * q
            w[start] = (r * z[start] - q * z[start + 1]) / det
            w[start + 1] = (p * z[start + 1] - q * z[start]) / det
    v = sla.solve_triangular(lower.T, w, lower=False, unit_diagonal=True)
    x = np.empty_like(v)
    x[perm] = v
    return x


def solve_tikhonov(sys: DenseSystem, rho: float) -> np.ndarray:
    """Direct solve of the penalized normal equations (S + rho L) x = s."""
    if rho <= 0:
        raise ValueError("rho must be positive for the penalized solve")
    matrix = np.diag(sys.sample_mask.astype(np.float64)) + rho * sys.laplacian
    return symmetric_solve(matrix, sys.sample, context="penalized system")


def solve_constrained(sys: DenseSystem) -> np.ndarray:
    """Exact-consistency solve: keep sampled values, extend harmonically.

    The correction solves the restriction of the guiding operator to the
    free (non-sampled) pixels; the result is feasible to machine precision
    because sampled coordinates are copied, not recomputed.
    """
    free = ~sys.sample_mask
    l_ff = sys.laplacian[np.ix_(free, free)]
    rhs = -(sys.laplacian @ sys.sample)[free]
    u_f = symmetric_solve(l_ff, rhs, context="free-pixel restriction")
    x = sys.sample.copy()
    x[free] += u_f
    return x


@dataclass
class SchurLimitReport:
    rhos: list[float]
    errors: list[float]
    defects: list[float]
    slope_error: float
    slope_defect: float
    x1_limit_gap: float
    x1_limit_bound: float

    def write_csv(self, stream) -> None:
        stream.write("kind,rho,value\n")
        for rho, e, d in zip(self.rhos, self.errors, self.defects):
            stream.write(f"error,{rho!r},{e!r}\n")
            stream.write(f"defect,{rho!r},{d!r}\n")
        stream.write(f"slope_error,,{self.slope_error!r}\n")
        stream.write(f"slope_defect,,{self.slope_defect!r}\n")
        stream.write(f"x1_limit_gap,{min(self.rhos)!r},{self.x1_limit_gap!r}\n")
        stream.write(f"x1_limit_bound,{min(self.rhos)!r},{self.x1_limit_bound!r}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs))
    ly = np.log(np.asarray(ys))
    return float(np.polyfit(lx, ly, 1)[0])


def schur_limit_check(
    sys: DenseSystem, rhos: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4)
) -> SchurLimitReport:
    """Measure the vanishing-penalty behavior of the dense solves.

    For each rho: e(rho) = distance of the penalized solution from the
    constrained one (expected slope 1 in rho), and d(rho) = defect of the
    first-order correction of the sampled block via the Schur complement of
    the free block (expected slope 2).
    """
    free = ~sys.sample_mask
    samp = sys.sample_mask
    l11 = sys.laplacian[np.ix_(free, free)]
    l12 = sys.laplacian[np.ix_(free, samp)]
    l21 = sys.laplacian[np.ix_(samp, free)]
    l22 = sys.laplacian[np.ix_(samp, samp)]
    s2 = sys.sample[samp]

    try:
        l11_inv_l12 = symmetric_solve(l11, l12, context="free-pixel block")
    except SingularSystemError as err:
        smallest_sv = float(np.min(sla.svdvals(l11))) if l11.size else 0.0
        raise SingularSystemError(
            f"free-pixel block is singular (smallest singular value {smallest_sv:.3e})",
            err.min_pivot,
            err.threshold,
        ) from err
    schur = l22 - l21 @ l11_inv_l12

    x_star = solve_constrained(sys)
    rhos = sorted(rhos, reverse=True)
    errors, defects = [], []
    x_smallest = None
    for rho in rhos:
        x_rho = solve_tikhonov(sys, rho)
        errors.append(float(np.linalg.norm(x_rho - x_star)))
        defects.append(float(np.linalg.norm(x_rho[samp] - (s2 - rho * (schur @ s2)))))
        x_smallest = x_rho

    x1_limit = -(l11_inv_l12 @ s2)
    gap = float(np.linalg.norm(x_smallest[free] - x1_limit))
    return SchurLimitReport(
        rhos=list(rhos),
        errors=errors,
        defects=defects,
        slope_error=_fit_slope(rhos, errors),
        slope_defect=_fit_slope(rhos, defects),
        x1_limit_gap=gap,
        x1_limit_bound=10.0 * errors[-1],
    )
