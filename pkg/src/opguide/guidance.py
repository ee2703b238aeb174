"""Guided smoothing weights and the guiding operator built from them.

A guidance image g defines a sparse symmetric nonnegative affinity matrix
W(g) on the pixel graph (bilateral window kernel or smoothed-TV 4-neighbor
kernel).  Sinkhorn balancing rescales W toward doubly stochastic, after which
the guiding operator applies powers of the graph Laplacian D - W matrix-free.

Symmetry is exact by construction: the weight of (i, j) and (j, i) is computed
from the same even expressions, and balancing multiplies both entries by the
same product of diagonal scales, so W == W^T holds bitwise at every stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np
from scipy import sparse

from .core import DimensionMismatchError, Image, LinearOperator, Vector, dot

KERNEL_KINDS = ("bilateral", "tv")


@dataclass(frozen=True)
class KernelParams:
    """Parameters of the guided affinity kernel.

    bilateral: full (2*radius+1)^2 window, weight = spatial Gaussian times
    range Gaussian over all guidance channels.  tv: 4-neighbors with weight
    1/sqrt(|dg|^2 + epsilon^2); radius/sigmas are ignored.
    """

    kind: str = "bilateral"
    radius: int = 3
    sigma_spatial: float = 2.0
    sigma_range: float = 0.2
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}, expected one of {KERNEL_KINDS}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.sigma_spatial <= 0 or self.sigma_range <= 0:
            raise ValueError("sigmas must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class GuidedWeights:
    """Sparse symmetric nonnegative affinity matrix on a pixel grid.

    ``matrix`` is CSR with canonical (row-major, sorted, deduplicated)
    structure; ``degree`` caches the row sums W 1.
    """

    width: int
    height: int
    matrix: sparse.csr_matrix
    degree: np.ndarray = field(default=None)

    def __post_init__(self):
        m = self.matrix.tocsr()
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)
        if self.degree is None:
            object.__setattr__(self, "degree", _row_sums(m))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SinkhornReport:
    iterations: int
    residual: float
    converged: bool


def _row_sums(m: sparse.csr_matrix) -> np.ndarray:
    return m @ np.ones(m.shape[0])


def _guidance_array(g: Image) -> np.ndarray:
    arr = g.data
    if not np.all(np.isfinite(arr)):
        raise ValueError("guidance image contains non-finite values")
    return arr


def build_weights(g: Image, p: KernelParams) -> GuidedWeights:
    """Assemble W(g) as sparse COO triplets, one ordered pair per window edge."""
    arr = _guidance_array(g)
    h, w = arr.shape[0], arr.shape[1]
    n = h * w
    if p.kind == "bilateral":
        rows, cols, vals = _bilateral_triplets(arr, p)
    else:
        rows, cols, vals = _tv_triplets(arr, p)
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return GuidedWeights(width=w, height=h, matrix=matrix)


def _offset_pairs(arr: np.ndarray, dy: int, dx: int):
    """Flat (i, j) index arrays and squared guidance difference for one window offset."""
    h, w = arr.shape[0], arr.shape[1]
    y0, y1 = max(0, -dy), h - max(0, dy)
    x0, x1 = max(0, -dx), w - max(0, dx)
    if y0 >= y1 or x0 >= x1:
        return None
    ys = np.arange(y0, y1)
    xs = np.arange(x0, x1)
    i = (ys[:, None] * w + xs[None, :]).ravel()
    j = ((ys + dy)[:, None] * w + (xs + dx)[None, :]).ravel()
    diff = arr[y0:y1, x0:x1, :] - arr[y0 + dy : y1 + dy, x0 + dx : x1 + dx, :]
    dist2 = np.sum(diff * diff, axis=2).ravel()
    return i, j, dist2


def _bilateral_triplets(arr: np.ndarray, p: KernelParams):
    rows, cols, vals = [], [], []
    inv_2ss = 1.0 / (2.0 * p.sigma_spatial**2)
    inv_2sr = 1.0 / (2.0 * p.sigma_range**2)
    r = p.radius
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            pair = _offset_pairs(arr, dy, dx)
            if pair is None:
                continue
            i, j, dist2 = pair
            spatial = np.exp(-(dx * dx + dy * dy) * inv_2ss)
            vals.append(spatial * np.exp(-dist2 * inv_2sr))
            rows.append(i)
            cols.append(j)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _tv_triplets(arr: np.ndarray, p: KernelParams):
    h, w = arr.shape[0], arr.shape[1]
    n = h * w
    rows, cols, vals = [], [], []
    self_weight = np.zeros(n)
    for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        pair = _offset_pairs(arr, dy, dx)
        if pair is None:
            continue
        i, j, dist2 = pair
        wv = 1.0 / np.sqrt(dist2 + p.epsilon**2)
        rows.append(i)
        cols.append(j)
        vals.append(wv)
        np.maximum.at(self_weight, i, wv)
    # isolated pixels (1x1 image) get a unit self loop so the graph stays irreducible
    self_weight[self_weight == 0.0] = 1.0
    diag = np.arange(n)
    rows.append(diag)
    cols.append(diag)
    vals.append(self_weight)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def sinkhorn_balance(
    w: GuidedWeights, tol: float = 1e-8, max_iter: int = 100
) -> tuple[GuidedWeights, SinkhornReport]:
    """Symmetric diagonal rescaling toward doubly stochastic row sums.

    Each sweep applies W <- Delta^{-1/2} W Delta^{-1/2} with
    Delta = diag(W 1), stopping once ||W 1 - 1||_inf < tol.  The two-sided
    scale is computed as a single per-entry product, so symmetry of W is
    preserved bitwise.  Non-convergence is reported, not fatal: the guiding
    operator then falls back to the degree matrix of the returned W.
    """
    matrix = w.matrix.copy()
    n = matrix.shape[0]
    row_idx = np.repeat(np.arange(n), np.diff(matrix.indptr))
    degree = _row_sums(matrix)
    residual = float(np.max(np.abs(degree - 1.0))) if n else 0.0
    iterations = 0
    while residual >= tol and iterations < max_iter:
        if np.any(degree <= 0.0):
            raise ValueError("Sinkhorn balancing requires strictly positive row sums")
        scale = 1.0 / np.sqrt(degree)
        matrix.data *= scale[row_idx] * scale[matrix.indices]
        degree = _row_sums(matrix)
        residual = float(np.max(np.abs(degree - 1.0)))
        iterations += 1
    balanced = GuidedWeights(width=w.width, height=w.height, matrix=matrix, degree=degree)
    return balanced, SinkhornReport(iterations=iterations, residual=residual, converged=residual < tol)


@dataclass(frozen=True)
class GuidingOperator:
    """Polynomial guiding operator x -> (D - W)^degree x, applied matrix-free.

    With balanced weights D is the identity up to the Sinkhorn residual, so
    this realizes the degree-n polynomial filter in I - W; keeping
    D = diag(W 1) explicitly makes the constant vector an exact null vector
    and the quadratic form nonnegative regardless of balancing quality.
    """

    weights: GuidedWeights
    poly_degree: int = 1

    def __post_init__(self):
        if self.poly_degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    @property
    def n(self) -> int:
        return self.weights.n


def _check_len(opr: GuidingOperator, x: Vector) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (opr.n,):
        raise DimensionMismatchError(f"expected length {opr.n}, got shape {x.shape}")
    return x


def apply_W(opr: GuidingOperator, x: Vector) -> Vector:
    """Smoothing filter W x (one sparse matvec over the window structure)."""
    return opr.weights.matrix @ _check_len(opr, x)


def apply_L(opr: GuidingOperator, x: Vector) -> Vector:
    """Guiding operator (D - W)^degree x via repeated base applications."""
    out = _check_len(opr, x)
    for _ in range(opr.poly_degree):
        out = opr.weights.degree * out - opr.weights.matrix @ out
    return out


def energy(opr: GuidingOperator, x: Vector) -> float:
    """Quadratic form x^T L x: the guided roughness energy of the signal."""
    return dot(_check_len(opr, x), apply_L(opr, x))


def operator_as_contract(opr: GuidingOperator, which: str = "L") -> LinearOperator:
    """Expose W or L under the shared linear-operator contract."""
    fn = apply_L if which == "L" else apply_W
    return LinearOperator(dim_in=opr.n, dim_out=opr.n, symmetric=True, apply=lambda x: fn(opr, x))


def build_guiding_operator(
    g: Image,
    params: KernelParams,
    poly_degree: int = 1,
    sinkhorn_tol: float = 1e-8,
    sinkhorn_max_iter: int = 100,
) -> tuple[GuidingOperator, SinkhornReport]:
    """Weights -> balancing -> guiding operator, the standard construction path."""
    weights = build_weights(g, params)
    balanced, report = sinkhorn_balance(weights, tol=sinkhorn_tol, max_iter=sinkhorn_max_iter)
    return GuidingOperator(weights=balanced, poly_degree=poly_degree), report


def dump_weights(w: GuidedWeights, stream: IO[str]) -> None:
    """Write `i j w` triplets sorted lexicographically by (i, j)."""
    coo = w.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        stream.write(f"{int(i)} {int(j)} {float(v)!r}\n")
