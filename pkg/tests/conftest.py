"""Shared fixtures and independent brute-force oracles.

The oracles here recompute weights, balancing, and dense operators with
plain Python loops and dense numpy arrays, deliberately avoiding the
package's vectorized/sparse code paths so agreement is meaningful.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from opguide.core import Image
from opguide.guidance import KernelParams

settings.register_profile(
    "repo",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def brute_force_weights(g: Image, p: KernelParams) -> np.ndarray:
    """Dense W(g) computed entry by entry with scalar arithmetic."""
    arr = g.data
    h, w = arr.shape[0], arr.shape[1]
    n = h * w
    dense = np.zeros((n, n))
    if p.kind == "bilateral":
        for y in range(h):
            for x in range(w):
                i = y * w + x
                for dy in range(-p.radius, p.radius + 1):
                    for dx in range(-p.radius, p.radius + 1):
                        y2, x2 = y + dy, x + dx
                        if not (0 <= y2 < h and 0 <= x2 < w):
                            continue
                        d2 = float(np.sum((arr[y, x] - arr[y2, x2]) ** 2))
                        spatial = np.exp(-(dx * dx + dy * dy) / (2.0 * p.sigma_spatial**2))
                        dense[i, y2 * w + x2] = spatial * np.exp(-d2 / (2.0 * p.sigma_range**2))
    else:
        for y in range(h):
            for x in range(w):
                i = y * w + x
                best = 0.0
                for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                    y2, x2 = y + dy, x + dx
                    if not (0 <= y2 < h and 0 <= x2 < w):
                        continue
                    d2 = float(np.sum((arr[y, x] - arr[y2, x2]) ** 2))
                    value = 1.0 / np.sqrt(d2 + p.epsilon**2)
                    dense[i, y2 * w + x2] = value
                    best = max(best, value)
                dense[i, i] = best if best > 0.0 else 1.0
    return dense


def dense_sinkhorn(dense: np.ndarray, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Reference symmetric balancing loop on a dense matrix."""
    dense = dense.copy()
    for _ in range(max_iter):
        sums = dense.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) < tol:
            break
        scale = 1.0 / np.sqrt(sums)
        dense = dense * scale[:, None] * scale[None, :]
    return dense


def dense_laplacian(dense_w: np.ndarray, degree: int = 1) -> np.ndarray:
    """(D - W)^degree with D = diag(W 1)."""
    base = np.diag(dense_w.sum(axis=1)) - dense_w
    out = np.eye(dense_w.shape[0])
    for _ in range(degree):
        out = base @ out
    return out


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
