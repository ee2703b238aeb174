"""Deterministic synthetic scenes for tests and bundled fixtures.

All scenes are piecewise constant with shared geometry between the target and
its guidance, so edges line up exactly while colors differ.  Shapes are painted
in a fixed order; no randomness is involved, which keeps committed fixture
files reproducible from this module alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Image


def _disk_mask(height: int, width: int, center: tuple[int, int], radius: float) -> np.ndarray:
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    return (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= radius**2


def _paint(canvas: np.ndarray, mask: np.ndarray, color: tuple[float, ...]) -> None:
    canvas[mask] = np.asarray(color, dtype=np.float64)


def flash_pair(height: int = 96, width: int = 128) -> tuple[Image, Image]:
    """Ambient/flash-style color pair: same shapes, different palettes.

    Returns (truth, guide).  The truth plays the role of a clean ambient shot
    that experiments degrade; the guide is the brighter flash exposure.
    """
    truth = np.empty((height, width, 3), dtype=np.float64)
    guide = np.empty((height, width, 3), dtype=np.float64)
    truth[:] = (0.25, 0.30, 0.35)
    guide[:] = (0.85, 0.80, 0.70)

    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    band = (rows + cols >= 130) & (rows + cols < 160)
    _paint(truth, band, (0.60, 0.60, 0.15))
    _paint(guide, band, (0.90, 0.88, 0.50))

    rect = np.zeros((height, width), dtype=bool)
    rect[12:44, 10:58] = True
    _paint(truth, rect, (0.70, 0.25, 0.20))
    _paint(guide, rect, (0.95, 0.55, 0.45))

    disk = _disk_mask(height, width, (60, 92), 20.0)
    _paint(truth, disk, (0.20, 0.55, 0.30))
    _paint(guide, disk, (0.50, 0.90, 0.65))

    return Image(truth), Image(guide)


@dataclass(frozen=True)
class DepthScene:
    """Depth target with color guidance whose palette has extra edges.

    ``guidance_edge_mask`` marks pixels near color-only edges (depth constant
    there); ``edge_free_mask`` marks pixels far from every edge.  Both stay
    clear of depth discontinuities so region-restricted errors separate
    texture-copying artifacts from ordinary edge blur.
    """

    truth: Image
    guide: Image
    guidance_edge_mask: np.ndarray
    edge_free_mask: np.ndarray


def _edge_map(values: np.ndarray) -> np.ndarray:
    if values.ndim == 2:
        values = values[:, :, None]
    edge = np.zeros(values.shape[:2], dtype=bool)
    diff_v = np.any(values[1:, :] != values[:-1, :], axis=2)
    diff_h = np.any(values[:, 1:] != values[:, :-1], axis=2)
    edge[1:, :] |= diff_v
    edge[:-1, :] |= diff_v
    edge[:, 1:] |= diff_h
    edge[:, :-1] |= diff_h
    return edge


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask
    return ndimage.binary_dilation(mask, structure=np.ones((3, 3), dtype=bool), iterations=radius)


def depth_pair(height: int = 128, width: int = 128) -> DepthScene:
    """Depth map plus RGB guidance with color stripes inside flat regions."""
    depth = np.full((height, width), 0.20, dtype=np.float64)
    guide = np.empty((height, width, 3), dtype=np.float64)
    guide[:] = (0.30, 0.40, 0.55)

    rect = np.zeros((height, width), dtype=bool)
    rect[20:72, 14:76] = True
    depth[rect] = 0.55
    _paint(guide, rect, (0.75, 0.45, 0.25))

    disk = _disk_mask(height, width, (92, 92), 22.0)
    depth[disk] = 0.85
    _paint(guide, disk, (0.35, 0.70, 0.40))

    # Color-only stripes: the depth stays flat while the guidance alternates.
    cols = np.arange(width)[None, :]
    stripes_rect = rect & ((((cols - 14) // 8) % 2) == 1)
    _paint(guide, stripes_rect, (0.25, 0.55, 0.75))

    rows = np.arange(height)[:, None]
    strip = np.zeros((height, width), dtype=bool)
    strip[100:124, 8:56] = True
    stripes_bg = strip & ((((rows - 100) // 8) % 2) == 1)
    _paint(guide, stripes_bg, (0.65, 0.35, 0.55))

    depth_edges = _edge_map(depth)
    color_edges = _edge_map(guide)
    near_depth = _dilate(depth_edges, 3)
    guidance_edge_mask = _dilate(color_edges, 1) & ~near_depth
    edge_free_mask = ~_dilate(color_edges, 3) & ~near_depth

    return DepthScene(
        truth=Image(depth[:, :, None]),
        guide=Image(guide),
        guidance_edge_mask=guidance_edge_mask,
        edge_free_mask=edge_free_mask,
    )


def blocks_scene(height: int, width: int, seed: int = 0) -> tuple[Image, Image]:
    """Small piecewise-constant (target, guide) pair for dense cross-checks.

    A seeded RNG picks block values so different seeds give different scenes,
    while the block layout keeps target and guide edges aligned.
    """
    rng = np.random.default_rng(seed)
    target = np.empty((height, width), dtype=np.float64)
    guide = np.empty((height, width, 3), dtype=np.float64)
    block = max(2, min(height, width) // 3)
    for r0 in range(0, height, block):
        for c0 in range(0, width, block):
            target[r0 : r0 + block, c0 : c0 + block] = rng.uniform(0.1, 0.9)
            guide[r0 : r0 + block, c0 : c0 + block] = rng.uniform(0.1, 0.9, size=3)
    return Image(target[:, :, None]), Image(guide)
