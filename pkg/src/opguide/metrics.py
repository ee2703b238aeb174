"""Quality metrics and reproducible degradation for experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError, Image


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean Gaussian noise with a fixed seed, so runs are repeatable."""

    variance: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ValueError(f"variance must be nonnegative, got {self.variance}")


def add_noise(img: Image, spec: NoiseSpec) -> Image:
    """Add i.i.d. Gaussian noise.  The result is not clamped: noisy values may
    leave [0, 1] and are only clipped if the image is later saved to a file."""
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, np.sqrt(spec.variance), size=img.data.shape)
    return Image(img.data + noise)


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    mse: float
    max_value: float = 1.0


def psnr(img: Image, reference: Image, max_value: float = 1.0) -> MetricReport:
    """Peak signal-to-noise ratio against a reference, in dB.

    Identical images report infinite PSNR (zero MSE).
    """
    if img.data.shape != reference.data.shape:
        raise DimensionMismatchError(
            f"image shape {img.data.shape} does not match reference {reference.data.shape}"
        )
    diff = img.data - reference.data
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return MetricReport(psnr=np.inf, mse=0.0, max_value=max_value)
    value = 10.0 * np.log10(max_value * max_value / mse)
    return MetricReport(psnr=float(value), mse=mse, max_value=max_value)
