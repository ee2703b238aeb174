"""End-to-end sample-consistent reconstruction.

Pipeline per channel: zero-fill the sample onto the HR grid, optionally
denoise it with one first-order smoothing step, re-impose the denoised values
as the consistency target, build a consistent initial guess, solve the
projected guiding system by CG for the correction, and subtract.  Optional
post-smoothing and DC-level adjustment follow.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DimensionMismatchError, Image, Vector, flatten, image_from_channels
from .guidance import (
    GuidingOperator,
    KernelParams,
    SinkhornReport,
    apply_L,
    build_guiding_operator,
)
from .sampling import (
    SamplingOperator,
    apply_projector,
    consistent_initial_guess,
    downsample,
    upsample_adjoint,
)
from .solver import CgControls, CgReport, cg_solve, projected_operator

PRE_MODES = ("projected", "lr-filter")


@dataclass(frozen=True)
class ReconstructionConfig:
    """Everything a reconstruction run needs besides the two input images."""

    factor: int | tuple[int, int] = 4
    offset: int | tuple[int, int] = 0
    kernel: KernelParams = field(default_factory=KernelParams)
    poly_degree: int = 1
    cg: CgControls = field(default_factory=CgControls)
    rho_pre: float = 0.0
    rho_post: float = 0.0
    adjust_dc: bool = False
    init_mode: str = "bilinear"
    pre_mode: str = "projected"
    sinkhorn_tol: float = 1e-8
    sinkhorn_max_iter: int = 100

    def __post_init__(self):
        if self.rho_pre < 0 or self.rho_post < 0:
            raise ValueError("smoothing strengths must be nonnegative")
        if self.rho_pre > 1 or self.rho_post > 1:
            warnings.warn(
                f"smoothing strengths above 1 (rho_pre={self.rho_pre}, "
                f"rho_post={self.rho_post}) leave the first-order regime",
                stacklevel=2,
            )
        if self.pre_mode not in PRE_MODES:
            raise ValueError(f"pre_mode must be one of {PRE_MODES}, got {self.pre_mode!r}")


def pre_smooth(
    s: Vector, S: SamplingOperator, L: GuidingOperator, rho_pre: float
) -> Vector:
    """First-order denoising of the zero-filled sample: s - rho * S L s.

    The projection keeps the output supported on the retained pixels, so it
    remains a valid zero-filled sample.
    """
    s = np.asarray(s, dtype=np.float64)
    if rho_pre == 0.0:
        return s.copy()
    return s - rho_pre * apply_projector(S, apply_L(L, s))


def post_smooth(x: Vector, L: GuidingOperator, rho_post: float) -> Vector:
    """One explicit smoothing step x - rho * L x removing oscillatory content."""
    x = np.asarray(x, dtype=np.float64)
    if rho_post == 0.0:
        return x.copy()
    return x - rho_post * apply_L(L, x)


def adjust_dc(x: Vector, y: Vector, A: SamplingOperator) -> Vector:
    """Shift x by a constant so its mean level matches the sample's."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (A.hr_size,) or y.shape != (A.lr_size,):
        raise DimensionMismatchError(
            f"expected HR length {A.hr_size} and LR length {A.lr_size}, "
            f"got {x.shape} and {y.shape}"
        )
    return x + (float(np.mean(y)) - float(np.mean(x)))


def _smooth_sample_lr(y: Vector, lr_guiding: GuidingOperator, rho_pre: float) -> Vector:
    """LR-grid variant of pre-smoothing: filter the sample before upsampling."""
    return post_smooth(y, lr_guiding, rho_pre)


def _reconstruct_channel(
    y: Vector,
    sampling: SamplingOperator,
    guiding: GuidingOperator,
    cfg: ReconstructionConfig,
    lr_guiding: GuidingOperator | None = None,
) -> tuple[Vector, CgReport]:
    y = np.asarray(y, dtype=np.float64)
    if cfg.rho_pre > 0.0 and cfg.pre_mode == "lr-filter":
        if lr_guiding is None:
            raise ValueError("lr-filter pre-smoothing requires an LR guiding operator")
        y_target = _smooth_sample_lr(y, lr_guiding, cfg.rho_pre)
    else:
        s = upsample_adjoint(sampling, y)
        s_smooth = pre_smooth(s, sampling, guiding, cfg.rho_pre)
        y_target = downsample(sampling, s_smooth)

    x0 = consistent_initial_guess(sampling, y_target, cfg.init_mode)
    system = projected_operator(sampling, guiding)
    b = system(x0)
    u, report = cg_solve(system, b, cfg.cg)
    x = x0 - u
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(
            f"non-finite reconstruction (cg iterations={report.iterations_used}, "
            f"residual={report.final_rel_residual})"
        )
    if cfg.rho_post > 0.0:
        x = post_smooth(x, guiding, cfg.rho_post)
    if cfg.adjust_dc:
        x = adjust_dc(x, y, sampling)
    return x, report


def _build_operators(
    cfg: ReconstructionConfig, g: Image
) -> tuple[SamplingOperator, GuidingOperator, GuidingOperator | None, SinkhornReport]:
    sampling = SamplingOperator(
        hr_width=g.width, hr_height=g.height, factor=cfg.factor, offset=cfg.offset
    )
    guiding, report = build_guiding_operator(
        g,
        cfg.kernel,
        poly_degree=cfg.poly_degree,
        sinkhorn_tol=cfg.sinkhorn_tol,
        sinkhorn_max_iter=cfg.sinkhorn_max_iter,
    )
    lr_guiding = None
    if cfg.rho_pre > 0.0 and cfg.pre_mode == "lr-filter":
        lr_g = image_from_channels(
            [downsample(sampling, flatten(g, c)) for c in range(g.channels)],
            sampling.lr_width,
            sampling.lr_height,
        )
        lr_guiding, _ = build_guiding_operator(
            lr_g,
            cfg.kernel,
            poly_degree=cfg.poly_degree,
            sinkhorn_tol=cfg.sinkhorn_tol,
            sinkhorn_max_iter=cfg.sinkhorn_max_iter,
        )
    return sampling, guiding, lr_guiding, report


def reconstruct(y: Vector, cfg: ReconstructionConfig, g: Image) -> tuple[Vector, CgReport]:
    """Reconstruct one channel from its LR sample, guided by the HR image g."""
    sampling, guiding, lr_guiding, _ = _build_operators(cfg, g)
    return _reconstruct_channel(y, sampling, guiding, cfg, lr_guiding)


def reconstruct_image(
    lr: Image, cfg: ReconstructionConfig, g: Image
) -> tuple[Image, list[CgReport]]:
    """Reconstruct every channel of an LR image with a shared guiding operator."""
    sampling, guiding, lr_guiding, _ = _build_operators(cfg, g)
    if (lr.width, lr.height) != (sampling.lr_width, sampling.lr_height):
        raise DimensionMismatchError(
            f"LR image is {lr.width}x{lr.height} but factor {cfg.factor} on a "
            f"{g.width}x{g.height} guide implies {sampling.lr_width}x{sampling.lr_height}"
        )
    channels = []
    reports = []
    for c in range(lr.channels):
        x, report = _reconstruct_channel(flatten(lr, c), sampling, guiding, cfg, lr_guiding)
        channels.append(x)
        reports.append(report)
    return image_from_channels(channels, g.width, g.height), reports
