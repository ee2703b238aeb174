"""Operator-guided, sample-consistent signal reconstruction (super-resolution).

A high-resolution image is reconstructed from a decimated, possibly noisy
sample: the reconstruction matches the sample exactly at the retained pixels
and fills the remaining pixels by minimizing the quadratic energy of a
guiding operator built from an edge-aligned high-resolution guidance image.
"""

from .core import Image, LinearOperator, Vector, dot, flatten, image_from_array, unflatten
from .guidance import GuidedWeights, GuidingOperator, KernelParams, build_guiding_operator, build_weights, sinkhorn_balance
from .metrics import MetricReport, NoiseSpec, add_noise, psnr
from .reconstruct import ReconstructionConfig, reconstruct, reconstruct_image
from .sampling import SamplingOperator, consistent_initial_guess, downsample, upsample_adjoint
from .solver import CgControls, CgReport, cg_solve, projected_operator

__all__ = [
    "Image",
    "LinearOperator",
    "Vector",
    "dot",
    "flatten",
    "image_from_array",
    "unflatten",
    "GuidedWeights",
    "GuidingOperator",
    "KernelParams",
    "build_guiding_operator",
    "build_weights",
    "sinkhorn_balance",
    "MetricReport",
    "NoiseSpec",
    "add_noise",
    "psnr",
    "ReconstructionConfig",
    "reconstruct",
    "reconstruct_image",
    "SamplingOperator",
    "consistent_initial_guess",
    "downsample",
    "upsample_adjoint",
    "CgControls",
    "CgReport",
    "cg_solve",
    "projected_operator",
]
