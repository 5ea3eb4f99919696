"""kprior: unsupervised blur-kernel estimation for blind super-resolution.

A low-resolution observation is explained as a blurred, subsampled view of an
unknown sharp image. The toolkit estimates the blur kernel without any
pre-training by alternating three stages: Monte-Carlo sampling of candidate
kernels weighted by reconstruction error (the moving kernel prior), a
Langevin-style update of a small generator net toward both the prior and the
data, and a pluggable restorer that refines the image under the current
kernel.
"""

from .degradation import DegradeConfig, degrade, grad_wrt_image, grad_wrt_kernel, residual
from .estimator import EstimatorConfig, estimate_kernel, langevin_update, prior_loss
from .kernelnet import KernelNetParams, backward, forward, init_params, num_params
from .kernels import (
    GaussianLatent,
    MotionLatent,
    center_of_mass,
    delta_kernel,
    gaussian_kernel,
    motion_kernel,
    normalize_kernel,
    sigma_range,
    standard_side,
)
from .metrics import MetricReport, kernel_psnr, psnr, ssim
from .pipeline import RunConfig, grid_search_oracle, resolve_config, run, synth_instance
from .restorer import RestorerConfig, init_image, restore_step, tv_energy, tv_subgradient
from .sampling import (
    SamplerConfig,
    SamplerState,
    candidate_weights,
    initial_state,
    kernel_prior,
    sample_candidates,
    sample_prior,
)

__version__ = "0.1.0"

__all__ = [
    "DegradeConfig",
    "EstimatorConfig",
    "GaussianLatent",
    "KernelNetParams",
    "MetricReport",
    "MotionLatent",
    "RestorerConfig",
    "RunConfig",
    "SamplerConfig",
    "SamplerState",
    "backward",
    "candidate_weights",
    "center_of_mass",
    "degrade",
    "delta_kernel",
    "estimate_kernel",
    "forward",
    "gaussian_kernel",
    "grad_wrt_image",
    "grad_wrt_kernel",
    "grid_search_oracle",
    "init_image",
    "init_params",
    "initial_state",
    "kernel_prior",
    "kernel_psnr",
    "langevin_update",
    "motion_kernel",
    "normalize_kernel",
    "num_params",
    "prior_loss",
    "psnr",
    "residual",
    "resolve_config",
    "restore_step",
    "run",
    "sample_candidates",
    "sample_prior",
    "sigma_range",
    "ssim",
    "standard_side",
    "synth_instance",
    "tv_energy",
    "tv_subgradient",
]
