"""Context encoder toolkit: masks, the NSD metric and trained-model inference."""

from ._core import (
    Model,
    apply_mask,
    central_mask,
    chi2_reference,
    coverage,
    downscale,
    grad_check_suite,
    load_model,
    mean_sq_distortion,
    nsd_estimate,
    pairwise_sq_distortion,
    random_blocks_mask,
    synth_sample,
    upscale,
)

__all__ = [
    "Model",
    "apply_mask",
    "central_mask",
    "chi2_reference",
    "coverage",
    "downscale",
    "grad_check_suite",
    "load_model",
    "mean_sq_distortion",
    "nsd_estimate",
    "pairwise_sq_distortion",
    "random_blocks_mask",
    "synth_sample",
    "upscale",
]
