"""Soft ground-truth fusion, augmentation, loss kernels and morphometric evaluation
for contrast-agnostic spinal cord segmentation."""

__version__ = "0.1.0"

from .volume import (
    Volume3D, reorient, resample, resample_to, resample_like, center_crop_or_pad, znormalize,
    sample_at, binarize,
)
from .nifti import read_nifti, write_nifti
from .manifest import DatasetManifest, load_manifest
from .registration import SliceTransformStack, register_com, apply_warp, invert, compose
from .fusion import FusionEntry, FusionInput, SoftGtBundle, make_fov_mask, fuse_weighted, generate_soft_gt
from .augment import AugmentConfig, SamplePair, augment_pair
from .losses import AWingParams, norm_relu, awing_loss, awing_grad, soft_dice_loss
from .metrics import (
    CsaReport, ContrastPanel, dice, relative_volume_error, average_surface_distance, csa, csa_pair,
    std_csa, abs_csa_error,
)
from .stats import wilcoxon_signed_rank, bonferroni, pairwise_wilcoxon
