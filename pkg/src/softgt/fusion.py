"""Soft ground-truth fusion across contrasts.

Pipeline for one participant:

1. FOV mask per contrast (axial dilation of its segmentation, gaps between
   covered slices filled);
2. segmentation and FOV brought onto the reference grid and through the
   contrast's slice-wise warp (linear interpolation, FOVs kept fractional);
3. FOV-weighted voxelwise mean over contrasts;
4. the fused mask pulled back through each inverse warp to every native grid.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputWarning, InvalidArgumentError
from .registration import SliceTransformStack, apply_warp, invert
from .volume import Volume3D, resample_to

DEFAULT_DILATION_RADIUS = 25


@dataclass
class FusionEntry:
    contrast_id: str
    seg: Volume3D
    warp_to_ref: SliceTransformStack
    fov_native: Volume3D = None  # built from seg when omitted


@dataclass
class FusionInput:
    entries: list

    def __post_init__(self):
        if not self.entries:
            raise InvalidArgumentError("FusionInput needs at least one entry")
        ids = [e.contrast_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate contrast ids in {ids}")
        for e in self.entries:
            if e.fov_native is None:
                continue
            if not e.fov_native.same_grid(e.seg):
                raise InvalidArgumentError(f"{e.contrast_id}: FOV and segmentation grids differ")
            if np.any((e.seg.data > 0) & (e.fov_native.data <= 0)):
                raise InvalidArgumentError(f"{e.contrast_id}: FOV does not cover the segmentation")

    def get(self, contrast_id):
        for e in self.entries:
            if e.contrast_id == contrast_id:
                return e
        raise InvalidArgumentError(f"contrast {contrast_id!r} not in fusion input")


@dataclass
class SoftGtBundle:
    reference_soft: Volume3D
    native_soft: dict
    coverage: dict = field(default_factory=dict)  # contrast -> mean FOV weight inside the FOV union


def disk(radius):
    r = int(radius)
    i, j = np.mgrid[-r:r + 1, -r:r + 1]
    return (i * i + j * j) <= r * r


def make_fov_mask(seg, dilation_radius_vox=DEFAULT_DILATION_RADIUS):
    """Binary FOV mask: per-slice disk dilation of ``seg``, with inner gaps filled.

    Empty slices lying between nonempty ones receive the union of the nearest
    dilated slices below and above.
    """
    if dilation_radius_vox < 0:
        raise InvalidArgumentError("dilation radius must be >= 0")
    fg = seg.data > 0
    out = np.zeros(seg.dims, dtype=bool)
    nonempty = np.flatnonzero(fg.any(axis=(0, 1)))
    if nonempty.size == 0:
        warnings.warn("empty segmentation gives an empty FOV mask", DegenerateInputWarning, stacklevel=2)
        return seg.with_data(out)
    se = disk(dilation_radius_vox)
    for z in nonempty:
        if dilation_radius_vox == 0:
            out[:, :, z] = fg[:, :, z]
        else:
            out[:, :, z] = ndimage.binary_dilation(fg[:, :, z], structure=se)
    for lo, hi in zip(nonempty[:-1], nonempty[1:]):
        if hi - lo > 1:
            out[:, :, lo + 1:hi] = (out[:, :, lo] | out[:, :, hi])[:, :, None]
    return seg.with_data(out)


def fuse_weighted(entries_in_ref):
    """FOV-weighted voxelwise mean of soft segmentations on a shared grid.

    ``entries_in_ref`` is a sequence of ``(seg, fov)`` volume pairs, or a
    mapping ``contrast_id -> (seg, fov)``; mappings are reduced in sorted-key
    order so the result does not depend on insertion order. Voxels with zero
    total FOV weight are 0.
    """
    items = [entries_in_ref[k] for k in sorted(entries_in_ref)] if isinstance(entries_in_ref, dict) else list(entries_in_ref)
    if not items:
        raise InvalidArgumentError("fuse_weighted needs at least one entry")
    ref = items[0][0]
    num = np.zeros(ref.dims, dtype=np.float64)
    den = np.zeros(ref.dims, dtype=np.float64)
    for seg, fov in items:
        if not (seg.same_grid(ref) and fov.same_grid(ref)):
            raise InvalidArgumentError("all fusion inputs must share the reference grid")
        w = fov.data.astype(np.float64)
        num += w * seg.data
        den += w
    out = np.zeros(ref.dims, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return ref.with_data(np.clip(out, 0.0, 1.0))


def generate_soft_gt(fusion_input, ref_contrast, dilation_radius_vox=DEFAULT_DILATION_RADIUS):
    """Fuse all contrasts into one soft GT and map it back to every native grid."""
    ref_entry = fusion_input.get(ref_contrast)
    ref_grid = ref_entry.seg
    in_ref = {}
    for e in sorted(fusion_input.entries, key=lambda e: e.contrast_id):
        try:
            fov = e.fov_native if e.fov_native is not None else make_fov_mask(e.seg, dilation_radius_vox)
            seg_r = resample_to(e.seg, ref_grid.affine, ref_grid.dims, "linear")
            fov_r = resample_to(fov, ref_grid.affine, ref_grid.dims, "linear")
            in_ref[e.contrast_id] = (apply_warp(seg_r, e.warp_to_ref, "linear"),
                                     apply_warp(fov_r, e.warp_to_ref, "linear"))
        except InvalidArgumentError as exc:
            raise InvalidArgumentError(f"contrast {e.contrast_id}: {exc}") from exc
    fused = fuse_weighted(in_ref)

    weights = np.stack([in_ref[c][1].data for c in sorted(in_ref)]).astype(np.float64)
    union = weights.sum(axis=0) > 0
    coverage = {c: (float(weights[k][union].mean()) if union.any() else 0.0) for k, c in enumerate(sorted(in_ref))}

    native = {}
    for e in fusion_input.entries:
        back = apply_warp(fused, invert(e.warp_to_ref), "linear")
        nat = resample_to(back, e.seg.affine, e.seg.dims, "linear")
        native[e.contrast_id] = nat.with_data(np.clip(nat.data, 0.0, 1.0))
    return SoftGtBundle(fused, native, coverage)
