"""Segmentation and morphometry metrics: Dice, RVE, ASD, CSA and its variability."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import InvalidArgumentError, UndefinedMetricError

DEFAULT_LEVELS = (2, 3)


def _binary_pair(pred, gt, threshold):
    if not pred.same_grid(gt):
        raise InvalidArgumentError(f"prediction grid {pred.dims} differs from GT grid {gt.dims}")
    return pred.data >= threshold, gt.data >= threshold


def dice(pred, gt, threshold=0.5):
    """Dice overlap of the masks binarised at ``threshold``; two empty masks score 1."""
    a, b = _binary_pair(pred, gt, threshold)
    sa, sb = int(a.sum()), int(b.sum())
    if sa + sb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (sa + sb)


def relative_volume_error(pred, gt, threshold=0.5):
    """Signed volume difference in percent of the GT volume (negative = under-segmentation)."""
    a, b = _binary_pair(pred, gt, threshold)
    voxel = float(np.prod(gt.spacing))
    v_gt = b.sum() * voxel
    if v_gt == 0:
        raise UndefinedMetricError("RVE is undefined for an empty GT mask")
    return 100.0 * (a.sum() * voxel - v_gt) / v_gt


_SIX = ndimage.generate_binary_structure(3, 1)


def surface_voxels(mask):
    """Foreground voxels with at least one 6-neighbour in the background (grid edge counts)."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    interior = ndimage.binary_erosion(padded, structure=_SIX, border_value=0)[1:-1, 1:-1, 1:-1]
    return mask & ~interior


def average_surface_distance(pred, gt, threshold=0.5):
    """Symmetric average surface distance in mm: the mean of both directed means."""
    a, b = _binary_pair(pred, gt, threshold)
    if not a.any() or not b.any():
        raise UndefinedMetricError("ASD is undefined when either mask is empty")
    sp = np.asarray(gt.spacing)
    pa = np.argwhere(surface_voxels(a)) * sp
    pb = np.argwhere(surface_voxels(b)) * sp
    d_ab = cKDTree(pb).query(pa)[0]
    d_ba = cKDTree(pa).query(pb)[0]
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


@dataclass
class CsaReport:
    """Cross-sectional areas (mm²).

    ``per_slice`` holds ``(z, area)`` for every slice with nonzero mask, and
    ``level_mean`` averages the slices whose level is in the requested set.
    When built by :func:`csa_pair` the GT/prediction level means and their
    absolute difference are filled in as well.
    """

    per_slice: list
    level_mean: float
    slice_levels: dict = field(default_factory=dict)
    gt_csa: float = None
    pred_csa: float = None
    abs_error: float = None


def slice_areas(mask):
    """Partial-volume-aware area of every axial slice: sum of soft values x in-plane voxel area."""
    return mask.data.astype(np.float64).sum(axis=(0, 1)) * (mask.spacing[0] * mask.spacing[1])


def csa(mask, level_map, levels=DEFAULT_LEVELS):
    """CSA per slice and averaged over slices belonging to ``levels``.

    A slice's level is read from ``level_map`` at the (rounded) centre of mass
    of the mask in that slice; level 0 means unlabeled.
    """
    if not mask.same_grid(level_map, atol=1e-4):
        raise InvalidArgumentError("mask and level map must share a grid")
    areas = slice_areas(mask)
    data = mask.data.astype(np.float64)
    nx, ny, _ = mask.dims
    wanted = {int(l) for l in levels}
    per_slice = []
    slice_levels = {}
    selected = []
    ii = np.arange(nx)
    jj = np.arange(ny)
    for z in np.flatnonzero(areas > 0):
        sl = data[:, :, z]
        tot = sl.sum()
        ci = int(np.clip(np.floor((sl.sum(axis=1) @ ii) / tot + 0.5), 0, nx - 1))
        cj = int(np.clip(np.floor((sl.sum(axis=0) @ jj) / tot + 0.5), 0, ny - 1))
        lvl = int(round(float(level_map.data[ci, cj, z])))
        per_slice.append((int(z), float(areas[z])))
        slice_levels[int(z)] = lvl
        if lvl != 0 and lvl in wanted:
            selected.append(float(areas[z]))
    if not selected:
        raise UndefinedMetricError(f"no slice of the mask lies in vertebral levels {sorted(wanted)}")
    return CsaReport(per_slice, float(np.mean(selected)), slice_levels)


def abs_csa_error(gt_csa, pred_csa):
    return abs(float(gt_csa) - float(pred_csa))


def csa_pair(pred, gt, level_map, levels=DEFAULT_LEVELS):
    """Prediction CSA report carrying the GT CSA and the absolute CSA error."""
    g = csa(gt, level_map, levels)
    p = csa(pred, level_map, levels)
    p.gt_csa = g.level_mean
    p.pred_csa = p.level_mean
    p.abs_error = abs_csa_error(g.level_mean, p.level_mean)
    return p


@dataclass
class ContrastPanel:
    participant: str
    csa: dict  # contrast -> mm²
    ddof: int = 0

    @property
    def std_csa(self):
        return std_csa(self, self.ddof)


def std_csa(panel, ddof=0):
    """Standard deviation of CSA across contrasts (population by default, ``ddof=1`` for sample)."""
    if isinstance(panel, ContrastPanel):
        panel = panel.csa
    values = np.asarray(list(panel.values()) if isinstance(panel, dict) else list(panel), dtype=np.float64)
    if values.size < 2:
        raise InvalidArgumentError("std of CSA needs at least 2 contrasts")
    if np.all(values == values[0]):
        return 0.0
    return float(np.std(values, ddof=ddof))
