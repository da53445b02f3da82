"""3D volume container and geometric/intensity primitives.

World coordinates are NIfTI RAS+ millimetres. Orientation codes name, for each
voxel axis, the anatomical side the axis *starts from* (the SCT/ITK convention),
so ``"RPI"`` means x runs right-to-left, y posterior-to-anterior and z
inferior-to-superior; the corresponding affine has a negative x column.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputWarning, InvalidArgumentError
from .interp import interpolate, interpolate_axis, scheme_order

# letter of the side each world direction starts from: +x runs L->R, etc.
_START_LETTER = {(0, 1): "L", (0, -1): "R", (1, 1): "P", (1, -1): "A", (2, 1): "I", (2, -1): "S"}
_LETTER_AXIS = {"L": (0, 1), "R": (0, -1), "P": (1, 1), "A": (1, -1), "I": (2, 1), "S": (2, -1)}


@dataclass(frozen=True, eq=False)
class Volume3D:
    """An immutable 3D scalar grid with a voxel-to-world affine.

    ``data`` is stored as a read-only float32 array indexed ``[x, y, z]``.
    Spacing and orientation are derived from the affine.
    """

    data: np.ndarray
    affine: np.ndarray

    def __init__(self, data, affine=None, spacing=None):
        arr = np.array(data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise InvalidArgumentError(f"expected a non-empty 3D array, got shape {arr.shape}")
        if affine is None:
            sx, sy, sz = (1.0, 1.0, 1.0) if spacing is None else spacing
            affine = np.diag([-float(sx), float(sy), float(sz), 1.0])
        aff = np.array(affine, dtype=np.float64)
        if aff.shape != (4, 4):
            raise InvalidArgumentError(f"affine must be 4x4, got {aff.shape}")
        if abs(np.linalg.det(aff[:3, :3])) < 1e-12:
            raise InvalidArgumentError("affine is singular")
        if spacing is not None:
            norms = np.linalg.norm(aff[:3, :3], axis=0)
            if np.any(np.abs(norms - np.asarray(spacing, dtype=float)) > 1e-4):
                raise InvalidArgumentError(f"spacing {tuple(spacing)} inconsistent with affine column norms {norms}")
        arr.setflags(write=False)
        aff.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "affine", aff)

    @property
    def dims(self):
        return tuple(int(n) for n in self.data.shape)

    @property
    def spacing(self):
        return tuple(float(s) for s in np.linalg.norm(self.affine[:3, :3], axis=0))

    @property
    def orientation(self):
        return affine_orientation(self.affine)

    def with_data(self, data):
        """New volume on the same grid holding ``data``."""
        return Volume3D(data, self.affine)

    def same_grid(self, other, atol=1e-6):
        return self.dims == other.dims and np.allclose(self.affine, other.affine, atol=atol, rtol=0)

    def __repr__(self):
        return f"Volume3D(dims={self.dims}, spacing={tuple(round(s, 4) for s in self.spacing)}, orientation={self.orientation!r})"


def affine_orientation(affine):
    """Orientation code of an affine, by the dominant world axis of each column."""
    rot = np.asarray(affine, dtype=float)[:3, :3]
    letters = []
    used = set()
    for col in range(3):
        v = rot[:, col]
        order = np.argsort(-np.abs(v))
        axis = next(int(a) for a in order if int(a) not in used)
        used.add(axis)
        letters.append(_START_LETTER[(axis, 1 if v[axis] > 0 else -1)])
    return "".join(letters)


def _parse_code(code):
    if not isinstance(code, str) or len(code) != 3:
        raise InvalidArgumentError(f"orientation code must be 3 letters, got {code!r}")
    code = code.upper()
    try:
        axes = [_LETTER_AXIS[c] for c in code]
    except KeyError:
        raise InvalidArgumentError(f"invalid orientation letter in {code!r}") from None
    if sorted(a for a, _ in axes) != [0, 1, 2]:
        raise InvalidArgumentError(f"orientation code {code!r} repeats an anatomical axis")
    return axes


def reorient(v, target):
    """Permute/flip voxel axes so that ``v`` has orientation ``target``.

    Data is never interpolated; world positions of voxel centres are preserved.
    """
    tgt = _parse_code(target)
    src = _parse_code(v.orientation)
    src_axis_of = {w: (i, s) for i, (w, s) in enumerate(src)}
    data = v.data
    perm = []
    flips = []
    for world_axis, sign in tgt:
        i, s = src_axis_of[world_axis]
        perm.append(i)
        flips.append(s != sign)
    data = np.transpose(data, perm)
    m = np.zeros((4, 4))
    m[3, 3] = 1.0
    for k, (i, flip) in enumerate(zip(perm, flips)):
        if flip:
            data = np.flip(data, axis=k)
            m[i, k] = -1.0
            m[i, 3] = v.dims[i] - 1
        else:
            m[i, k] = 1.0
    return Volume3D(data, v.affine @ m)


def resample(v, target_spacing, scheme="linear"):
    """Resample onto an axis-aligned grid with new voxel spacing.

    The first voxel centre is kept fixed; new dims are
    ``round(dims * spacing / target_spacing)`` (at least 1). Edge voxels are
    clamped, so constant fields stay exactly constant.
    """
    ts = np.asarray(target_spacing, dtype=float)
    if ts.shape != (3,) or np.any(ts <= 0):
        raise InvalidArgumentError(f"target spacing must be 3 positive values, got {target_spacing!r}")
    order = scheme_order(scheme)
    old = np.asarray(v.spacing)
    dims = np.asarray(v.dims)
    new_dims = np.maximum(1, np.round(dims * old / ts).astype(int))
    data = v.data.astype(np.float64)
    for axis in range(3):
        ratio = ts[axis] / old[axis]
        if new_dims[axis] == dims[axis] and abs(ratio - 1.0) < 1e-12:
            continue
        coords = np.arange(new_dims[axis]) * ratio
        data = interpolate_axis(data, axis, coords, order=order, mode="clamp")
    aff = np.array(v.affine)
    aff[:3, :3] = aff[:3, :3] * (ts / old)[None, :]
    return Volume3D(data, aff)


def resample_to(v, affine, dims, scheme="linear"):
    """Resample ``v`` onto an arbitrary target grid through world coordinates.

    Points outside ``v`` are background (0). If the grids already coincide the
    data is copied unchanged.
    """
    dims = tuple(int(d) for d in dims)
    affine = np.asarray(affine, dtype=float)
    if v.dims == dims and np.allclose(v.affine, affine, atol=1e-9, rtol=0):
        return Volume3D(v.data, affine)
    vox_to_vox = np.linalg.inv(v.affine) @ affine
    grid = np.indices(dims, dtype=np.float64).reshape(3, -1)
    src = vox_to_vox[:3, :3] @ grid + vox_to_vox[:3, 3:4]
    out = interpolate(v.data, src.reshape((3,) + dims), order=scheme_order(scheme), mode="zero")
    return Volume3D(out, affine)


def resample_like(v, ref, scheme="linear"):
    return resample_to(v, ref.affine, ref.dims, scheme)


def center_crop_or_pad(v, target_dims, pad_value=0.0):
    """Centre-crop and/or pad each axis to ``target_dims``.

    Odd size differences put the extra voxel on the high side (the crop window
    and the padded content are both shifted toward index 0). The affine origin
    is moved so retained voxels keep their world positions.
    """
    target = tuple(int(d) for d in target_dims)
    if len(target) != 3 or min(target) < 1:
        raise InvalidArgumentError(f"target dims must be 3 positive ints, got {target_dims!r}")
    out = np.full(target, pad_value, dtype=np.float32)
    src_sl, dst_sl, shift = [], [], []
    for old, new in zip(v.dims, target):
        if new <= old:
            start = (old - new) // 2
            src_sl.append(slice(start, start + new))
            dst_sl.append(slice(0, new))
            shift.append(start)
        else:
            before = (new - old) // 2
            src_sl.append(slice(0, old))
            dst_sl.append(slice(before, before + old))
            shift.append(-before)
    out[tuple(dst_sl)] = v.data[tuple(src_sl)]
    aff = np.array(v.affine)
    aff[:3, 3] = aff[:3, :3] @ np.asarray(shift, dtype=float) + aff[:3, 3]
    return Volume3D(out, aff)


def znormalize(v):
    """Zero-mean, unit population-STD intensity normalisation.

    A constant volume (STD < 1e-12) yields all zeros and a
    :class:`DegenerateInputWarning`.
    """
    x = v.data.astype(np.float64)
    std = x.std()
    if std < 1e-12:
        warnings.warn("constant volume cannot be z-normalised; returning zeros", DegenerateInputWarning, stacklevel=2)
        return v.with_data(np.zeros(v.dims, dtype=np.float32))
    return v.with_data((x - x.mean()) / std)


def world_to_voxel(v, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inv = np.linalg.inv(v.affine)
    return (inv[:3, :3] @ pts.T + inv[:3, 3:4])


def voxel_to_world(v, index):
    idx = np.atleast_2d(np.asarray(index, dtype=float))
    return (v.affine[:3, :3] @ idx.T + v.affine[:3, 3:4]).T


def sample_at(v, world_point, scheme="linear"):
    """Interpolated value at a world point (mm); background outside the grid is 0."""
    order = scheme_order(scheme)
    if order == 3:
        raise InvalidArgumentError("sample_at supports 'linear' and 'nearest' only")
    vox = world_to_voxel(v, world_point)
    return float(interpolate(v.data, vox, order=order, mode="zero")[0])


def is_soft_mask(v):
    return bool(np.all((v.data >= 0) & (v.data <= 1)))


def is_binary_mask(v):
    return bool(np.all((v.data == 0) | (v.data == 1)))


def binarize(v, threshold=0.5):
    """Foreground where value >= threshold, returned as a boolean array."""
    return np.asarray(v.data if isinstance(v, Volume3D) else v) >= threshold
