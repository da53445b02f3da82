"""Slice-wise centre-of-mass rigid registration between masks.

Each axial slice ``z`` carries an in-plane rigid transform mapping source
coordinates onto the target::

    T(p) = R(rot) (p - c) + c + t

with ``p`` in-plane millimetres (``(i * sx, j * sy)``), ``c`` the rotation
centre (the source slice centre of mass), ``t = (tx, ty)`` in mm and ``rot`` in
degrees, counter-clockwise in the (i, j) plane.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, NoOverlapError
from .interp import interpolate, scheme_order
from .volume import Volume3D

WARP_CSV_COLUMNS = ("z", "tx", "ty", "rot", "cx", "cy", "empty")


@dataclass(frozen=True)
class SliceTransformStack:
    """Per-slice rigid transforms on a reference grid (arrays of length nz)."""

    tx: np.ndarray
    ty: np.ndarray
    rot: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    empty: np.ndarray
    reference_dims: tuple
    reference_spacing: tuple

    def __post_init__(self):
        nz = self.reference_dims[2]
        for name in ("tx", "ty", "rot", "cx", "cy", "empty"):
            arr = np.asarray(getattr(self, name), dtype=bool if name == "empty" else np.float64)
            if arr.shape != (nz,):
                raise InvalidArgumentError(f"{name} must have one entry per slice ({nz}), got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "reference_dims", tuple(int(d) for d in self.reference_dims))
        object.__setattr__(self, "reference_spacing", tuple(float(s) for s in self.reference_spacing))

    @classmethod
    def identity(cls, dims, spacing):
        nz = int(dims[2])
        zeros = np.zeros(nz)
        return cls(zeros, zeros, zeros, zeros, zeros, np.zeros(nz, dtype=bool), dims, spacing)

    @classmethod
    def identity_like(cls, v):
        return cls.identity(v.dims, v.spacing)

    def __len__(self):
        return len(self.tx)

    def matches(self, v, atol=1e-6):
        return v.dims == self.reference_dims and np.allclose(v.spacing, self.reference_spacing, atol=atol, rtol=0)


def invert(w):
    """Per-slice rigid inverse: counter-rotate and negate the translation."""
    rot = np.deg2rad(w.rot)
    c, s = np.cos(rot), np.sin(rot)
    # -R^T t
    itx = -(c * w.tx + s * w.ty)
    ity = -(-s * w.tx + c * w.ty)
    return SliceTransformStack(itx, ity, -w.rot, w.cx, w.cy, w.empty, w.reference_dims, w.reference_spacing)


def compose(first, second):
    """Transform applying ``first`` then ``second``, expressed about ``first``'s centres."""
    if first.reference_dims != second.reference_dims:
        raise InvalidArgumentError("cannot compose stacks on different reference grids")
    rb = np.deg2rad(second.rot)
    c, s = np.cos(rb), np.sin(rb)
    qx = first.cx + first.tx - second.cx
    qy = first.cy + first.ty - second.cy
    tx = c * qx - s * qy + second.cx + second.tx - first.cx
    ty = s * qx + c * qy + second.cy + second.ty - first.cy
    return SliceTransformStack(
        tx, ty, first.rot + second.rot, first.cx, first.cy, first.empty | second.empty,
        first.reference_dims, first.reference_spacing,
    )


def slice_moments(img, spacing):
    """Weighted centre of mass (mm) and 2x2 central second moments of a 2D slice."""
    w = np.asarray(img, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return None, None
    ii = np.arange(w.shape[0]) * spacing[0]
    jj = np.arange(w.shape[1]) * spacing[1]
    wi = w.sum(axis=1)
    wj = w.sum(axis=0)
    mx = (wi * ii).sum() / total
    my = (wj * jj).sum() / total
    dx = ii - mx
    dy = jj - my
    cxx = (wi * dx * dx).sum() / total
    cyy = (wj * dy * dy).sum() / total
    cxy = (dx[:, None] * dy[None, :] * w).sum() / total
    return np.array([mx, my]), np.array([[cxx, cxy], [cxy, cyy]])


def principal_angle(cov):
    """Orientation (degrees) of the major principal axis, in (-90, 90]."""
    return 0.5 * np.degrees(np.arctan2(2.0 * cov[0, 1], cov[0, 0] - cov[1, 1]))


def anisotropy(cov):
    ev = np.linalg.eigvalsh(cov)
    tot = ev.sum()
    return 0.0 if tot <= 0 else float((ev[1] - ev[0]) / tot)


def _wrap_axis(deg):
    """Wrap an axis-angle difference to (-90, 90] (the smaller-magnitude rotation)."""
    return deg - 180.0 * np.ceil((deg - 90.0) / 180.0)


def register_com(src, tgt, iterations=10, step=0.5, min_area=3, min_anisotropy=0.02):
    """Slice-by-slice centre-of-mass registration of ``src`` onto ``tgt``.

    Per slice, translation and rotation are moved ``step`` of the way toward
    the target centre of mass and principal-axis orientation on each of
    ``iterations`` rounds. Moments of the moving source are tracked
    analytically (rigid motion transforms them exactly). Rotation is left at 0
    for slices with fewer than ``min_area`` foreground voxels or with nearly
    isotropic moments. Slices empty in either mask get transforms linearly
    interpolated between nonempty neighbours (held constant past the ends).
    """
    if not isinstance(src, Volume3D) or not isinstance(tgt, Volume3D):
        raise InvalidArgumentError("register_com expects Volume3D masks")
    if src.dims != tgt.dims or not np.allclose(src.spacing, tgt.spacing, atol=1e-6):
        raise InvalidArgumentError(f"src grid {src.dims} and tgt grid {tgt.dims} differ; resample src first")
    sp = tgt.spacing
    nz = tgt.dims[2]
    tx, ty, rot, cx, cy = (np.zeros(nz) for _ in range(5))
    empty = np.ones(nz, dtype=bool)
    for z in range(nz):
        s_img = src.data[:, :, z]
        t_img = tgt.data[:, :, z]
        com_s, cov_s = slice_moments(s_img, sp)
        com_t, cov_t = slice_moments(t_img, sp)
        if com_s is None or com_t is None:
            continue
        empty[z] = False
        rotate = (
            np.count_nonzero(s_img) >= min_area
            and np.count_nonzero(t_img) >= min_area
            and anisotropy(cov_s) >= min_anisotropy
            and anisotropy(cov_t) >= min_anisotropy
        )
        ang_s = principal_angle(cov_s)
        ang_t = principal_angle(cov_t)
        t = np.zeros(2)
        r = 0.0
        for _ in range(iterations):
            # rotation about com_s leaves the source COM at com_s + t
            t = t + step * (com_t - (com_s + t))
            if rotate:
                r = r + step * _wrap_axis(ang_t - (ang_s + r))
        tx[z], ty[z] = t
        rot[z] = r
        cx[z], cy[z] = com_s
    if empty.all():
        if not np.any(src.data > 0) or not np.any(tgt.data > 0):
            raise NoOverlapError("all slices of src or tgt are empty")
        raise NoOverlapError("src and tgt have no axial slice that is nonempty in both")
    full = ~empty
    if empty.any():
        zs = np.arange(nz)
        for arr in (tx, ty, rot, cx, cy):
            arr[empty] = np.interp(zs[empty], zs[full], arr[full])
    return SliceTransformStack(tx, ty, rot, cx, cy, empty, tgt.dims, sp)


def apply_warp(v, w, scheme="linear"):
    """Resample ``v`` through the stack (pull/inverse mapping) on the reference grid.

    Slices whose transform is exactly the identity are copied unchanged.
    """
    order = scheme_order(scheme)
    if order == 3:
        raise InvalidArgumentError("apply_warp supports 'linear' and 'nearest'")
    if not w.matches(v):
        raise InvalidArgumentError(
            f"volume grid {v.dims}/{v.spacing} does not match warp reference grid "
            f"{w.reference_dims}/{w.reference_spacing}"
        )
    nx, ny, nz = v.dims
    sx, sy = v.spacing[0], v.spacing[1]
    px = (np.arange(nx) * sx)[:, None, None]
    py = (np.arange(ny) * sy)[None, :, None]
    r = np.deg2rad(w.rot)[None, None, :]
    c, s = np.cos(r), np.sin(r)
    qx = px - w.cx[None, None, :] - w.tx[None, None, :]
    qy = py - w.cy[None, None, :] - w.ty[None, None, :]
    # R^T q + c, converted to voxel units
    ix = (c * qx + s * qy + w.cx[None, None, :]) / sx
    iy = (-s * qx + c * qy + w.cy[None, None, :]) / sy
    iz = np.broadcast_to(np.arange(nz, dtype=np.float64)[None, None, :], (nx, ny, nz))
    ix, iy = np.broadcast_arrays(ix, iy)
    coords = np.stack([ix, iy, iz])
    out = interpolate(v.data, coords, order=order, mode="zero")
    ident = (w.rot == 0) & (w.tx == 0) & (w.ty == 0)
    out[:, :, ident] = v.data[:, :, ident]
    return v.with_data(out)


def write_warp_csv(w, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(WARP_CSV_COLUMNS)
        for z in range(len(w)):
            wr.writerow([z, repr(float(w.tx[z])), repr(float(w.ty[z])), repr(float(w.rot[z])),
                         repr(float(w.cx[z])), repr(float(w.cy[z])), int(w.empty[z])])
    return path


def read_warp_csv(path, reference_dims, reference_spacing):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != WARP_CSV_COLUMNS:
        raise InvalidArgumentError(f"{path}: expected columns {WARP_CSV_COLUMNS}")
    rows.sort(key=lambda r: int(r["z"]))
    col = {k: np.array([float(r[k]) for r in rows]) for k in WARP_CSV_COLUMNS[1:6]}
    empty = np.array([bool(int(r["empty"])) for r in rows])
    return SliceTransformStack(col["tx"], col["ty"], col["rot"], col["cx"], col["cy"], empty,
                               reference_dims, reference_spacing)
