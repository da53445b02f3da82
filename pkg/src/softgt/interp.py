"""Interpolation kernels on regular 3D grids.

All kernels work in voxel coordinates and are written in "difference form"
(``v0 + t * (v1 - v0)`` rather than ``(1 - t) * v0 + t * v1``) so that constant
fields and integer sample positions are reproduced bit-exactly.

Cubic interpolation is Catmull-Rom cubic convolution (a = -0.5), which is
interpolating and reproduces polynomials up to degree 2.

Boundary modes
--------------
``"zero"``
    neighbours outside the grid contribute 0 (background padding).
``"clamp"``
    neighbour indices are clamped to the nearest edge voxel.
"""

import numpy as np

ORDERS = {"nearest": 0, "linear": 1, "cubic": 3}
_CHUNK = 1 << 17


def scheme_order(scheme):
    try:
        return ORDERS[scheme]
    except KeyError:
        from .errors import InvalidArgumentError

        raise InvalidArgumentError(
            f"unknown interpolation scheme {scheme!r}; expected one of {sorted(ORDERS)}"
        ) from None


def _lerp(v0, v1, t):
    return v0 + t * (v1 - v0)


def _cubic(vm1, v0, v1, v2, t):
    d0 = vm1 - v0
    d2 = v1 - v0
    d3 = v2 - v0
    return v0 + t * (0.5 * (d2 - d0) + t * ((d0 + 2.0 * d2 - 0.5 * d3) + t * (-0.5 * d0 - 1.5 * d2 + 0.5 * d3)))


def _offsets(order):
    return np.array([0, 1]) if order == 1 else np.array([-1, 0, 1, 2])


def interpolate(data, coords, order=1, mode="zero"):
    """Sample ``data`` at voxel coordinates ``coords``.

    Parameters
    ----------
    data : ndarray, shape (nx, ny, nz)
    coords : ndarray, shape (3, ...)
        Continuous voxel coordinates; trailing shape is the output shape.
    order : {0, 1, 3}
    mode : {"zero", "clamp"}

    Returns
    -------
    ndarray of float64 with shape ``coords.shape[1:]``.
    """
    data = np.asarray(data, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    out_shape = coords.shape[1:]
    flat = coords.reshape(3, -1)
    out = np.empty(flat.shape[1], dtype=np.float64)
    for start in range(0, flat.shape[1], _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = _interpolate_flat(data, flat[:, sl], order, mode)
    return out.reshape(out_shape)


def _interpolate_flat(data, c, order, mode):
    dims = data.shape
    if order == 0:
        idx = np.floor(c + 0.5).astype(np.int64)
        if mode == "clamp":
            for a in range(3):
                np.clip(idx[a], 0, dims[a] - 1, out=idx[a])
            return data[idx[0], idx[1], idx[2]]
        inside = np.ones(c.shape[1], dtype=bool)
        for a in range(3):
            inside &= (idx[a] >= 0) & (idx[a] < dims[a])
        res = np.zeros(c.shape[1], dtype=np.float64)
        res[inside] = data[idx[0][inside], idx[1][inside], idx[2][inside]]
        return res

    base = np.floor(c).astype(np.int64)
    frac = c - base
    offs = _offsets(order)
    k = len(offs)
    # per-axis neighbour indices, shape (k, n), plus validity for zero padding
    nb = []
    valid = []
    for a in range(3):
        ia = base[a][None, :] + offs[:, None]
        if mode == "clamp":
            nb.append(np.clip(ia, 0, dims[a] - 1))
            valid.append(None)
        else:
            ok = (ia >= 0) & (ia < dims[a])
            nb.append(np.where(ok, ia, 0))
            valid.append(ok)

    # gather all k**3 neighbours: vals[i, j, l, n]
    vals = data[nb[0][:, None, None, :], nb[1][None, :, None, :], nb[2][None, None, :, :]]
    if mode != "clamp":
        ok = valid[0][:, None, None, :] & valid[1][None, :, None, :] & valid[2][None, None, :, :]
        vals = np.where(ok, vals, 0.0)

    reduce = _lerp if order == 1 else _cubic
    # reduce along x, then y, then z
    vals = reduce(*[vals[i] for i in range(k)], frac[0][None, None, :])
    vals = reduce(*[vals[j] for j in range(k)], frac[1][None, :])
    return reduce(*[vals[l] for l in range(k)], frac[2])


def interpolate_axis(data, axis, coords, order=1, mode="clamp"):
    """Separable 1D resampling of ``data`` along ``axis`` at positions ``coords``.

    Equivalent to :func:`interpolate` on an axis-aligned grid, but much cheaper.
    """
    data = np.moveaxis(np.asarray(data, dtype=np.float64), axis, 0)
    n = data.shape[0]
    coords = np.asarray(coords, dtype=np.float64)
    if order == 0:
        idx = np.floor(coords + 0.5).astype(np.int64)
        if mode == "clamp":
            out = data[np.clip(idx, 0, n - 1)]
        else:
            ok = (idx >= 0) & (idx < n)
            out = np.where(ok.reshape((-1,) + (1,) * (data.ndim - 1)), data[np.where(ok, idx, 0)], 0.0)
        return np.moveaxis(out, 0, axis)

    base = np.floor(coords).astype(np.int64)
    t = (coords - base).reshape((-1,) + (1,) * (data.ndim - 1))
    terms = []
    for o in _offsets(order):
        ia = base + o
        if mode == "clamp":
            terms.append(data[np.clip(ia, 0, n - 1)])
        else:
            ok = ((ia >= 0) & (ia < n)).reshape((-1,) + (1,) * (data.ndim - 1))
            terms.append(np.where(ok, data[np.where((ia >= 0) & (ia < n), ia, 0)], 0.0))
    reduce = _lerp if order == 1 else _cubic
    return np.moveaxis(reduce(*terms, t), 0, axis)
