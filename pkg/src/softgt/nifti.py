"""Minimal single-file NIfTI-1 reader/writer (``.nii`` and ``.nii.gz``).

Only 3D scalar volumes are handled. On read, the sform is preferred, then the
qform, then a plain pixdim diagonal. Writing always produces float32 data with
the sform set from the affine and the qform derived from it.
"""

import gzip
import io
import struct
from pathlib import Path

import numpy as np

from .errors import NiftiFormatError, UnsupportedDatatypeError
from .volume import Volume3D

HEADER_SIZE = 348
# (name, struct code); together they describe the 348-byte header
_FIELDS = [
    ("sizeof_hdr", "i"), ("data_type", "10s"), ("db_name", "18s"), ("extents", "i"),
    ("session_error", "h"), ("regular", "B"), ("dim_info", "B"), ("dim", "8h"),
    ("intent_p1", "f"), ("intent_p2", "f"), ("intent_p3", "f"), ("intent_code", "h"),
    ("datatype", "h"), ("bitpix", "h"), ("slice_start", "h"), ("pixdim", "8f"),
    ("vox_offset", "f"), ("scl_slope", "f"), ("scl_inter", "f"), ("slice_end", "h"),
    ("slice_code", "B"), ("xyzt_units", "B"), ("cal_max", "f"), ("cal_min", "f"),
    ("slice_duration", "f"), ("toffset", "f"), ("glmax", "i"), ("glmin", "i"),
    ("descrip", "80s"), ("aux_file", "24s"), ("qform_code", "h"), ("sform_code", "h"),
    ("quatern_b", "f"), ("quatern_c", "f"), ("quatern_d", "f"),
    ("qoffset_x", "f"), ("qoffset_y", "f"), ("qoffset_z", "f"),
    ("srow_x", "4f"), ("srow_y", "4f"), ("srow_z", "4f"),
    ("intent_name", "16s"), ("magic", "4s"),
]
_FMT = "".join(code for _, code in _FIELDS)
assert struct.calcsize("<" + _FMT) == HEADER_SIZE

# NIfTI datatype code -> numpy dtype (byte order applied at read time)
DATATYPES = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}


def _unpack(raw, endian):
    values = struct.unpack(endian + _FMT, raw[:HEADER_SIZE])
    hdr = {}
    pos = 0
    for name, code in _FIELDS:
        count = int(code[:-1]) if code[:-1].isdigit() and code[-1] != "s" else 1
        if count > 1:
            hdr[name] = values[pos:pos + count]
        else:
            hdr[name] = values[pos]
        pos += count
    return hdr


def _pack(hdr):
    values = []
    for name, code in _FIELDS:
        val = hdr[name]
        if isinstance(val, (tuple, list)):
            values.extend(val)
        else:
            values.append(val)
    return struct.pack("<" + _FMT, *values)


def _open_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise NiftiFormatError(f"{path}: corrupt gzip stream ({exc})") from exc
    return raw


def quaternion_to_matrix(b, c, d):
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 1e-7 else 0.0
    if a == 0.0:
        # renormalise (b, c, d) as NIfTI-1 requires
        norm = np.sqrt(b * b + c * c + d * d)
        b, c, d = b / norm, c / norm, d / norm
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ])


def matrix_to_quaternion(rot):
    """(b, c, d) of a proper rotation matrix, with a >= 0."""
    m = np.asarray(rot, dtype=float)
    tr = np.trace(m)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        a, b, c, d = 0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        a, b, c, d = (m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        a, b, c, d = (m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        a, b, c, d = (m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s
    if a < 0:
        b, c, d = -b, -c, -d
    return float(b), float(c), float(d)


def _qform_affine(hdr):
    pix = hdr["pixdim"]
    qfac = -1.0 if pix[0] < 0 else 1.0
    rot = quaternion_to_matrix(hdr["quatern_b"], hdr["quatern_c"], hdr["quatern_d"])
    scale = np.array([pix[1], pix[2], pix[3] * qfac])
    aff = np.eye(4)
    aff[:3, :3] = rot * scale[None, :]
    aff[:3, 3] = [hdr["qoffset_x"], hdr["qoffset_y"], hdr["qoffset_z"]]
    return aff


def header_affine(hdr):
    if hdr["sform_code"] > 0:
        aff = np.eye(4)
        aff[0], aff[1], aff[2] = hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]
        return aff
    if hdr["qform_code"] > 0:
        return _qform_affine(hdr)
    pix = hdr["pixdim"]
    return np.diag([pix[1], pix[2], pix[3], 1.0])


def read_header(raw, source="<bytes>"):
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError(f"{source}: truncated header ({len(raw)} < {HEADER_SIZE} bytes)")
    endian = None
    for e in "<>":
        if struct.unpack(e + "i", raw[:4])[0] == HEADER_SIZE:
            endian = e
            break
    if endian is None:
        raise NiftiFormatError(f"{source}: sizeof_hdr is not 348")
    hdr = _unpack(raw, endian)
    if hdr["magic"] != b"n+1\x00":
        raise NiftiFormatError(f"{source}: bad magic {hdr['magic']!r} (only single-file NIfTI-1 is supported)")
    hdr["_endian"] = endian
    return hdr


def read_nifti(path):
    """Read a 3D NIfTI-1 file into a :class:`Volume3D` (float32, scaling applied)."""
    raw = _open_bytes(path)
    hdr = read_header(raw, str(path))
    dim = hdr["dim"]
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiFormatError(f"{path}: invalid dim[0]={ndim}")
    shape = [max(1, int(d)) for d in dim[1:ndim + 1]] + [1] * (3 - ndim)
    if any(s != 1 for s in shape[3:]):
        raise NiftiFormatError(f"{path}: only 3D volumes are supported, got dims {shape}")
    shape = shape[:3]
    code = hdr["datatype"]
    if code not in DATATYPES:
        raise UnsupportedDatatypeError(code)
    dtype = np.dtype(hdr["_endian"] + DATATYPES[code])
    offset = int(hdr["vox_offset"])
    count = int(np.prod(shape))
    nbytes = count * dtype.itemsize
    if offset < HEADER_SIZE or len(raw) < offset + nbytes:
        raise NiftiFormatError(f"{path}: truncated data ({len(raw) - offset} < {nbytes} bytes)")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape, order="F")
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope != 0 and np.isfinite(slope) and not (slope == 1 and inter == 0):
        data = data.astype(np.float64) * slope + inter
    return Volume3D(data.astype(np.float32), header_affine(hdr))


def _header_for(v):
    aff = np.asarray(v.affine, dtype=float)
    spacing = np.linalg.norm(aff[:3, :3], axis=0)
    # qform needs a proper rotation: orthogonalise, fold a reflection into qfac
    u, _, vt = np.linalg.svd(aff[:3, :3] / spacing[None, :])
    rot = u @ vt
    qfac = 1.0
    if np.linalg.det(rot) < 0:
        qfac = -1.0
        rot[:, 2] = -rot[:, 2]
    b, c, d = matrix_to_quaternion(rot)
    return {
        "sizeof_hdr": HEADER_SIZE, "data_type": b"", "db_name": b"", "extents": 0,
        "session_error": 0, "regular": ord("r"), "dim_info": 0,
        "dim": (3, *v.dims, 1, 1, 1, 1),
        "intent_p1": 0.0, "intent_p2": 0.0, "intent_p3": 0.0, "intent_code": 0,
        "datatype": 16, "bitpix": 32, "slice_start": 0,
        "pixdim": (qfac, *spacing, 1.0, 1.0, 1.0, 1.0),
        "vox_offset": 352.0, "scl_slope": 1.0, "scl_inter": 0.0, "slice_end": 0,
        "slice_code": 0, "xyzt_units": 2, "cal_max": 0.0, "cal_min": 0.0,
        "slice_duration": 0.0, "toffset": 0.0, "glmax": 0, "glmin": 0,
        "descrip": b"softgt", "aux_file": b"", "qform_code": 1, "sform_code": 1,
        "quatern_b": b, "quatern_c": c, "quatern_d": d,
        "qoffset_x": aff[0, 3], "qoffset_y": aff[1, 3], "qoffset_z": aff[2, 3],
        "srow_x": tuple(aff[0]), "srow_y": tuple(aff[1]), "srow_z": tuple(aff[2]),
        "intent_name": b"", "magic": b"n+1\x00",
    }


def nifti_bytes(v):
    """Uncompressed single-file NIfTI-1 encoding of ``v``."""
    buf = io.BytesIO()
    buf.write(_pack(_header_for(v)))
    buf.write(b"\x00\x00\x00\x00")  # no extensions
    buf.write(np.asarray(v.data, dtype="<f4").tobytes(order="F"))
    return buf.getvalue()


def write_nifti(v, path, gz=None):
    """Write ``v`` as float32 NIfTI-1. ``gz`` defaults to the ``.gz`` suffix of ``path``.

    Compressed output uses a zero gzip timestamp so identical volumes give
    byte-identical files.
    """
    path = Path(path)
    if gz is None:
        gz = path.suffix == ".gz"
    payload = nifti_bytes(v)
    if gz:
        buf = io.BytesIO()
        with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as fh:
            fh.write(payload)
        payload = buf.getvalue()
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write NIfTI: {exc.strerror}", str(path)) from exc
    return path
