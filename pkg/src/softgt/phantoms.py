"""Synthetic phantoms and a small multi-contrast dataset generator.

Shapes are analytic; soft versions are antialiased by supersampling each voxel
on a regular ``ss x ss`` sub-grid, so a voxel's value is the fraction of its
in-plane footprint covered by the shape.
"""

import json
from pathlib import Path

import numpy as np

from .nifti import write_nifti
from .volume import Volume3D


def _subsample_offsets(ss):
    return (np.arange(ss) + 0.5) / ss - 0.5


def ellipse_slice(shape, center, semi_axes, angle_deg=0.0, spacing=(1.0, 1.0), ss=1):
    """2D ellipse coverage on an ``(nx, ny)`` grid; centre and axes in mm.

    ``ss=1`` samples voxel centres (binary mask); larger ``ss`` gives coverage
    fractions.
    """
    nx, ny = shape
    off = _subsample_offsets(ss)
    x = (np.arange(nx)[:, None] + off[None, :]).ravel() * spacing[0]
    y = (np.arange(ny)[:, None] + off[None, :]).ravel() * spacing[1]
    X, Y = np.meshgrid(x - center[0], y - center[1], indexing="ij")
    t = np.deg2rad(angle_deg)
    u = np.cos(t) * X + np.sin(t) * Y
    v = -np.sin(t) * X + np.cos(t) * Y
    inside = (u / semi_axes[0]) ** 2 + (v / semi_axes[1]) ** 2 <= 1.0
    return inside.reshape(nx, ss, ny, ss).mean(axis=(1, 3))


def disk_slice(shape, center, radius, spacing=(1.0, 1.0), ss=1):
    return ellipse_slice(shape, center, (radius, radius), 0.0, spacing, ss)


def cylinder(dims, spacing, radius, center=None, ss=8, z_range=None):
    """Soft cylinder along z (radius and centre in mm); slices outside ``z_range`` are empty."""
    nx, ny, nz = dims
    if center is None:
        center = ((nx - 1) * spacing[0] / 2.0, (ny - 1) * spacing[1] / 2.0)
    sl = ellipse_slice((nx, ny), center, (radius, radius), 0.0, spacing[:2], ss)
    data = np.repeat(sl[:, :, None], nz, axis=2)
    if z_range is not None:
        keep = np.zeros(nz, dtype=bool)
        keep[z_range[0]:z_range[1]] = True
        data[:, :, ~keep] = 0.0
    return Volume3D(data, spacing=spacing)


def ellipse_stack(dims, spacing, center, semi_axes, angle_deg=0.0, ss=1):
    """Same ellipse on every axial slice."""
    sl = ellipse_slice(dims[:2], center, semi_axes, angle_deg, spacing[:2], ss)
    return Volume3D(np.repeat(sl[:, :, None], dims[2], axis=2), spacing=spacing)


def gaussian_blob(dims, spacing=(1.0, 1.0, 1.0), center=None, sigma=None):
    """Smooth blob with values in (0, 1], peak 1 at ``center`` (voxel units)."""
    dims = tuple(dims)
    c = np.asarray(center if center is not None else [(n - 1) / 2.0 for n in dims], dtype=float)
    s = np.asarray(sigma if sigma is not None else [n / 5.0 for n in dims], dtype=float)
    g = np.indices(dims, dtype=np.float64)
    r2 = sum(((g[a] - c[a]) / s[a]) ** 2 for a in range(3))
    return Volume3D(np.exp(-0.5 * r2), spacing=spacing)


def level_map(dims, spacing, boundaries, levels):
    """Integer vertebral-level volume: slices ``boundaries[k] <= z < boundaries[k+1]`` get ``levels[k]``."""
    data = np.zeros(dims, dtype=np.float32)
    for lvl, lo, hi in zip(levels, boundaries[:-1], boundaries[1:]):
        data[:, :, lo:hi] = lvl
    return Volume3D(data, spacing=spacing)


def make_dataset(root, n_participants=3, contrasts=("T1w", "T2w", "T2star"), dims=(32, 32, 24),
                 spacing=(1.0, 1.0, 1.0), seed=0):
    """Write a synthetic dataset and its manifest; returns the manifest path.

    Every contrast shares the grid. Each contrast's cord segmentation is a
    binary ellipse whose radius, in-plane offset and superior-inferior
    coverage vary by contrast, mimicking contrast-dependent CSA and FOV.
    Images are the soft cord plus noise; level maps put C2 on the lower and
    C3 on the upper half of the stack.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    participants = []
    for p in range(n_participants):
        pid = f"sub-{p + 1:02d}"
        pdir = root / pid
        pdir.mkdir(exist_ok=True)
        base_r = rng.uniform(3.0, 4.0)
        recs = {}
        for k, contrast in enumerate(contrasts):
            r = base_r * (1.0 + 0.08 * (k - (len(contrasts) - 1) / 2.0))
            cx = (nx - 1) * spacing[0] / 2.0 + rng.uniform(-1.5, 1.5)
            cy = (ny - 1) * spacing[1] / 2.0 + rng.uniform(-1.5, 1.5)
            lo = int(rng.integers(0, 3))
            hi = nz - int(rng.integers(0, 3))
            soft = ellipse_stack(dims, spacing, (cx, cy), (r * 1.2, r), angle_deg=rng.uniform(-10, 10), ss=6)
            data = soft.data.copy()
            data[:, :, :lo] = 0
            data[:, :, hi:] = 0
            seg = Volume3D((data >= 0.5).astype(np.float32), spacing=spacing)
            image = Volume3D(data * 100.0 + rng.normal(0, 5.0, dims), spacing=spacing)
            levels = level_map(dims, spacing, [0, nz // 2, nz], [2, 3])
            files = {}
            for key, vol in (("image", image), ("seg", seg), ("levels", levels)):
                path = pdir / f"{pid}_{contrast}_{key}.nii.gz"
                write_nifti(vol, path)
                files[key] = str(path.relative_to(root))
            recs[contrast] = files
        participants.append({"id": pid, "contrasts": recs})
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({"contrasts": list(contrasts), "participants": participants}, indent=2) + "\n")
    return manifest
