"""Building a soft ground truth from three misaligned contrasts.

Run with ``python demos/01_soft_ground_truth.py``.
"""

# %% Three synthetic contrasts of the same cord
# Each contrast sees a slightly different cord: a different apparent size,
# a small in-plane shift, and partial superior-inferior coverage.
import numpy as np

from softgt import (
    FusionEntry, FusionInput, Volume3D, apply_warp, csa, dice, generate_soft_gt, register_com,
)
from softgt.phantoms import ellipse_stack, level_map

dims, spacing = (48, 48, 20), (0.5, 0.5, 1.0)
centre = np.array([12.0, 12.0])
contrasts = {
    "T1w": dict(shift=(0.8, -0.4), scale=1.08, z=(0, 20)),
    "T2w": dict(shift=(0.0, 0.0), scale=1.00, z=(0, 20)),
    "T2star": dict(shift=(-0.5, 0.6), scale=0.92, z=(4, 16)),
}
segs = {}
for name, c in contrasts.items():
    v = ellipse_stack(dims, spacing, centre + c["shift"], (4.2 * c["scale"], 3.4 * c["scale"]), 5.0)
    data = v.data.copy()
    data[:, :, : c["z"][0]] = 0
    data[:, :, c["z"][1]:] = 0
    segs[name] = Volume3D(data, spacing=spacing)
    print(f"{name:7s} voxels={int(data.sum()):5d}  covered slices={c['z']}")

# %% Slice-wise centre-of-mass registration onto T2w
ref = segs["T2w"]
warps = {name: register_com(seg, ref) for name, seg in segs.items()}
for name, w in warps.items():
    moved = apply_warp(segs[name], w)
    print(f"{name:7s} mean shift=({w.tx.mean():+.2f}, {w.ty.mean():+.2f}) mm  "
          f"Dice before={dice(segs[name], ref):.3f} after={dice(moved, ref):.3f}")

# %% FOV-weighted fusion
# Slices that T2star does not cover get no vote from it, so the fused mask
# there is the average of T1w and T2w only.
bundle = generate_soft_gt(
    FusionInput([FusionEntry(n, s, warps[n]) for n, s in segs.items()]), "T2w", dilation_radius_vox=10
)
soft = bundle.reference_soft.data
inside = soft > 0
print(f"fused mask: {inside.sum()} nonzero voxels, {np.mean(soft[inside] < 1):.0%} of them fractional")
print("FOV coverage:", {k: round(v, 3) for k, v in bundle.coverage.items()})

# %% Cross-sectional area of the soft mask
# Soft values count fractionally, so CSA sits between the smallest and largest input.
levels = level_map(dims, spacing, [0, 10, 20], [2, 3])
for name, seg in segs.items():
    print(f"{name:7s} binary CSA = {csa(seg, levels).level_mean:6.2f} mm2")
print(f"soft GT  CSA = {csa(bundle.reference_soft, levels).level_mean:6.2f} mm2")
