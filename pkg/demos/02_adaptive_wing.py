"""How the adaptive wing loss treats soft targets.

The loss is steep for small errors on foreground voxels and nearly flat on
background, which is what lets a network regress fractional boundary values.
"""

# %% Loss and gradient across prediction errors
import numpy as np

from softgt import AWingParams, awing_grad, awing_loss, norm_relu

p = AWingParams()
print(f"omega={p.omega} epsilon={p.epsilon} theta={p.theta} alpha={p.alpha}")
errors = np.array([0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0])
for y in (0.0, 0.5, 1.0):
    yy = np.full_like(errors, y)
    loss = awing_loss(yy, yy + errors, reduction="none")
    grad = awing_grad(yy, yy + errors) + 0.0  # drop signed zeros
    print(f"y={y:.1f}  loss " + " ".join(f"{v:6.3f}" for v in loss))
    print(f"       grad " + " ".join(f"{v:6.3f}" for v in grad))

# %% Near zero error the gradient vanishes for background but not for foreground
for y in (0.0, 1.0):
    print(f"y={y}: dL/dyhat at error 0.01 = {awing_grad([y], [y + 0.01])[0]:.4f}")

# %% NormReLU keeps the output in [0, 1] without a sigmoid squashing the edges
logits = np.array([-2.0, 0.0, 0.3, 1.2, 2.4])
print("NormReLU:", norm_relu(logits))
