"""NormReLU activation, adaptive wing loss with its analytic gradient, soft Dice.

All kernels are plain numpy, elementwise, and accept arrays of any shape.
Predictions outside [0, 1] are accepted; targets must lie in [0, 1].
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


def norm_relu(x):
    """ReLU divided by its global maximum; all zeros if nothing is positive."""
    r = np.maximum(np.asarray(x, dtype=np.float64), 0.0)
    m = r.max() if r.size else 0.0
    if m == 0:
        return np.zeros_like(r)
    return r / m


@dataclass(frozen=True)
class AWingParams:
    omega: float = 8.0
    epsilon: float = 1.0
    theta: float = 0.5
    alpha: float = 2.1

    def __post_init__(self):
        if self.omega <= 0 or self.epsilon <= 0 or self.theta <= 0:
            raise InvalidArgumentError("omega, epsilon and theta must be positive")
        if self.alpha <= 1:
            raise InvalidArgumentError("alpha must exceed every target value (targets lie in [0, 1])")

    def A(self, y):
        """Slope of the linear branch for target ``y``."""
        y = np.asarray(y, dtype=np.float64)
        p = self.alpha - y
        r = self.theta / self.epsilon
        return self.omega * (1.0 / (1.0 + r ** p)) * p * r ** (p - 1.0) / self.epsilon

    def C(self, y):
        """Offset making the two branches meet at ``|y - yhat| = theta``."""
        y = np.asarray(y, dtype=np.float64)
        p = self.alpha - y
        return self.theta * self.A(y) - self.omega * np.log1p((self.theta / self.epsilon) ** p)


DEFAULT_AWING = AWingParams()


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise InvalidArgumentError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    return y, yhat


def _reduce(values, reduction):
    if reduction == "mean":
        return float(values.mean())
    if reduction == "sum":
        return float(values.sum())
    if reduction == "none":
        return values
    raise InvalidArgumentError(f"unknown reduction {reduction!r}")


def awing_nonlinear(y, yhat, p=DEFAULT_AWING):
    y, yhat = _pair(y, yhat)
    return p.omega * np.log1p(np.abs((y - yhat) / p.epsilon) ** (p.alpha - y))


def awing_linear(y, yhat, p=DEFAULT_AWING):
    y, yhat = _pair(y, yhat)
    return p.A(y) * np.abs(y - yhat) - p.C(y)


def awing_loss(y, yhat, p=DEFAULT_AWING, reduction="mean"):
    """Adaptive wing loss; ``|y - yhat| == theta`` falls on the linear branch."""
    y, yhat = _pair(y, yhat)
    d = np.abs(y - yhat)
    near = d < p.theta
    loss = np.where(near, awing_nonlinear(y, yhat, p), awing_linear(y, yhat, p))
    return _reduce(loss, reduction)


def awing_grad(y, yhat, p=DEFAULT_AWING):
    """Elementwise derivative of the (unreduced) loss with respect to ``yhat``."""
    y, yhat = _pair(y, yhat)
    d = y - yhat
    ad = np.abs(d)
    e = p.alpha - y
    u = ad / p.epsilon
    with np.errstate(divide="ignore", invalid="ignore"):
        nonlin = -p.omega * e * u ** (e - 1.0) * np.sign(d) / (p.epsilon * (1.0 + u ** e))
    lin = -p.A(y) * np.sign(d)
    return np.where(ad < p.theta, nonlin, lin)


def soft_dice_loss(y, yhat, smooth=1e-5):
    y, yhat = _pair(y, yhat)
    inter = (y * yhat).sum()
    return float(1.0 - (2.0 * inter + smooth) / (y.sum() + yhat.sum() + smooth))
