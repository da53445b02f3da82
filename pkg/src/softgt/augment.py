"""Random augmentation of (image, soft label) pairs.

Transforms run in a fixed order, each behind its own probability gate::

    affine -> elastic -> low-res -> gamma -> bias field -> noise
           -> smoothing -> intensity scaling -> mirroring

followed by z-normalisation of the image and clamping of the label to [0, 1].
Spatial transforms (affine, elastic, low-res, mirror) resample the image with
cubic and the label with linear interpolation; the label is never
re-binarised. Affine sampling outside the grid reads background (0); elastic
sampling replicates edge voxels so constant regions stay constant.

Randomness
----------
A pipeline run is driven by one seed. Gates draw from a Philox stream keyed
by the seed, exactly one uniform per transform whether or not it fires.
Parameters of transform ``k`` come from the same Philox key jumped ``k + 1``
times, so draws never shift when an earlier gate changes outcome.
"""

from dataclasses import asdict, dataclass, field, fields
import json
from pathlib import Path

import numpy as np
from numpy.polynomial import legendre
from scipy import ndimage

from .errors import InvalidArgumentError
from .interp import interpolate, interpolate_axis
from .volume import Volume3D, znormalize

DEFAULT_SEED = 42
ORDER = ("affine", "elastic", "lowres", "gamma", "bias", "noise", "smooth", "scale", "mirror")


def _check_range(name, r):
    lo, hi = r
    if lo > hi:
        raise InvalidArgumentError(f"{name}: range low {lo} > high {hi}")


@dataclass
class AffineSpec:
    p: float = 0.9
    rotation: tuple = (-20.0, 20.0)  # degrees, per axis
    scale: tuple = (-0.2, 0.2)  # added to 1, per axis
    translation: tuple = (-0.1, 0.1)  # fraction of the axis length


@dataclass
class ElasticSpec:
    p: float = 0.5
    magnitude: tuple = (25.0, 35.0)  # voxels, per displacement component
    sigma: tuple = (3.5, 5.5)  # grid nodes
    grid_spacing: int = 1  # voxels between control nodes


@dataclass
class LowResSpec:
    p: float = 0.25
    factor: tuple = (0.5, 1.0)


@dataclass
class GammaSpec:
    p: float = 0.5
    gamma: tuple = (0.5, 3.0)


@dataclass
class BiasSpec:
    p: float = 0.3
    coefficients: tuple = (0.0, 0.5)
    degree: int = 3


@dataclass
class NoiseSpec:
    p: float = 0.1
    mean: float = 0.0
    std: tuple = (0.0, 0.1)


@dataclass
class SmoothSpec:
    p: float = 0.3
    sigma: tuple = (0.0, 2.0)  # voxels, per axis


@dataclass
class ScaleSpec:
    p: float = 0.15
    factor: tuple = (-0.25, 1.0)  # image *= 1 + s


@dataclass
class MirrorSpec:
    p: float = 0.3


_SPECS = {
    "affine": AffineSpec, "elastic": ElasticSpec, "lowres": LowResSpec, "gamma": GammaSpec,
    "bias": BiasSpec, "noise": NoiseSpec, "smooth": SmoothSpec, "scale": ScaleSpec, "mirror": MirrorSpec,
}


@dataclass
class AugmentConfig:
    affine: AffineSpec = field(default_factory=AffineSpec)
    elastic: ElasticSpec = field(default_factory=ElasticSpec)
    lowres: LowResSpec = field(default_factory=LowResSpec)
    gamma: GammaSpec = field(default_factory=GammaSpec)
    bias: BiasSpec = field(default_factory=BiasSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    smooth: SmoothSpec = field(default_factory=SmoothSpec)
    scale: ScaleSpec = field(default_factory=ScaleSpec)
    mirror: MirrorSpec = field(default_factory=MirrorSpec)
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for name in ORDER:
            spec = getattr(self, name)
            if not 0.0 <= spec.p <= 1.0:
                raise InvalidArgumentError(f"{name}.p = {spec.p} outside [0, 1]")
            for f in fields(spec):
                val = getattr(spec, f.name)
                if isinstance(val, (tuple, list)):
                    _check_range(f"{name}.{f.name}", val)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        kwargs = {}
        for name, spec_cls in _SPECS.items():
            sub = dict(doc.pop(name, {}) or {})
            known = {f.name for f in fields(spec_cls)}
            unknown = set(sub) - known
            if unknown:
                raise InvalidArgumentError(f"unknown {name} options {sorted(unknown)}")
            kwargs[name] = spec_cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in sub.items()})
        if "seed" in doc:
            kwargs["seed"] = int(doc.pop("seed"))
        if doc:
            raise InvalidArgumentError(f"unknown augmentation config keys {sorted(doc)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def disabled(cls, seed=DEFAULT_SEED):
        """All probabilities zero: only normalisation remains."""
        return cls(**{name: _SPECS[name](p=0.0) for name in ORDER}, seed=seed)


@dataclass(frozen=True)
class SamplePair:
    image: Volume3D
    label: Volume3D

    def __post_init__(self):
        if not self.image.same_grid(self.label):
            raise InvalidArgumentError("image and label must share a grid")


def make_streams(seed):
    """Gate generator and one parameter generator per transform, all Philox-based."""
    bit = np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF)
    gates = np.random.Generator(bit)
    params = {name: np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF).jumped(k + 1))
              for k, name in enumerate(ORDER)}
    return gates, params


# --- deterministic cores -------------------------------------------------------

def _rotation_matrix(deg):
    ax, ay, az = np.deg2rad(deg)
    rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
    ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
    rz = np.array([[np.cos(az), -np.sin(az), 0], [np.sin(az), np.cos(az), 0], [0, 0, 1]])
    return rz @ ry @ rx


def warp_coords(image, label, coords, image_order=3, label_order=1, mode="zero"):
    """Pull both arrays through the same voxel coordinates."""
    img = interpolate(image, coords, order=image_order, mode=mode)
    lab = None if label is None else interpolate(label, coords, order=label_order, mode=mode)
    return img, lab


def affine_coords(shape, rotation=(0, 0, 0), scale=(1, 1, 1), translation=(0, 0, 0)):
    """Source coordinates of the affine ``p -> R S (p - c) + c + t`` about the grid centre."""
    c = (np.asarray(shape, dtype=float) - 1.0) / 2.0
    m = _rotation_matrix(rotation) @ np.diag(np.asarray(scale, dtype=float))
    inv = np.linalg.inv(m)
    grid = np.indices(shape, dtype=np.float64).reshape(3, -1)
    q = grid - (c + np.asarray(translation, dtype=float))[:, None]
    src = inv @ q + c[:, None]
    return src.reshape((3,) + tuple(shape))


def affine_transform(image, label, rotation=(0, 0, 0), scale=(1, 1, 1), translation=(0, 0, 0)):
    coords = affine_coords(image.shape, rotation, scale, translation)
    return warp_coords(image, label, coords)


def random_affine(image, label, rng, spec=AffineSpec()):
    rot = rng.uniform(*spec.rotation, size=3)
    scl = 1.0 + rng.uniform(*spec.scale, size=3)
    trn = rng.uniform(*spec.translation, size=3) * np.asarray(image.shape)
    return affine_transform(image, label, rot, scl, trn)


def elastic_field(shape, rng, magnitude, sigma, grid_spacing=1):
    """Smoothed random displacement field of shape ``(3, *shape)`` in voxels.

    Offsets uniform in [-1, 1] on a control grid are scaled per component by
    ``magnitude``, Gaussian-smoothed with ``sigma`` (in grid nodes) and
    linearly upsampled to the voxel grid.
    """
    gs = max(1, int(grid_spacing))
    nodes = tuple(int(np.ceil((n - 1) / gs)) + 1 for n in shape)
    mags = np.broadcast_to(np.asarray(magnitude, dtype=float), (3,))
    field = np.empty((3,) + tuple(shape))
    for k in range(3):
        raw = rng.uniform(-1.0, 1.0, size=nodes)
        sm = ndimage.gaussian_filter(raw, sigma, mode="nearest") * mags[k]
        for axis in range(3):
            if gs > 1:
                sm = interpolate_axis(sm, axis, np.arange(shape[axis]) / gs, order=1, mode="clamp")
        field[k] = sm
    return field


def elastic_transform(image, label, displacement):
    coords = np.indices(image.shape, dtype=np.float64) + displacement
    return warp_coords(image, label, coords, mode="clamp")


def random_elastic(image, label, rng, spec=ElasticSpec()):
    mags = rng.uniform(*spec.magnitude, size=3)
    sigma = rng.uniform(*spec.sigma)
    disp = elastic_field(image.shape, rng, mags, sigma, spec.grid_spacing)
    return elastic_transform(image, label, disp)


def _resize(data, new_shape, order):
    out = np.asarray(data, dtype=np.float64)
    for axis, (n_old, n_new) in enumerate(zip(out.shape, new_shape)):
        if n_old == n_new:
            continue
        coords = np.zeros(1) if n_new == 1 else np.arange(n_new) * ((n_old - 1) / (n_new - 1))
        out = interpolate_axis(out, axis, coords, order=order, mode="clamp")
    return out


def simulate_low_res(image, factor, up_order=3):
    """Downsample by ``factor`` (linear) and upsample back to the input shape.

    Images come back up with cubic interpolation (``up_order=3``), labels with
    linear (``up_order=1``).
    """
    small = tuple(max(1, int(round(n * factor))) for n in image.shape)
    return _resize(_resize(image, small, 1), image.shape, up_order)


def random_low_res(image, label, rng, spec=LowResSpec()):
    f = rng.uniform(*spec.factor)
    lab = None if label is None else simulate_low_res(label, f, up_order=1)
    return simulate_low_res(image, f), lab


def gamma_correct(image, gamma):
    """Power-law contrast change over the image's own intensity range."""
    x = np.asarray(image, dtype=np.float64)
    if gamma == 1.0:
        return x.copy()
    lo, hi = x.min(), x.max()
    rng_ = hi - lo
    if rng_ == 0:
        return x.copy()
    return ((x - lo) / rng_) ** gamma * rng_ + lo


def random_gamma(image, rng, spec=GammaSpec()):
    return gamma_correct(image, rng.uniform(*spec.gamma))


def bias_terms(degree):
    return [(i, j, k) for i in range(degree + 1) for j in range(degree + 1 - i) for k in range(degree + 1 - i - j)]


def bias_multiplier(shape, coefficients, degree=3):
    """``exp`` of a Legendre polynomial of total degree <= ``degree`` over [-1, 1]^3."""
    terms = bias_terms(degree)
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (len(terms),):
        raise InvalidArgumentError(f"expected {len(terms)} bias coefficients, got {coefficients.shape}")
    c = np.zeros((degree + 1,) * 3)
    for (i, j, k), v in zip(terms, coefficients):
        c[i, j, k] = v
    axes = [np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1) for n in shape]
    return np.exp(legendre.leggrid3d(*axes, c))


def bias_field(image, coefficients, degree=3):
    return np.asarray(image, dtype=np.float64) * bias_multiplier(image.shape, coefficients, degree)


def random_bias_field(image, rng, spec=BiasSpec()):
    coeffs = rng.uniform(*spec.coefficients, size=len(bias_terms(spec.degree)))
    return bias_field(image, coeffs, spec.degree)


def gaussian_noise(image, sigma, rng, mean=0.0):
    x = np.asarray(image, dtype=np.float64)
    if sigma == 0 and mean == 0:
        return x.copy()
    return x + rng.normal(mean, sigma, size=x.shape)


def random_gaussian_noise(image, rng, spec=NoiseSpec()):
    return gaussian_noise(image, rng.uniform(*spec.std), rng, spec.mean)


def gaussian_smooth(image, sigmas):
    x = np.asarray(image, dtype=np.float64)
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), (3,))
    if np.all(sig == 0):
        return x.copy()
    return ndimage.gaussian_filter(x, sig, mode="nearest")


def random_gaussian_smooth(image, rng, spec=SmoothSpec()):
    return gaussian_smooth(image, rng.uniform(*spec.sigma, size=3))


def intensity_scale(image, s):
    return np.asarray(image, dtype=np.float64) * (1.0 + s)


def random_intensity_scale(image, rng, spec=ScaleSpec()):
    return intensity_scale(image, rng.uniform(*spec.factor))


def mirror(image, label, axes):
    img, lab = image, label
    for a in axes:
        img = np.flip(img, axis=a)
        lab = None if lab is None else np.flip(lab, axis=a)
    return np.ascontiguousarray(img), None if lab is None else np.ascontiguousarray(lab)


def random_mirror(image, label, rng, spec=MirrorSpec()):
    flips = rng.random(3) < 0.5
    return mirror(image, label, [a for a in range(3) if flips[a]])


# --- pipeline -------------------------------------------------------------------

def augment_arrays(image, label, cfg, seed=None):
    """Run the pipeline on raw arrays; returns ``(image, label, applied)``.

    ``applied`` lists the names of transforms whose gate fired.
    """
    gates, streams = make_streams(cfg.seed if seed is None else seed)
    img = np.asarray(image, dtype=np.float64)
    lab = np.asarray(label, dtype=np.float64)
    applied = []
    for name in ORDER:
        spec = getattr(cfg, name)
        if not gates.random() < spec.p:
            continue
        applied.append(name)
        r = streams[name]
        if name == "affine":
            img, lab = random_affine(img, lab, r, spec)
        elif name == "elastic":
            img, lab = random_elastic(img, lab, r, spec)
        elif name == "lowres":
            img, lab = random_low_res(img, lab, r, spec)
        elif name == "gamma":
            img = random_gamma(img, r, spec)
        elif name == "bias":
            img = random_bias_field(img, r, spec)
        elif name == "noise":
            img = random_gaussian_noise(img, r, spec)
        elif name == "smooth":
            img = random_gaussian_smooth(img, r, spec)
        elif name == "scale":
            img = random_intensity_scale(img, r, spec)
        elif name == "mirror":
            img, lab = random_mirror(img, lab, r, spec)
    return img, np.clip(lab, 0.0, 1.0), applied


def augment_pair(pair, cfg, seed=None):
    """Augment a :class:`SamplePair`; the image is z-normalised last.

    With every probability at zero the label is returned bit-identical and the
    image is only z-normalised.
    """
    img, lab, _ = augment_arrays(pair.image.data, pair.label.data, cfg, seed)
    image = znormalize(pair.image.with_data(img))
    label = pair.label.with_data(lab)
    return SamplePair(image, label)


def sample_seed(seed, index):
    """Independent per-sample seed (seed XOR sample index)."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF
