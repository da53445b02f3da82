import json

import numpy as np
import pytest

from softgt.augment import (
    ORDER, AugmentConfig, SamplePair, affine_transform, augment_arrays, augment_pair, bias_multiplier,
    bias_terms, elastic_field, elastic_transform, gamma_correct, gaussian_noise, gaussian_smooth,
    intensity_scale, make_streams, mirror, sample_seed, simulate_low_res,
)
from softgt.errors import InvalidArgumentError
from softgt.phantoms import gaussian_blob
from softgt.volume import Volume3D


@pytest.fixture
def pair(rng):
    label = gaussian_blob((12, 12, 10), sigma=(3, 3, 3))
    image = Volume3D(label.data * 100 + rng.normal(0, 5, label.dims))
    return SamplePair(image, label)


class TestConfig:
    def test_defaults(self):
        cfg = AugmentConfig()
        assert cfg.seed == 42
        assert [getattr(cfg, n).p for n in ORDER] == [0.9, 0.5, 0.25, 0.5, 0.3, 0.1, 0.3, 0.15, 0.3]

    def test_roundtrip(self, tmp_path):
        cfg = AugmentConfig.from_dict({"gamma": {"p": 0.2, "gamma": [0.8, 1.2]}, "seed": 7})
        assert cfg.gamma.gamma == (0.8, 1.2) and cfg.seed == 7
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert AugmentConfig.load(p) == cfg

    @pytest.mark.parametrize("doc", [
        {"gamma": {"p": 1.5}}, {"gamma": {"gamma": [3, 1]}}, {"gamma": {"bogus": 1}}, {"warp": {}},
    ])
    def test_invalid(self, doc):
        with pytest.raises(InvalidArgumentError):
            AugmentConfig.from_dict(doc)

    def test_label_grid_checked(self):
        with pytest.raises(InvalidArgumentError):
            SamplePair(Volume3D(np.zeros((2, 2, 2))), Volume3D(np.zeros((2, 2, 3))))


class TestTransforms:
    def test_affine_identity(self, pair):
        img, lab = affine_transform(pair.image.data, pair.label.data)
        np.testing.assert_allclose(img, pair.image.data, atol=1e-5)
        np.testing.assert_allclose(lab, pair.label.data, atol=1e-6)

    def test_affine_integer_translation(self):
        a = np.zeros((6, 6, 6)); a[2, 2, 2] = 1
        img, _ = affine_transform(a, None, translation=(1, 0, -1))
        assert img[3, 2, 1] == pytest.approx(1.0)

    def test_affine_rotation_90(self):
        a = np.zeros((5, 5, 1)); a[3, 2, 0] = 1
        img, _ = affine_transform(a, None, rotation=(0, 0, 90))
        assert img[2, 3, 0] == pytest.approx(1.0, abs=1e-9)

    def test_elastic_zero_field(self, pair):
        img, lab = elastic_transform(pair.image.data, pair.label.data, np.zeros((3,) + pair.image.dims))
        np.testing.assert_allclose(img, pair.image.data, atol=1e-5)

    def test_elastic_field_shape_and_grid(self):
        r = np.random.default_rng(0)
        f = elastic_field((9, 8, 7), r, 30.0, 4.0, grid_spacing=3)
        assert f.shape == (3, 9, 8, 7)
        assert np.isfinite(f).all()

    def test_low_res_keeps_constant(self):
        x = np.full((8, 8, 8), 2.5)
        np.testing.assert_allclose(simulate_low_res(x, 0.5), 2.5)
        np.testing.assert_array_equal(simulate_low_res(x, 1.0), x)

    def test_gamma(self):
        x = np.linspace(0, 4, 5).reshape(5, 1, 1)
        np.testing.assert_allclose(gamma_correct(x, 2.0).ravel(), [0, 0.25, 1, 2.25, 4])
        np.testing.assert_array_equal(gamma_correct(x, 1.0), x)

    def test_bias(self):
        assert len(bias_terms(3)) == 20
        np.testing.assert_array_equal(bias_multiplier((3, 3, 3), np.zeros(20)), 1.0)
        c = np.zeros(20); c[0] = np.log(2)
        np.testing.assert_allclose(bias_multiplier((3, 3, 3), c), 2.0)
        with pytest.raises(InvalidArgumentError):
            bias_multiplier((3, 3, 3), np.zeros(5))

    def test_noise_and_scale(self):
        x = np.zeros((20, 20, 20))
        n = gaussian_noise(x, 0.5, np.random.default_rng(0))
        assert abs(n.std() - 0.5) < 0.02
        np.testing.assert_array_equal(gaussian_noise(x, 0.0, np.random.default_rng(0)), x)
        np.testing.assert_array_equal(intensity_scale(np.ones((2, 2, 2)), 0.25), 1.25)

    def test_smooth_preserves_constant(self):
        np.testing.assert_allclose(gaussian_smooth(np.full((6, 6, 6), 3.0), (1, 2, 0.5)), 3.0)

    def test_mirror(self):
        a = np.arange(8.0).reshape(2, 2, 2)
        img, lab = mirror(a, a + 1, [0, 2])
        np.testing.assert_array_equal(img, a[::-1, :, ::-1])
        np.testing.assert_array_equal(lab, img + 1)


class TestPipeline:
    def test_disabled_is_normalisation_only(self, pair):
        out = augment_pair(pair, AugmentConfig.disabled())
        np.testing.assert_array_equal(out.label.data, pair.label.data)
        x = out.image.data.astype(np.float64)
        assert abs(x.mean()) < 1e-6 and abs(x.std() - 1) < 1e-6

    def test_deterministic(self, pair):
        cfg = AugmentConfig()
        for seed in range(5):
            a, b = augment_pair(pair, cfg, seed), augment_pair(pair, cfg, seed)
            assert a.image.data.tobytes() == b.image.data.tobytes()
            assert a.label.data.tobytes() == b.label.data.tobytes()

    def test_seeds_differ(self, pair):
        a = augment_pair(pair, AugmentConfig(), 1)
        b = augment_pair(pair, AugmentConfig(), 2)
        assert a.image.data.tobytes() != b.image.data.tobytes()

    def test_all_on_label_soft(self, pair):
        cfg = AugmentConfig.from_dict({n: {"p": 1.0} for n in ORDER})
        for seed in range(5):
            img, lab, applied = augment_arrays(pair.image.data, pair.label.data, cfg, seed)
            assert applied == list(ORDER)
            assert lab.min() >= 0 and lab.max() <= 1
            assert np.any((lab > 0) & (lab < 1))

    def test_parameter_streams_independent_of_gates(self, pair):
        # turning an earlier transform off must not change a later transform's parameters
        only_gamma = AugmentConfig.from_dict({**{n: {"p": 0.0} for n in ORDER}, "gamma": {"p": 1.0}})
        with_scale = AugmentConfig.from_dict({**{n: {"p": 0.0} for n in ORDER}, "gamma": {"p": 1.0},
                                              "scale": {"p": 1.0}})
        a, _, _ = augment_arrays(pair.image.data, pair.label.data, only_gamma, 3)
        b, _, _ = augment_arrays(pair.image.data, pair.label.data, with_scale, 3)
        _, streams = make_streams(3)
        s = streams["scale"].uniform(-0.25, 1.0)
        np.testing.assert_allclose(b, a * (1 + s))

    def test_gates_roughly_match_probabilities(self, pair):
        cfg = AugmentConfig()
        counts = dict.fromkeys(ORDER, 0)
        small = np.zeros((4, 4, 4)); small[1:3, 1:3, 1:3] = 0.5
        n = 300
        for seed in range(n):
            for name in augment_arrays(small + 1, small, cfg, seed)[2]:
                counts[name] += 1
        for name in ORDER:
            p = getattr(cfg, name).p
            assert abs(counts[name] / n - p) < 4 * np.sqrt(p * (1 - p) / n) + 1e-9

    def test_sample_seed(self):
        assert sample_seed(42, 0) == 42
        assert len({sample_seed(42, i) for i in range(100)}) == 100


class TestDocumentedExamples:
    def test_affine_zero_is_identity(self, pair):
        img, lab = affine_transform(pair.image.data, pair.label.data, (0, 0, 0), (1, 1, 1), (0, 0, 0))
        np.testing.assert_allclose(img, pair.image.data, atol=1e-6)
        np.testing.assert_allclose(lab, pair.label.data, atol=1e-6)

    def test_affine_translation_constant_interior(self):
        x = np.full((20, 20, 20), 7.0)
        img, _ = affine_transform(x, None, translation=(2.0, 2.0, 2.0))  # 0.1 * dim
        np.testing.assert_allclose(img[4:18, 4:18, 4:18], 7.0, atol=1e-12)
        assert img[0, 0, 0] == 0.0  # zero background enters from the edge

    def test_elastic_constant_stays_constant(self):
        r = np.random.default_rng(4)
        x = np.full((12, 12, 12), 3.0)
        disp = elastic_field(x.shape, r, (30.0, 30.0, 30.0), 4.0)
        img, lab = elastic_transform(x, np.full_like(x, 0.4), disp)
        np.testing.assert_allclose(img, 3.0, atol=1e-12)
        np.testing.assert_allclose(lab, 0.4, atol=1e-12)

    def test_elastic_label_in_unit_range(self, pair):
        r = np.random.default_rng(5)
        for _ in range(20):
            disp = elastic_field(pair.image.dims, r, r.uniform(25, 35, 3), r.uniform(3.5, 5.5))
            _, lab = elastic_transform(pair.image.data, pair.label.data, disp)
            assert lab.min() >= 0 and lab.max() <= 1

    def test_low_res(self, pair):
        x = pair.image.data.astype(np.float64)
        np.testing.assert_allclose(simulate_low_res(x, 1.0), x, atol=1e-6)
        for f in (0.5, 0.73, 0.9):
            assert simulate_low_res(x, f).shape == x.shape
            lab = simulate_low_res(pair.label.data, f, up_order=1)
            assert lab.min() >= 0 and lab.max() <= 1

    def test_gamma_preserves_extremes(self, rng):
        x = rng.uniform(-3, 9, size=(5, 5, 5))
        for g in (0.5, 1.7, 3.0):
            out = gamma_correct(x, g)
            assert out.min() == pytest.approx(x.min()) and out.max() == pytest.approx(x.max())
        y = np.array([0.0, 0.5, 1.0]).reshape(3, 1, 1)
        assert gamma_correct(y, 2.0)[1, 0, 0] == pytest.approx(0.25)

    def test_bias_positive_and_varying(self):
        c = np.random.default_rng(0).uniform(0, 0.5, 20)
        m = bias_multiplier((6, 7, 8), c)
        assert m.min() > 0 and m.std() > 0

    def test_double_mirror_identity(self, pair):
        img, lab = mirror(*mirror(pair.image.data, pair.label.data, [1]), [1])
        assert img.tobytes() == pair.image.data.tobytes()
        assert lab.tobytes() == pair.label.data.tobytes()

    def test_smooth_and_noise_zero_identity(self, pair):
        x = pair.image.data.astype(np.float64)
        np.testing.assert_array_equal(gaussian_smooth(x, 0.0), x)
        np.testing.assert_array_equal(gaussian_noise(x, 0.0, np.random.default_rng(0)), x)

    def test_image_label_alignment(self, pair):
        # spatial steps only; mirrors and an integer translation land on grid points,
        # where cubic and linear interpolation agree
        only = {n: {"p": 0.0} for n in ORDER}
        cfg = AugmentConfig.from_dict({**only, "mirror": {"p": 1.0}})
        x = pair.label.data
        for seed in range(8):
            img, lab, _ = augment_arrays(x, x, cfg, seed)
            np.testing.assert_allclose(img, lab, atol=1e-5)
        img, lab = affine_transform(x, x, translation=(1.0, -2.0, 1.0))
        np.testing.assert_allclose(img, lab, atol=1e-5)
