import numpy as np
import pytest

from wfslab import calibration as cal


class TestAlignCenters:
    def test_identical_centers_identity(self):
        t = cal.align_centers([0.3, 0.4], [0.3, 0.4])
        np.testing.assert_allclose(t.translation, 0.0, atol=1e-15)
        assert t.rotation == 0.0

    def test_translation_definition(self):
        t = cal.align_centers([1.0, 2.0], [0.0, 0.0])
        np.testing.assert_allclose(t.translation, [1.0, 2.0], atol=1e-15)

    def test_maps_virtual_center_onto_real(self):
        t = cal.align_centers([1.0, 2.0], [-0.5, 0.25])
        np.testing.assert_allclose(cal.apply(t, [-0.5, 0.25]), [1.0, 2.0], atol=1e-12)


class TestSetRotation:
    def test_zero_rotation_unchanged(self):
        t = cal.align_centers([1.0, 2.0], [0.0, 0.0])
        t0 = cal.set_rotation(t, 0.0)
        for p in ([0.0, 0.0], [3.0, -1.0]):
            np.testing.assert_allclose(cal.apply(t, p), cal.apply(t0, p), atol=1e-15)

    def test_quarter_turn_east_to_north(self):
        center = np.array([0.5, -0.5])
        t = cal.set_rotation(cal.align_centers(center, center), np.pi / 2.0)
        east = center + [1.0, 0.0]
        np.testing.assert_allclose(cal.apply(t, east), center + [0.0, 1.0], atol=1e-12)

    def test_rotation_preserves_distance_to_center(self):
        rng = np.random.default_rng(3)
        t = cal.set_rotation(cal.align_centers([0.2, 0.1], [0.2, 0.1]), 1.234)
        for _ in range(50):
            p = rng.uniform(-3, 3, 2)
            d0 = np.linalg.norm(p - t.center)
            d1 = np.linalg.norm(cal.apply(t, p) - t.center)
            assert d1 == pytest.approx(d0, abs=1e-12)


class TestApplyInvert:
    def test_identity_transform(self):
        t = cal.RigidTransform2D.identity()
        np.testing.assert_allclose(cal.apply(t, [1.5, -2.5]), [1.5, -2.5], atol=1e-15)

    def test_random_round_trips_and_isometry(self):
        # 10^4 random transforms: inverse composition and distance preservation
        rng = np.random.default_rng(42)
        for _ in range(10_000):
            t = cal.RigidTransform2D(
                center=rng.uniform(-2, 2, 2),
                rotation=rng.uniform(-np.pi, np.pi),
                translation=rng.uniform(-2, 2, 2),
            )
            inv = cal.invert(t)
            p = rng.uniform(-3, 3, 2)
            q = rng.uniform(-3, 3, 2)
            np.testing.assert_allclose(cal.apply(inv, cal.apply(t, p)), p, atol=1e-9)
            np.testing.assert_allclose(cal.apply(t, cal.apply(inv, p)), p, atol=1e-9)
            assert np.linalg.norm(cal.apply(t, p) - cal.apply(t, q)) == pytest.approx(
                np.linalg.norm(p - q), abs=1e-9
            )

    def test_direct_composition_oracle(self):
        # independent oracle: rotate-then-translate matrices composed by hand
        rng = np.random.default_rng(5)
        for _ in range(200):
            c = rng.uniform(-1, 1, 2)
            theta = rng.uniform(-np.pi, np.pi)
            trans = rng.uniform(-1, 1, 2)
            t = cal.RigidTransform2D(center=c, rotation=theta, translation=trans)
            p = rng.uniform(-2, 2, 2)
            rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
            expected = c + rot @ (p + trans - c)
            np.testing.assert_allclose(cal.apply(t, p), expected, atol=1e-12)


class TestMisalignment:
    def test_zero_sigmas_identity(self):
        model = cal.MisalignmentModel(sigma_translation=0.0, sigma_rotation=0.0)
        t = cal.sample_misalignment(model, 7)
        assert t.rotation == 0.0
        np.testing.assert_allclose(t.translation, 0.0, atol=1e-15)

    def test_deterministic_per_seed(self):
        model = cal.MisalignmentModel()
        a = cal.sample_misalignment(model, 99)
        b = cal.sample_misalignment(model, 99)
        assert a.rotation == b.rotation
        np.testing.assert_array_equal(a.translation, b.translation)
        c = cal.sample_misalignment(model, 100)
        assert a.rotation != c.rotation

    def test_monte_carlo_std_within_5_percent(self):
        model = cal.MisalignmentModel(sigma_translation=0.02, sigma_rotation=np.deg2rad(1.0))
        samples = [cal.sample_misalignment(model, seed) for seed in range(100_000)]
        tx = np.array([s.translation[0] for s in samples])
        rot = np.array([s.rotation for s in samples])
        assert np.std(tx) == pytest.approx(0.02, rel=0.05)
        assert np.std(rot) == pytest.approx(np.deg2rad(1.0), rel=0.05)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            cal.MisalignmentModel(sigma_translation=-0.01)
