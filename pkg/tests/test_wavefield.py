import numpy as np
import pytest

from wfslab import wavefield as wf
from wfslab.exceptions import (
    ConfigurationError,
    DegenerateInputError,
    GeometryError,
    NoValidZoneError,
    SingularityError,
)
from wfslab.geometry import Rect

C = wf.SPEED_OF_SOUND


def central_grid(extent=1.0, n=21, height=1.6):
    return wf.make_grid(Rect.square(extent), n, n, height)


class TestBuildSquareArray:
    def test_paper_geometry_64_speakers(self, array16):
        assert len(array16) == 64
        for side in range(4):
            assert len(array16.side_indices(side)) == 16

    def test_spacing_equals_side_over_count(self, array16):
        # derived: 2.0 m / 16 speakers = 0.125 m between neighbors on a side
        for side in range(4):
            pos = array16.positions[array16.side_indices(side)]
            gaps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
            np.testing.assert_allclose(gaps, 0.125, atol=1e-12)

    def test_offsets_follow_centered_formula(self, array16):
        spacing = 2.0 / 16
        expected = np.array([(i + 0.5) * spacing - 1.0 for i in range(16)])
        north = array16.positions[array16.side_indices(0)]
        np.testing.assert_allclose(np.sort(north[:, 0]), np.sort(expected), atol=1e-12)
        assert np.allclose(north[:, 1], 1.0)

    def test_two_per_side_mirror_symmetric(self):
        arr = wf.build_square_array(2.0, 2, 1.6)
        assert len(arr) == 8
        pts = {(round(p[0], 9), round(p[1], 9)) for p in arr.positions}
        mirrored = {(-x, y) for x, y in pts} | {(x, -y) for x, y in pts}
        assert pts == {(x, y) for x, y in mirrored if (x, y) in pts} | pts

    def test_speakers_at_array_height_with_unit_normals(self, array16):
        assert np.allclose(array16.positions[:, 2], 1.6)
        norms = np.linalg.norm(array16.normals, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_normals_point_inward(self, array16):
        to_center = array16.center[None, :2] - array16.positions[:, :2]
        dots = np.einsum("ij,ij->i", array16.normals[:, :2], to_center)
        assert (dots > 0).all()

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            wf.build_square_array(-1.0, 16, 1.6)
        with pytest.raises(ValueError):
            wf.build_square_array(2.0, 1, 1.6)


class TestClassifySource:
    def test_center_is_focused(self, array16):
        assert wf.classify_source([0.0, 0.0, 1.6], array16).kind is wf.SourceKind.FOCUSED

    def test_far_point_is_exterior(self, array16):
        assert wf.classify_source([5.0, 0.0, 1.6], array16).kind is wf.SourceKind.EXTERIOR

    def test_boundary_is_exterior(self, array16):
        assert wf.classify_source([1.0, 0.0, 1.6], array16).kind is wf.SourceKind.EXTERIOR
        assert wf.classify_source([0.3, -1.0, 1.6], array16).kind is wf.SourceKind.EXTERIOR


class TestDrivingFunctions:
    def test_exterior_behind_side0_activates_only_side0(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        # oracle: evaluate the dot-product activation rule geometrically
        for i, spk in enumerate(array16.speakers):
            direction = (spk.position - src.position)
            direction = direction / np.linalg.norm(direction)
            expected = float(direction @ spk.inward_normal) > 0.0
            assert driving.active[i] == expected
        active_sides = {array16.speakers[i].side_id for i in np.where(driving.active)[0]}
        assert active_sides == {0}

    def test_delays_symmetric_about_side_midpoint(self, array16):
        src = wf.classify_source([0.0, 2.0, 1.6], array16)  # on side 0's bisector
        driving = wf.driving_functions(src, array16)
        idx = array16.side_indices(0)
        delays = driving.delays[idx]
        np.testing.assert_allclose(delays, delays[::-1], atol=1e-15)

    def test_exterior_delay_is_distance_over_c(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        for i in np.where(driving.active)[0]:
            d = np.linalg.norm(array16.positions[i] - src.position)
            assert driving.delays[i] == pytest.approx(d / C, abs=1e-15)

    def test_inactive_speakers_have_zero_gain(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        assert np.all(driving.gains[~driving.active] == 0.0)

    def test_focused_delays_nonnegative_one_exact_zero(self, array16):
        src = wf.classify_source([0.3, -0.2, 1.6], array16)
        driving = wf.driving_functions(src, array16, mode=wf.RenderMode.STATIC, default_subarray=1)
        active_delays = driving.delays[driving.active]
        assert (active_delays >= 0.0).all()
        assert np.min(active_delays) == 0.0
        # the farthest active speaker fires first (zero delay)
        idx = np.where(driving.active)[0]
        dists = np.linalg.norm(array16.positions[idx] - src.position, axis=1)
        assert driving.delays[idx[np.argmax(dists)]] == 0.0

    def test_focused_static_requires_default_subarray(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        with pytest.raises(ConfigurationError):
            wf.driving_functions(src, array16, mode=wf.RenderMode.STATIC)

    def test_focused_user_dependent_requires_listener(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        with pytest.raises(ValueError):
            wf.driving_functions(src, array16, mode=wf.RenderMode.USER_DEPENDENT)

    def test_user_dependent_selects_opposite_side(self, array16):
        # listener south of a centered focused source -> northern side renders
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        listener = np.array([0.0, -0.8, 1.6])
        driving = wf.driving_functions(src, array16, listener, wf.RenderMode.USER_DEPENDENT)
        active_sides = {array16.speakers[i].side_id for i in np.where(driving.active)[0]}
        assert active_sides == {0}

    def test_user_dependent_level_normalization(self, array16):
        src = wf.classify_source([0.2, 0.1, 1.6], array16)
        listener = np.array([-0.3, -0.6, 1.6])
        driving = wf.driving_functions(src, array16, listener, wf.RenderMode.USER_DEPENDENT)
        p_syn = abs(wf.synthesize_field(driving, array16, listener, 500.0).pressure)
        p_ideal = abs(wf.ideal_field(src, listener, 500.0).pressure)
        assert p_syn == pytest.approx(p_ideal, rel=1e-6)

    def test_source_on_boundary_line_has_empty_active_set(self, array16):
        src = wf.classify_source([0.0, 1.0, 1.6], array16)  # exactly on side 0
        with pytest.raises(GeometryError):
            wf.driving_functions(src, array16)


class TestSynthesizeField:
    def single_speaker_driving(self, array16, index=0, gain=1.0, delay=0.0):
        active = np.zeros(64, dtype=bool)
        active[index] = True
        delays = np.zeros(64)
        delays[index] = delay
        gains = np.zeros(64)
        gains[index] = gain
        return wf.DrivingSet(active, delays, gains, array16.center)

    def test_single_speaker_unit_magnitude_at_1m(self, array16):
        driving = self.single_speaker_driving(array16)
        spk = array16.positions[0]
        point = spk + np.array([0.0, -1.0, 0.0])  # 1 m inward
        sample = wf.synthesize_field(driving, array16, point, 500.0)
        assert abs(sample.pressure) == pytest.approx(1.0, abs=1e-12)

    def test_linearity_gain_doubling(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        doubled = wf.DrivingSet(driving.active, driving.delays, driving.gains * 2.0, driving.reference_point)
        rng = np.random.default_rng(1)
        for _ in range(10):
            point = np.array([rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), 1.6])
            p1 = wf.synthesize_field(driving, array16, point, 700.0).pressure
            p2 = wf.synthesize_field(doubled, array16, point, 700.0).pressure
            assert abs(p2) == pytest.approx(2.0 * abs(p1), rel=1e-12)

    def test_superposition_of_disjoint_driving_sets(self, array16):
        # field of the union equals the complex sum of the parts
        a = self.single_speaker_driving(array16, index=3, gain=0.7, delay=1e-4)
        b = self.single_speaker_driving(array16, index=40, gain=1.3, delay=2e-4)
        active = a.active | b.active
        union = wf.DrivingSet(active, a.delays + b.delays, a.gains + b.gains, array16.center)
        rng = np.random.default_rng(2)
        for _ in range(20):
            point = np.array([rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), 1.6])
            pa = wf.synthesize_field(a, array16, point, 650.0).pressure
            pb = wf.synthesize_field(b, array16, point, 650.0).pressure
            pu = wf.synthesize_field(union, array16, point, 650.0).pressure
            assert pu == pytest.approx(pa + pb, rel=1e-9)

    def test_symmetric_pair_sums_coherently(self, array16):
        # two mirrored speakers, equidistant observation point, equal delays
        north = array16.side_indices(0)
        pos = array16.positions[north]
        i1 = north[int(np.argmin(np.abs(pos[:, 0] - 0.4375)))]
        i2 = north[int(np.argmin(np.abs(pos[:, 0] + 0.4375)))]
        active = np.zeros(64, dtype=bool)
        active[[i1, i2]] = True
        gains = np.zeros(64)
        gains[[i1, i2]] = 1.0
        driving = wf.DrivingSet(active, np.zeros(64), gains, array16.center)
        point = np.array([0.0, -0.5, 1.6])  # on the mirror plane
        single = self.single_speaker_driving(array16, index=i1)
        p_pair = wf.synthesize_field(driving, array16, point, 500.0).pressure
        p_one = wf.synthesize_field(single, array16, point, 500.0).pressure
        assert p_pair == pytest.approx(2.0 * p_one, rel=1e-12)

    def test_singularity_guard(self, array16):
        driving = self.single_speaker_driving(array16)
        point = array16.positions[0] + np.array([0.0, 5e-4, 0.0])
        with pytest.raises(SingularityError):
            wf.synthesize_field(driving, array16, point, 500.0)

    def test_rejects_nonpositive_frequency(self, array16):
        driving = self.single_speaker_driving(array16)
        with pytest.raises(ValueError):
            wf.synthesize_field(driving, array16, [0.0, 0.0, 1.6], 0.0)


class TestIdealField:
    def test_inverse_distance_magnitude(self):
        src = wf.VirtualSource(np.array([0.0, 3.0, 1.6]), wf.SourceKind.EXTERIOR)
        p1 = wf.ideal_field(src, [0.0, 2.0, 1.6], 500.0)
        p2 = wf.ideal_field(src, [0.0, 1.0, 1.6], 500.0)
        assert abs(p1.pressure) == pytest.approx(1.0, abs=1e-12)
        assert abs(p2.pressure) == pytest.approx(0.5, abs=1e-12)

    def test_phase_is_minus_two_pi_at_one_wavelength(self):
        f = 500.0
        src = wf.VirtualSource(np.array([0.0, 0.0, 1.6]), wf.SourceKind.EXTERIOR)
        r = C / f
        sample = wf.ideal_field(src, [r, 0.0, 1.6], f)
        assert np.angle(sample.pressure) == pytest.approx(0.0, abs=1e-9)


class TestReconstructionError:
    def test_scale_invariance(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        grid = central_grid()
        e1 = wf.reconstruction_error(src, array16, driving, grid, 500.0)
        scaled = wf.DrivingSet(driving.active, driving.delays, driving.gains * 7.3, driving.reference_point)
        e2 = wf.reconstruction_error(src, array16, scaled, grid, 500.0)
        assert e1 == pytest.approx(e2, abs=1e-12)

    def test_perfect_match_gives_zero(self, array16):
        # a source placed exactly on a speaker, rendered by that speaker alone
        src = wf.VirtualSource(array16.positions[5].copy(), wf.SourceKind.EXTERIOR)
        active = np.zeros(64, dtype=bool)
        active[5] = True
        gains = np.zeros(64)
        gains[5] = 4.2  # absorbed by the optimal complex scale
        driving = wf.DrivingSet(active, np.zeros(64), gains, array16.center)
        err = wf.reconstruction_error(src, array16, driving, central_grid(), 500.0)
        assert err == pytest.approx(0.0, abs=1e-9)

    def test_error_in_unit_interval(self, array16):
        src = wf.classify_source([1.8, 0.4, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        err = wf.reconstruction_error(src, array16, driving, central_grid(), 900.0)
        assert 0.0 <= err <= 1.0

    def test_full_array_beats_single_nearest_speaker(self, array16):
        # both error numbers come from this same operation (its own oracle)
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        grid = central_grid()
        err_full = wf.reconstruction_error(src, array16, driving, grid, 500.0)
        nearest = int(np.argmin(np.linalg.norm(array16.positions - src.position, axis=1)))
        active = np.zeros(64, dtype=bool)
        active[nearest] = True
        delays = np.zeros(64)
        delays[nearest] = np.linalg.norm(array16.positions[nearest] - src.position) / C
        gains = np.zeros(64)
        gains[nearest] = 1.0
        single = wf.DrivingSet(active, delays, gains, array16.center)
        err_single = wf.reconstruction_error(src, array16, single, grid, 500.0)
        assert err_full < err_single

    def test_aperture_monotonicity_below_aliasing(self, array16):
        # 500 Hz is below c / (2 * 0.125 m) = 1372 Hz
        arr8 = wf.build_square_array(2.0, 8, 1.6)
        grid = central_grid()
        src16 = wf.classify_source([0.0, 1.5, 1.6], array16)
        src8 = wf.classify_source([0.0, 1.5, 1.6], arr8)
        e16 = wf.reconstruction_error(src16, array16, wf.driving_functions(src16, array16), grid, 500.0)
        e8 = wf.reconstruction_error(src8, arr8, wf.driving_functions(src8, arr8), grid, 500.0)
        assert e16 <= e8

    def test_degenerate_inputs(self, array16):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        with pytest.raises(ValueError):
            wf.reconstruction_error(src, array16, driving, np.empty((0, 3)), 500.0)
        outside = np.array([[3.0, 3.0, 1.6]])
        with pytest.raises(ValueError):
            wf.reconstruction_error(src, array16, driving, outside, 500.0)


class TestValidZoneAndSubarraySelection:
    def test_zone_membership_examples(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        zone = wf.valid_zone(src, 0, array16)  # northern sub-array
        assert zone.contains([0.0, -0.8])  # listener south of center: inside
        assert not zone.contains([0.0, 0.8])  # north of center: outside
        assert not zone.contains(zone.apex[:2])  # apex itself: outside (strict)

    def test_zone_rejects_exterior_source(self, array16):
        src = wf.classify_source([0.0, 3.0, 1.6], array16)
        with pytest.raises(ValueError):
            wf.valid_zone(src, 0, array16)

    def test_select_south_listener_gets_north(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        assert wf.select_subarray(src, [0.0, -0.8, 1.6], array16) == 0

    def test_select_east_listener_gets_west(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        assert wf.select_subarray(src, [0.8, 0.0, 1.6], array16) == 3

    def test_select_coincident_listener_raises(self, array16):
        src = wf.classify_source([0.0, 0.0, 1.6], array16)
        with pytest.raises(NoValidZoneError):
            wf.select_subarray(src, [0.005, 0.0, 1.6], array16)

    def test_selected_zone_always_contains_listener(self, array16):
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(300):
            src = wf.classify_source(
                [rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), 1.6], array16
            )
            listener = np.array([rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95), 1.6])
            try:
                side = wf.select_subarray(src, listener, array16)
            except NoValidZoneError:
                continue
            assert wf.valid_zone(src, side, array16).contains(listener)
            checked += 1
        assert checked > 100


class TestErrorMapExport:
    def test_export_has_metadata_and_error(self, array16, tmp_path):
        src = wf.classify_source([0.0, 1.5, 1.6], array16)
        driving = wf.driving_functions(src, array16)
        path = tmp_path / "field.csv"
        err = wf.export_error_map(path, src, array16, driving, Rect.square(1.0), 11, 11, 500.0)
        text = path.read_text()
        assert "# kind=fieldmap" in text
        assert "# active_sides=0" in text
        assert f"# error={err!r}" in text
        header = [l for l in text.splitlines() if not l.startswith("#")][0]
        assert header == "x,y,abs_syn,abs_ideal,error_contribution"
        # per-point contributions sum to the squared error
        rows = [l for l in text.splitlines() if not l.startswith("#")][1:]
        contrib = sum(float(r.split(",")[4]) for r in rows)
        assert contrib == pytest.approx(err**2, rel=1e-9)
