from collections import Counter

import numpy as np
import pytest

from wfslab import agent as ag
from wfslab import session as ss
from wfslab import wavefield as wf
from wfslab.calibration import MisalignmentModel, RigidTransform2D, sample_misalignment
from wfslab.geometry import Rect

AREA = Rect.square(2.0)


class TestSoundAssets:
    def test_exact_durations(self):
        assert ss.SOUND_ASSETS[ss.SoundId.TELEPHONE].duration == 6.12
        assert ss.SOUND_ASSETS[ss.SoundId.PIANO].duration == 6.861
        assert ss.SOUND_ASSETS[ss.SoundId.BIRDSONG].duration == 159.362


@pytest.fixture(scope="module")
def plan():
    return ss.generate_session("p01", 7, ss.System.WFS)


class TestGenerateSession:

    def test_counts_36_static_18_dynamic(self, plan):
        static = [t for t in plan.trials if t.movement is ss.Movement.STATIC]
        dynamic = [t for t in plan.trials if t.movement is ss.Movement.DYNAMIC]
        assert len(plan.trials) == 54
        assert len(static) == 36
        assert len(dynamic) == 18

    def test_every_static_condition_exactly_twice(self, plan):
        hist = Counter(
            (t.system, t.environment, t.sound)
            for t in plan.trials
            if t.movement is ss.Movement.STATIC
        )
        assert len(hist) == 18
        assert set(hist.values()) == {2}

    def test_every_dynamic_condition_exactly_thrice(self, plan):
        hist = Counter(
            (t.system, t.sound) for t in plan.trials if t.movement is ss.Movement.DYNAMIC
        )
        assert len(hist) == 6
        assert set(hist.values()) == {3}

    def test_block_structure_6_6_6_9_per_half(self, plan):
        sizes = Counter(t.block for t in plan.trials)
        assert [sizes[b] for b in range(8)] == [6, 6, 6, 9, 6, 6, 6, 9]
        for block in range(8):
            trials = [t for t in plan.trials if t.block == block]
            assert len({t.system for t in trials}) == 1
            assert len({t.movement for t in trials}) == 1
            if trials[0].movement is ss.Movement.STATIC:
                assert len({t.environment for t in trials}) == 1

    def test_first_half_shares_first_system(self, plan):
        first_half = [t for t in plan.trials if t.block < 4]
        assert {t.system for t in first_half} == {ss.System.WFS}
        second_half = [t for t in plan.trials if t.block >= 4]
        assert {t.system for t in second_half} == {ss.System.STEREO}

    def test_randomization_confined_within_blocks(self):
        # same seed: identical; different seeds: same per-block multisets,
        # trials never migrate across blocks
        base = ss.generate_session("p", 3, ss.System.STEREO)
        other = ss.generate_session("p", 4, ss.System.STEREO)

        def block_multiset(plan, block):
            return Counter(
                (t.system, t.environment, t.sound, t.movement)
                for t in plan.trials
                if t.block == block
            )

        for block in range(8):
            assert block_multiset(base, block) == block_multiset(other, block)
        assert [t.index for t in base.trials] == list(range(54))

    def test_dynamic_always_blank_with_2m_trajectory(self, plan):
        for t in plan.trials:
            if t.movement is ss.Movement.DYNAMIC:
                assert t.environment is ss.Environment.BLANK
                assert np.linalg.norm(t.trajectory.end - t.source_start) == pytest.approx(
                    2.0, abs=1e-9
                )
                assert 1.0 <= t.trajectory.duration <= 3.0
            else:
                assert t.trajectory is None

    def test_sources_inside_walkable_area(self, plan):
        for t in plan.trials:
            assert AREA.contains(t.source_start)
            if t.trajectory is not None:
                assert AREA.contains(t.trajectory.end)

    def test_deterministic_per_seed(self):
        a = ss.generate_session("p", 11, ss.System.WFS)
        b = ss.generate_session("p", 11, ss.System.WFS)
        for ta, tb in zip(a.trials, b.trials):
            assert ta.sound == tb.sound and ta.block == tb.block
            np.testing.assert_array_equal(ta.source_start, tb.source_start)

    def test_tutorial_trials_only_on_request(self):
        assert ss.generate_session("p", 1, ss.System.WFS).tutorial_trials == ()
        plan = ss.generate_session("p", 1, ss.System.WFS, tutorial=True)
        assert len(plan.tutorial_trials) == 4
        assert len(plan.trials) == 54  # warmups never count toward the design
        sounds = [t.sound for t in plan.tutorial_trials]
        assert sounds[0] is ss.SoundId.TELEPHONE
        assert set(sounds[1:]) == set(ss.SoundId)


class TestRandomTrajectory:
    def test_length_and_duration_over_10k_draws(self):
        rng = np.random.default_rng(2)
        for _ in range(10_000):
            start, traj = ss.random_trajectory(rng, AREA)
            assert np.linalg.norm(traj.end - start) == pytest.approx(2.0, abs=1e-9)
            assert 1.0 <= traj.duration <= 3.0
            assert AREA.contains(start) and AREA.contains(traj.end)

    def test_corner_start_lands_inside(self):
        rng = np.random.default_rng(3)
        corner = np.array([-0.99, -0.99])
        for _ in range(200):
            start, traj = ss.random_trajectory(rng, AREA, start=corner)
            np.testing.assert_array_equal(start, corner)
            assert AREA.contains(traj.end)
            # a 2 m leg from this corner must head into the far diagonal half
            assert traj.end[0] > -0.2 or traj.end[1] > -0.2

    def test_pinned_central_start_exhausts_retries(self):
        # from the exact center no 2 m leg fits inside a 2x2 square
        rng = np.random.default_rng(4)
        with pytest.raises(RuntimeError):
            ss.random_trajectory(rng, AREA, start=np.zeros(2), max_tries=200)


class TestSessionPlanFile:
    def test_round_trip(self, tmp_path):
        plan = ss.generate_session("p07", 99, ss.System.STEREO, tutorial=True)
        path = tmp_path / "session_p07.csv"
        ss.write_session_plan(plan, path)
        loaded = ss.read_session_plan(path)
        assert loaded.participant_id == "p07"
        assert loaded.seed == 99
        assert loaded.first_system is ss.System.STEREO
        assert len(loaded.trials) == 54
        assert len(loaded.tutorial_trials) == 4
        for a, b in zip(plan.trials, loaded.trials):
            assert (a.index, a.block, a.system, a.environment, a.sound, a.movement) == (
                b.index, b.block, b.system, b.environment, b.sound, b.movement
            )
            np.testing.assert_array_equal(a.source_start, b.source_start)
            if a.trajectory is not None:
                np.testing.assert_array_equal(a.trajectory.end, b.trajectory.end)
                assert a.trajectory.duration == b.trajectory.duration

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# seed=1\n0,0,telephone,blank,wfs\n")
        with pytest.raises(ValueError):
            ss.read_session_plan(path)


def static_spec(source, system=ss.System.STEREO, sound=ss.SoundId.BIRDSONG, index=0):
    return ss.TrialSpec(
        index=index,
        block=0,
        system=system,
        environment=ss.Environment.BLANK,
        sound=sound,
        movement=ss.Movement.STATIC,
        source_start=np.asarray(source, dtype=float),
        height=1.6,
        trajectory=None,
    )


class GuessOffsetAgent(ag.OracleAgent):
    """Guesses the target plus a fixed offset; for score arithmetic tests."""

    def __init__(self, offset, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._offset = np.asarray(offset, dtype=float)

    def step(self, t, cue, playing, dt):
        if self.phase is ag.AgentPhase.DONE or not playing or self._target is None:
            return None
        self.phase = ag.AgentPhase.DONE
        guess = self._target + self._offset
        self.right_hand = np.array([guess[0], guess[1], self.height])
        self._guess = guess
        return guess


class TestRunTrial:
    def test_oracle_scores_zero_instantly(self):
        spec = static_spec([0.4, -0.3])
        agent = ag.OracleAgent(ag.AgentParams(seed=1), AREA, 1.6)
        result, samples, _ = ss.run_trial(spec, agent, ss.SimModels(), np.random.default_rng(0))
        assert result.score == pytest.approx(0.0, abs=1e-12)
        assert result.guess_time == pytest.approx(0.0, abs=1e-9)

    def test_three_four_five_score(self):
        spec = static_spec([0.1, 0.2])
        agent = GuessOffsetAgent([0.3, 0.4], ag.AgentParams(seed=1), AREA, 1.6)
        result, _, _ = ss.run_trial(spec, agent, ss.SimModels(), np.random.default_rng(0))
        assert result.score == pytest.approx(0.5, abs=1e-12)

    def test_tracking_at_50hz_with_constant_step(self):
        spec = static_spec([0.5, 0.5])
        agent = ag.make_agent("stereo", ag.AgentParams(seed=2), AREA, 1.6)
        result, samples, next_tick = ss.run_trial(
            spec, agent, ss.SimModels(), np.random.default_rng(1)
        )
        ts = np.array([s.t for s in samples])
        steps = np.diff(ts)
        assert np.all(np.abs(steps - 0.02) < 1e-6)
        duration = ts[-1] - ts[0]
        assert len(samples) == pytest.approx(duration * 50.0 + 1, abs=1.0)
        assert next_tick == len(samples)

    def test_dynamic_target_is_trajectory_end(self):
        start = np.array([-0.8, -0.8])
        traj = ss.Trajectory(end=np.array([0.55, 0.68]), duration=2.0)
        spec = ss.TrialSpec(
            index=0, block=0, system=ss.System.STEREO, environment=ss.Environment.BLANK,
            sound=ss.SoundId.PIANO, movement=ss.Movement.DYNAMIC,
            source_start=start, height=1.6, trajectory=traj,
        )
        agent = ag.OracleAgent(ag.AgentParams(seed=1), AREA, 1.6)
        result, _, _ = ss.run_trial(spec, agent, ss.SimModels(), np.random.default_rng(0))
        np.testing.assert_array_equal(result.target, traj.end)
        assert result.score == pytest.approx(0.0, abs=1e-12)

    def test_timeout_forces_a_guess(self):
        class SilentAgent(ag.OracleAgent):
            def step(self, t, cue, playing, dt):
                return None  # never volunteers a guess

            def _best_guess(self):
                return self.head[:2]

        spec = static_spec([0.5, 0.5], sound=ss.SoundId.TELEPHONE)
        agent = SilentAgent(ag.AgentParams(seed=1), AREA, 1.6)
        result, _, _ = ss.run_trial(
            spec, agent, ss.SimModels(), np.random.default_rng(0), guess_timeout=2.0
        )
        assert result.guess is not None
        assert result.guess_time >= ss.SOUND_ASSETS[ss.SoundId.TELEPHONE].duration

    def test_misalignment_applies_to_wfs_only(self):
        # identical setup twice, differing only in the misalignment transform;
        # stereo results must match exactly, array-condition results must not
        big = sample_misalignment(
            MisalignmentModel(sigma_translation=0.3, sigma_rotation=0.3), 5
        )
        results = {}
        for name, mis in (("id", RigidTransform2D.identity()), ("mis", big)):
            out = []
            for system in (ss.System.STEREO, ss.System.WFS):
                spec = static_spec([0.35, 0.55], system=system)
                agent = ag.make_agent(
                    "wfs" if system is ss.System.WFS else "stereo",
                    ag.AgentParams(seed=4), AREA, 1.6,
                )
                result, _, _ = ss.run_trial(
                    spec, agent, ss.SimModels(misalignment=mis), np.random.default_rng(2)
                )
                out.append(result)
            results[name] = out
        stereo_id, wfs_id = results["id"]
        stereo_mis, wfs_mis = results["mis"]
        np.testing.assert_array_equal(stereo_id.guess, stereo_mis.guess)
        assert not np.array_equal(wfs_id.guess, wfs_mis.guess)

    def test_sound_plays_once_cue_stops_after_duration(self):
        seen = []

        class CueRecorder(ag.OracleAgent):
            def step(self, t, cue, playing, dt):
                seen.append((t, cue is not None))
                return None

            def _best_guess(self):
                return self.head[:2]

        spec = static_spec([0.5, 0.5], sound=ss.SoundId.TELEPHONE)
        agent = CueRecorder(ag.AgentParams(seed=1), AREA, 1.6)
        ss.run_trial(spec, agent, ss.SimModels(), np.random.default_rng(0), guess_timeout=1.0)
        duration = ss.SOUND_ASSETS[ss.SoundId.TELEPHONE].duration
        for t, has_cue in seen:
            assert has_cue == (0.0 <= t < duration)


class TestRunSession:
    def test_session_timestamps_strictly_increase(self):
        plan = ss.generate_session("p01", 21, ss.System.WFS)
        factory = lambda system, seed: ag.OracleAgent(ag.AgentParams(seed=seed), AREA, 1.6)
        run = ss.run_session(plan, ss.SimModels(), factory)
        all_t = [s.t for idx in sorted(run.tracking) for s in run.tracking[idx]]
        diffs = np.diff(all_t)
        assert (diffs > 0).all()
        assert np.all(np.abs(diffs - 0.02) < 1e-6)

    def test_oracle_session_all_zero_scores(self):
        plan = ss.generate_session("p01", 22, ss.System.STEREO)
        factory = lambda system, seed: ag.OracleAgent(ag.AgentParams(seed=seed), AREA, 1.6)
        run = ss.run_session(plan, ss.SimModels(), factory)
        assert len(run.results) == 54
        assert all(r.score == pytest.approx(0.0, abs=1e-12) for r in run.results)

    def test_trial_scores_nonnegative(self, small_cohort):
        for session in small_cohort:
            for trial in session.trials:
                assert trial.score >= 0.0
