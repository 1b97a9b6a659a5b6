"""One simulated participant, start to finish.

Generates the 54-trial design, runs the search agents against the physics
(including the sampled calibration error, which only touches the array
condition), and prints a per-block story of what happened.
Run as: python demos/04_single_session.py
"""

import numpy as np

from wfslab import agent as ag
from wfslab import session as ss
from wfslab.calibration import MisalignmentModel, sample_misalignment
from wfslab.geometry import Rect

AREA = Rect.square(2.0)
SEED = 2001

plan = ss.generate_session("demo", SEED, ss.System.WFS)
print(f"participant '{plan.participant_id}', seed {SEED}, starts with {plan.first_system.value}")
print(f"{len(plan.trials)} trials in 8 blocks (6/6/6/9 per system half)\n")

misalignment = sample_misalignment(MisalignmentModel(), SEED)
print(f"sampled calibration residual: shift ({misalignment.translation[0] * 100:+.1f}, "
      f"{misalignment.translation[1] * 100:+.1f}) cm, "
      f"rotation {np.degrees(misalignment.rotation):+.2f} deg (array condition only)\n")

models = ss.SimModels(misalignment=misalignment)


def agent_factory(system, seed):
    policy = "wfs" if system is ss.System.WFS else "stereo"
    params = ag.AgentParams(seed=seed, cue_noise_itd=2e-5, cue_noise_level=0.3)
    return ag.make_agent(policy, params, AREA, 1.6)


run = ss.run_session(plan, models, agent_factory)

specs = {t.index: t for t in plan.trials}
for block in range(8):
    results = [r for r in run.results if specs[r.spec_index].block == block]
    spec0 = specs[results[0].spec_index]
    label = f"{spec0.system.value:6s} {spec0.movement.value:7s}"
    if spec0.movement is ss.Movement.STATIC:
        label += f" {spec0.environment.value:9s}"
    scores = [r.score for r in results]
    times = [r.guess_time for r in results]
    print(f"block {block} [{label:25s}] mean score {np.mean(scores):.3f} m, "
          f"mean guess time {np.mean(times):5.1f} s")

print()
for system in ss.System:
    static = [r.score for r in run.results
              if specs[r.spec_index].system is system
              and specs[r.spec_index].movement is ss.Movement.STATIC]
    below = sum(1 for s in static if s < 0.2) / len(static)
    print(f"{system.value}: static mean {np.mean(static):.3f} m, "
          f"{below:.0%} of guesses within 20 cm")

total_samples = sum(len(v) for v in run.tracking.values())
wall = total_samples * ss.TICK
print(f"\ntracking: {total_samples} samples at 50 Hz = {wall / 60:.1f} simulated minutes")
print("write the logs with wfslab.logfiles.write_session_dir, or just use "
      "`wfslab simulate` for a whole cohort")
