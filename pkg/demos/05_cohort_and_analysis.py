"""Full pipeline: six participants, logs on disk, the whole analysis bundle.

Equivalent to `wfslab simulate` followed by `wfslab analyze`, then peeks at
the headline numbers the way the analysis section would.
Run as: python demos/05_cohort_and_analysis.py [outdir]
"""

import sys
import time
from pathlib import Path

import numpy as np

from wfslab import analysis as an
from wfslab import logfiles as lf
from wfslab import session as ss
from wfslab.config import SimulationConfig

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_cohort")
logs = out / "logs"
bundle = out / "bundle"

cfg = SimulationConfig()  # six participants, four array-first
t0 = time.time()
ss.run_cohort(
    cfg.participant_specs(), cfg.models_factory(), cfg.agent_factory(),
    logs, hand_dropout=cfg.hand_dropout,
)
print(f"simulated {cfg.participants} sessions into {logs} in {time.time() - t0:.1f} s")

sessions = lf.read_cohort(logs)
an.export_analysis(sessions, bundle)
print(f"analysis bundle written to {bundle}\n")

print("mean score by system and movement (m, lower is better):")
for row in an.mean_scores(sessions, ("system", "movement")):
    print(f"  {row.group[0]:6s} {row.group[1]:7s}: {row.mean_score:.3f} "
          f"(guess time {row.mean_guess_time:5.1f} s, n={row.n})")

print("\nfraction of guesses within 20 cm:")
for system in ss.System:
    frac = an.fraction_below(sessions, 0.2, an.ConditionFilter(system=system))
    print(f"  {system.value:6s}: {frac:.1%}")

print("\nguess mass in the outer 25 cm border (heatmap tendency):")
for system in ss.System:
    guesses = np.array([
        t.guess for _, t in an.iter_trials(sessions, an.ConditionFilter(system=system))
    ])
    border = 1.0 - (np.abs(guesses) <= 0.75).all(axis=1).mean()
    print(f"  {system.value:6s}: {border:.1%}")

print("\nlearning slopes (static trials, improving iff < -0.1):")
slopes = {}
for session in sessions:
    for system in ss.System:
        static = [t.score for t in sorted(session.trials, key=lambda t: t.index)
                  if t.system is system and t.movement is ss.Movement.STATIC]
        slopes[(session.participant_id, system.value)] = an.learning_slope(static)
improving = {k: v for k, v in slopes.items() if an.is_improving(v)}
print(f"  {len(improving)} of {len(slopes)} participant-system pairs classify as improving")

print(f"\nrender the figures with the plots package: wfsplot {bundle} {out / 'figures'}")
