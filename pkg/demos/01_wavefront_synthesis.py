"""Drive the 64-speaker square array and measure how well it rebuilds a wave.

Walks through the core synthesis chain: build the array, derive per-speaker
delays and gains for an exterior and a focused source, superpose the fields
on a grid, and score the reconstruction against the ideal spherical wave.
Run as: python demos/01_wavefront_synthesis.py
"""

import numpy as np

from wfslab import wavefield as wf
from wfslab.geometry import Rect

array = wf.build_square_array(side_length=2.0, speakers_per_side=16, height=1.6)
print(f"array: {len(array)} speakers, spacing {2.0 / 16:.3f} m, "
      f"aliasing limit ~{wf.SPEED_OF_SOUND / (2 * 0.125):.0f} Hz")

grid = wf.make_grid(Rect.square(1.0), 21, 21, array.height)

# --- an exterior source half a meter behind the north side -------------------
source = wf.classify_source([0.0, 1.5, 1.6], array)
print(f"\nexterior source at (0.0, 1.5): kind={source.kind.value}")
driving = wf.driving_functions(source, array)
sides = sorted({s.side_id for s, on in zip(array.speakers, driving.active) if on})
print(f"  active speakers: {int(driving.active.sum())} on side(s) {sides}")

for freq in (250.0, 500.0, 1000.0, 2000.0, 4000.0):
    err = wf.reconstruction_error(source, array, driving, grid, freq)
    bar = "#" * int(err * 40)
    print(f"  {freq:6.0f} Hz  error {err:.3f}  {bar}")
print("  (errors blow up past the spatial aliasing limit, as they should)")

# --- a focused source inside the array ---------------------------------------
focused = wf.classify_source([0.0, 0.0, 1.6], array)
listener = np.array([0.0, -0.8, 1.6])
side = wf.select_subarray(focused, listener, array)
print(f"\nfocused source at the center, listener 0.8 m south")
print(f"  user-dependent selection picks side {side} (0=N, 1=E, 2=S, 3=W)")

zone = wf.valid_zone(focused, side, array)
probes = {"0.8 m south": [0.0, -0.8], "0.8 m north": [0.0, 0.8], "0.8 m east": [0.8, 0.0]}
for name, p in probes.items():
    print(f"  listener {name}: {'inside' if zone.contains(p) else 'OUTSIDE'} the valid zone")

ud = wf.driving_functions(focused, array, listener, wf.RenderMode.USER_DEPENDENT)
p_syn = abs(wf.synthesize_field(ud, array, listener, 500.0).pressure)
p_ref = abs(wf.ideal_field(focused, listener, 500.0).pressure)
print(f"  level normalization at the listener: |synthesized|={p_syn:.4f} vs |ideal|={p_ref:.4f}")

# --- what user tracking buys: error on a patch around the listener -----------
patch = wf.make_grid(
    Rect(listener[0] - 0.25, listener[0] + 0.25, listener[1] - 0.15, listener[1] + 0.15),
    11, 11, array.height,
)
opposing = wf.driving_functions(
    focused, array, mode=wf.RenderMode.STATIC, default_subarray=wf.OPPOSITE_SIDE[side]
)
e_opposing = wf.reconstruction_error(focused, array, opposing, patch, 500.0)
e_ud = wf.reconstruction_error(focused, array, ud, patch, 500.0)
print(f"  reconstruction error on a patch around the listener:")
print(f"    opposing static sub-array: {e_opposing:.3f}   tracked sub-array: {e_ud:.3f}")

# --- export a comparable pair of error maps ----------------------------------
out = "field_maps"
import pathlib

pathlib.Path(out).mkdir(exist_ok=True)
e_static = wf.export_error_map(
    f"{out}/demo_static_opposing.csv", focused, array, opposing,
    Rect.square(1.6), 33, 33, 500.0,
)
e_full = wf.export_error_map(
    f"{out}/demo_user_dependent.csv", focused, array, ud, Rect.square(1.6), 33, 33, 500.0
)
print(f"\nerror maps written to {out}/ (whole-area errors {e_static:.3f} / {e_full:.3f};")
print("focused sources are only ever valid inside their zone, which is the point)")
print("(feed them to `wfsplot render --kind FieldMap` from the plots package)")
