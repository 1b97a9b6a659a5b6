"""Simulated wave-field-synthesis vs. stereo sound-localization laboratory.

A deterministic, fully software reimplementation of a speaker-array
localization experiment: field synthesis for a square 64-speaker array, a
binaural listener model, search agents, the UDP/OSC positioning protocol,
the session/trial design with its CSV log family, and the analysis suite
that turns cohort logs into scores, heatmaps, kNN maps, learning slopes and
movement curves.
"""

__version__ = "0.1.0"
