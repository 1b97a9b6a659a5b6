"""Simulation configuration: flat key=value text with sections.

Parsed with :mod:`configparser`; every key is validated against the schema
below and unknown sections or keys are rejected outright, so a typo cannot
silently fall back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .agent import AgentParams
from .calibration import MisalignmentModel, sample_misalignment
from .geometry import Rect
from .listener import StereoRolloff
from .session import SimModels, System
from .wavefield import RenderMode, build_square_array


class ConfigError(Exception):
    pass


@dataclass
class SimulationConfig:
    participants: int = 6
    wfs_first: int = 4  # how many participants start with the array condition
    base_seed: int = 1000
    output_dir: str = "logs"
    tutorial: bool = False
    guess_timeout: float = 30.0
    hand_dropout: float = 0.02

    side_length: float = 2.0
    speakers_per_side: int = 16
    height: float = 1.6

    rolloff_min: float = 0.1
    rolloff_max: float = 650.0

    sigma_translation: float = 0.02
    sigma_rotation_deg: float = 1.0

    wfs_mode: str = "static"  # or "user_dependent"
    half_aperture_deg: float = 60.0

    walk_speed: float = 0.8
    probe_step: float = 0.15
    cue_noise_itd: float = 2e-5
    cue_noise_level: float = 0.3
    commit_threshold: float = 0.1
    max_search_time: float = 15.0
    noise_decay: float = 1.0

    def validate(self) -> None:
        if self.participants < 1:
            raise ConfigError("participants must be >= 1")
        if not 0 <= self.wfs_first <= self.participants:
            raise ConfigError("wfs_first must be between 0 and participants")
        if self.wfs_mode not in ("static", "user_dependent"):
            raise ConfigError(f"wfs_mode must be static or user_dependent, got {self.wfs_mode!r}")
        if self.speakers_per_side < 2 or self.side_length <= 0:
            raise ConfigError("array geometry is degenerate")
        if not 0.0 <= self.hand_dropout < 1.0:
            raise ConfigError("hand_dropout must be in [0, 1)")

    # section -> {key: field name}
    _SCHEMA = {
        "simulation": [
            "participants", "wfs_first", "base_seed", "output_dir", "tutorial",
            "guess_timeout", "hand_dropout",
        ],
        "array": ["side_length", "speakers_per_side", "height"],
        "rolloff": ["rolloff_min", "rolloff_max"],
        "misalignment": ["sigma_translation", "sigma_rotation_deg"],
        "wfs": ["wfs_mode", "half_aperture_deg"],
        "agent": [
            "walk_speed", "probe_step", "cue_noise_itd", "cue_noise_level",
            "commit_threshold", "max_search_time", "noise_decay",
        ],
    }

    @classmethod
    def from_file(cls, path) -> "SimulationConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        cfg = cls()
        seen = set()
        for section in parser.sections():
            if section not in cls._SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                current = getattr(cfg, key)
                try:
                    if isinstance(current, bool):
                        value = raw.strip().lower() in ("1", "true", "yes", "on")
                    elif isinstance(current, int):
                        value = int(raw)
                    elif isinstance(current, float):
                        value = float(raw)
                    else:
                        value = raw.strip()
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {raw!r}") from exc
                setattr(cfg, key, value)
                seen.add(key)
        if "wfs_first" not in seen:  # scale the 4-of-6 default to small cohorts
            cfg.wfs_first = min(cfg.wfs_first, cfg.participants)
        cfg.validate()
        return cfg

    # --- factories ------------------------------------------------------------

    @property
    def area(self) -> Rect:
        return Rect.square(self.side_length)

    def participant_specs(self) -> list[tuple[str, int, System]]:
        """(id, seed, first system) per participant; seeds are disjoint."""
        out = []
        for i in range(self.participants):
            first = System.WFS if i < self.wfs_first else System.STEREO
            out.append((f"p{i + 1:02d}", self.base_seed + i, first))
        return out

    def models_factory(self):
        array = build_square_array(self.side_length, self.speakers_per_side, self.height)
        rolloff = StereoRolloff(self.rolloff_min, self.rolloff_max)
        mode = RenderMode.USER_DEPENDENT if self.wfs_mode == "user_dependent" else RenderMode.STATIC
        mis_model = MisalignmentModel(
            sigma_translation=self.sigma_translation,
            sigma_rotation=np.deg2rad(self.sigma_rotation_deg),
        )

        def factory(seed: int) -> SimModels:
            return SimModels(
                array=array,
                rolloff=rolloff,
                misalignment=sample_misalignment(mis_model, seed),
                wfs_mode=mode,
                half_aperture=np.deg2rad(self.half_aperture_deg),
            )

        return factory

    def agent_params(self, seed: int) -> AgentParams:
        return AgentParams(
            walk_speed=self.walk_speed,
            probe_step=self.probe_step,
            cue_noise_itd=self.cue_noise_itd,
            cue_noise_level=self.cue_noise_level,
            commit_threshold=self.commit_threshold,
            max_search_time=self.max_search_time,
            seed=seed,
            noise_decay=self.noise_decay,
        )

    def agent_factory(self):
        from .agent import make_agent

        area = self.area
        height = self.height

        def factory(system: System, seed: int):
            policy = "wfs" if system is System.WFS else "stereo"
            return make_agent(policy, self.agent_params(seed), area, height)

        return factory
