"""Synthetic pig runs with planted weld signatures.

Each weld leaves a vibration pulse (strong on ``Vh2``, weak and noisy on
``Vh1``), a decelerate-then-accelerate lobe pair on ``Ahy`` and a bump on
``Mhy``. The remaining channels carry noise only. A stationary launch segment
precedes the run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import InvalidConfig
from .ingest import ODOMETER, SCHEMA, RecordTable
from .preprocess import PipeTally

# compact support of the signature, in half-widths
SUPPORT = 4.0


@dataclass(frozen=True)
class SynthConfig:
    length_m: float = 2000.0
    sample_spacing_m: float = 0.05
    weld_spacing_m: float = 11.8
    weld_jitter_m: float = 0.5
    half_width_m: float = 0.25
    stationary_records: int = 400
    noise_gh: float = 400.0
    noise_ah: float = 150.0
    noise_mh: float = 60.0
    noise_vh: float = 600.0
    vh1_noise_factor: float = 3.0
    amp_vh2: float = 6000.0
    vh1_amp_factor: float = 0.4
    amp_ahy: float = 1000.0
    amp_mhy: float = 300.0
    seed: int = 0

    def validate(self):
        if self.length_m <= 0 or self.sample_spacing_m <= 0:
            raise InvalidConfig("length and sample spacing must be positive")
        if not 0 < self.weld_spacing_m <= 12.0:
            raise InvalidConfig("mean weld spacing must be in (0, 12] m")
        if self.length_m > SCHEMA[ODOMETER].max:
            raise InvalidConfig("run longer than the odometer range")
        if not 0 <= self.weld_jitter_m < self.weld_spacing_m / 2:
            raise InvalidConfig("jitter must be in [0, spacing / 2)")
        if not 0 < self.half_width_m < self.weld_spacing_m / 2:
            raise InvalidConfig("signature half-width must be in (0, spacing / 2)")
        amps = (self.amp_vh2, self.amp_ahy, self.amp_mhy, self.vh1_amp_factor)
        noise = (self.noise_gh, self.noise_ah, self.noise_mh, self.noise_vh,
                 self.vh1_noise_factor)
        if min(amps) < 0 or min(noise) < 0 or self.stationary_records < 0:
            raise InvalidConfig("amplitudes, noise levels and counts must be >= 0")

    @classmethod
    def from_mapping(cls, mapping) -> "SynthConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in kinds:
                raise InvalidConfig(f"unknown synth parameter {key!r}")
            try:
                kwargs[key] = int(value) if kinds[key] in (int, "int") else float(value)
            except ValueError:
                raise InvalidConfig(f"synth parameter {key!r}: bad value {value!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, section: str = "synth") -> "SynthConfig":
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise InvalidConfig(f"cannot read {path}")
        return cls.from_mapping(parser[section] if parser.has_section(section) else {})


@dataclass(frozen=True)
class SynthRun:
    table: RecordTable
    tally: PipeTally
    config: SynthConfig


def weld_signature(distance, config: SynthConfig = SynthConfig()) -> dict:
    """Additive per-channel contributions at signed distance(s) from a weld.

    Negative distances are before the weld. Only ``Vh1``, ``Vh2``, ``Ahy``
    and ``Mhy`` are affected.
    """
    d = np.asarray(distance, dtype=float)
    w = config.half_width_m
    bump = np.exp(-d * d / (2 * w * w))
    bump = np.where(np.abs(d) <= SUPPORT * w, bump, 0.0)
    return {
        "Vh2": config.amp_vh2 * bump,
        "Vh1": config.vh1_amp_factor * config.amp_vh2 * bump,
        "Ahy": config.amp_ahy * np.sign(d) * bump,
        "Mhy": config.amp_mhy * bump,
    }


def _noise_levels(config):
    sd = {}
    for name in SCHEMA.names:
        family = SCHEMA[name].family
        sd[name] = {"Gh": config.noise_gh, "Ah": config.noise_ah,
                    "Mh": config.noise_mh, "Vh": config.noise_vh}.get(family, 0.0)
    sd["Vh1"] *= config.vh1_noise_factor
    return sd


def generate_run(config: SynthConfig = SynthConfig()) -> SynthRun:
    """Generate channels, odometer and tally; deterministic per ``config.seed``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    s = config.weld_spacing_m
    n_welds = int(np.floor(config.length_m / s + 0.5))
    welds = (np.arange(1, n_welds + 1) - 0.5) * s
    if config.weld_jitter_m > 0:
        welds = welds + rng.uniform(-config.weld_jitter_m, config.weld_jitter_m, n_welds)
    welds = welds[(welds >= 0) & (welds <= config.length_m)]
    tally = PipeTally(welds, config.length_m)

    n_moving = int(round(config.length_m / config.sample_spacing_m)) + 1
    od = np.concatenate([np.zeros(config.stationary_records),
                         np.arange(n_moving) * config.sample_spacing_m])
    n = od.size
    sd = _noise_levels(config)
    values = np.zeros((n, len(SCHEMA)))
    for j, name in enumerate(SCHEMA.names):
        if name != ODOMETER:
            values[:, j] = rng.normal(0.0, sd[name], n)
    values[:, SCHEMA.names.index(ODOMETER)] = od

    moving = np.arange(config.stationary_records, n)
    reach = SUPPORT * config.half_width_m
    for w in tally.positions:
        lo, hi = np.searchsorted(od[moving], [w - reach, w + reach], side="left")
        rows = moving[lo:hi]
        if rows.size == 0:
            continue
        for name, add in weld_signature(od[rows] - w, config).items():
            values[rows, SCHEMA.names.index(name)] += add

    lo, hi = SCHEMA.bounds
    values = np.clip(values, lo, hi)
    return SynthRun(RecordTable(SCHEMA.names, values, None, f"synth(seed={config.seed})"),
                    tally, config)
