"""Experiment configuration.

A config is an INI file (sections, ``key = value``) read with
:mod:`configparser`; CLI flags override individual keys. Every field has a
default, so an empty file is a valid config. Fields left at ``None`` are
resolved from ``n`` by :meth:`Config.resolved`.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction

from .complexity import SpaceSchedule

# key -> section, in file order
SECTIONS = {
    "variant": "protocol", "n": "protocol", "epsilon": "protocol", "c": "protocol", "flips": "protocol",
    "y_max": "protocol",
    "base_space": "schedule", "ratio": "schedule", "level_min": "schedule", "level_max": "schedule",
    "cap": "schedule",
    "trials": "experiment", "master_seed": "experiment", "workers": "experiment",
    "extractor": "experiment", "extractor_d": "experiment", "extractor_m": "experiment",
    "extractor_epsilon": "experiment", "certify_upto": "experiment",
    "max_length": "budget", "step_cap": "budget", "wall_clock": "budget", "max_steps": "budget",
    "out_dir": "paths",
}


@dataclass(frozen=True)
class Config:
    variant: str = "B"
    n: int = 4
    epsilon: str = "1/5"
    c: int = 2  # variant B only
    flips: int = 0  # y = x with this many distinct bits flipped
    y_max: int = 256
    base_space: int | None = None  # defaults to n
    ratio: str = "2"
    level_min: int = -2
    level_max: int | None = None  # defaults to max(8, n)
    cap: int | None = None
    trials: int = 200
    master_seed: int = 0
    workers: int = 1
    extractor: str | None = None  # table file; built from the seed when absent
    extractor_d: int = 4
    extractor_m: int | None = None  # defaults to n
    extractor_epsilon: str | None = None  # defaults to epsilon
    certify_upto: int | None = None  # defaults to min(n, m)
    max_length: int | None = None  # L_max; defaults to n + 4
    step_cap: int | None = None  # None = configuration bound
    wall_clock: float | None = None
    max_steps: int | None = None
    out_dir: str = os.environ.get("SPACEKEY_OUT", "spacekey-out")

    def __post_init__(self):
        if self.variant not in ("A", "B"):
            raise ValueError(f"variant must be A or B, got {self.variant!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < Fraction(self.epsilon) < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.trials < 0 or self.workers < 1:
            raise ValueError("trials must be >= 0 and workers >= 1")
        if not 0 <= self.flips <= self.n:
            raise ValueError("flips must lie in [0, n]")

    @property
    def eps(self) -> Fraction:
        return Fraction(self.epsilon)

    def resolved(self) -> "Config":
        m = self.extractor_m if self.extractor_m is not None else self.n
        return replace(
            self,
            base_space=self.base_space if self.base_space is not None else self.n,
            level_max=self.level_max if self.level_max is not None else max(8, self.n),
            extractor_m=m,
            extractor_epsilon=self.extractor_epsilon or self.epsilon,
            certify_upto=self.certify_upto if self.certify_upto is not None else min(self.n, m),
        )

    def schedule(self) -> SpaceSchedule:
        r = self.resolved()
        return SpaceSchedule(r.base_space, Fraction(r.ratio), r.level_min, r.level_max, r.cap)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for key, val in asdict(self).items():
            section = SECTIONS[key]
            if not parser.has_section(section):
                parser.add_section(section)
            if val is not None:
                parser.set(section, key, str(val))
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser.items(section))
            lines.append("")
        return "\n".join(lines)


def _coerce(name: str, raw):
    if raw is None or raw == "" or raw == "None":
        return None
    kind = {f.name: f.type for f in fields(Config)}[name]
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return str(raw)


def from_mapping(values: dict, base: Config | None = None) -> Config:
    unknown = set(values) - set(SECTIONS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return replace(base or Config(), **{k: _coerce(k, v) for k, v in values.items()})


def load_config(path=None, overrides: dict | None = None) -> Config:
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, val in parser.items(section):
                if key in SECTIONS and SECTIONS[key] != section:
                    raise ValueError(f"key {key!r} belongs in [{SECTIONS[key]}], not [{section}]")
                values[key] = val
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return from_mapping(values)
