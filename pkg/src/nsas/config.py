"""Flat key = value experiment configuration.

One assignment per line, '#' starts a comment, no sections or nesting; the
format stays diffable and hashes cleanly.  Unknown keys are rejected so a
typo cannot silently fall back to a default.  The string "none" resets an
optional key to its unset state.

Verdict thresholds (slope targets, tolerances, bound factors) are config
keys like everything else; the shipped experiment files carry the reference
values and a study can tighten or relax them without touching code.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError

EXPERIMENTS = ("theorem1", "theorem2", "theorem3", "linear_lemma21",
               "profile_only", "symbol_sweep")

# experiments pinned to a torus dimension
_EXPERIMENT_ELL = {"theorem1": 1, "theorem2": 2, "theorem3": 3, "linear_lemma21": 1}


def _parse_bool(raw):
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_ints(raw):
    return tuple(int(x.strip()) for x in raw.split(",") if x.strip())


@dataclass
class ExperimentConfig:
    experiment: str = None
    seed: int = 2025
    out_dir: str = "out"

    # domain
    ell: int = 1
    resolution: tuple = (8, 128, 128)
    periodic_length: float = 6.283185307179586
    open_length: float = 628.3185307179587

    # fluid
    nu1: float = 1.0
    nu2: float = 1.0
    pressure_law: str = "quadratic"
    kappa: float = 2.0

    # time stepping
    scheme: str = "etdrk2"
    dt: float = None
    cfl: float = 0.5
    dealias: bool = True
    t_end: float = None
    sample_dt: float = 1.0

    # initial data
    epsilon: float = 1e-2
    band: float = None
    periodic_band: int = None
    envelope_width: float = 3.0
    x_fraction: float = 1.0
    packets: int = 4

    # analysis
    fit_lo: float = None
    fit_hi: float = None
    r0_sq: float = None
    k_max: int = 16
    sweep_min: float = 1e-4
    sweep_max: float = 1e4
    sweep_points: int = 400

    # verdict thresholds
    slope_l2_target: float = -0.5
    slope_l2_tol: float = 0.15
    slope_grad_target: float = -1.0
    slope_grad_tol: float = 0.2
    slope_diff_target: float = None
    slope_diff_tol: float = 0.15
    slope_diff_max: float = None
    slope_k_margin: float = 0.15
    rate_fraction: float = 0.9
    energy_factor: float = 10.0
    m0_factor: float = 10.0
    m2_factor: float = 10.0
    mean_drift_max: float = 1e-12
    asymptote_tol: float = 1e-3

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, "
                              f"got {self.experiment!r}")
        pinned = _EXPERIMENT_ELL.get(self.experiment)
        if pinned is not None and self.ell != pinned:
            raise ConfigError(f"{self.experiment} requires ell = {pinned}, "
                              f"got {self.ell}")
        if self.experiment == "profile_only" and self.ell not in (1, 2):
            raise ConfigError("profile_only requires ell = 1 or 2")
        if self.experiment == "symbol_sweep":
            return self
        want = 3 - self.ell if self.experiment == "profile_only" else 3
        if len(self.resolution) != want:
            raise ConfigError(f"{self.experiment} needs {want} resolution "
                              f"entries, got {len(self.resolution)}")
        if self.t_end is None or not self.t_end > 0:
            raise ConfigError("t_end must be set and positive")
        if not self.sample_dt > 0:
            raise ConfigError("sample_dt must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.scheme not in ("etdrk2", "etd2"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.pressure_law not in ("quadratic", "adiabatic"):
            raise ConfigError(f"unknown pressure law {self.pressure_law!r}")
        if (self.fit_lo is None) != (self.fit_hi is None):
            raise ConfigError("fit_lo and fit_hi must be set together")
        return self

    def hash(self):
        """sha256 over the resolved numerical content (out_dir excluded)."""
        parts = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out_dir":
                continue
            parts.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()


_OPTIONAL_FLOATS = ("dt", "t_end", "band", "fit_lo", "fit_hi", "r0_sq",
                    "slope_diff_target", "slope_diff_max")
_OPTIONAL_INTS = ("periodic_band",)


def _converter(name, default):
    if name == "resolution":
        return _parse_ints
    if name in _OPTIONAL_FLOATS:
        return float
    if name in _OPTIONAL_INTS:
        return int
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def parse_config(text):
    """Parse config text into an ExperimentConfig (validated)."""
    known = {f.name: f.default for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw_line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if raw.lower() == "none":
            values[key] = None
            continue
        try:
            values[key] = _converter(key, known[key])(raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**values).validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
