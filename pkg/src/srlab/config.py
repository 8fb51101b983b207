"""
Scenario files: sectioned TOML with SI unit suffixes in the key names.

Frequencies are cyclic (``*_hz``) in the file and converted to angular
rates internally; ``kappa_per_s`` is already an angular rate. Unknown
sections or keys are rejected so typos never pass silently.

Example::

    [circuit]
    inductance_h = 1e-12
    frequency_hz = 6.834682610904e9
    d_m = 10e-6
    quality = 1000

    [ensemble]
    n1 = 2
    n2 = 1
    dg_tilde = 0.1
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import constants as C
from .chip import (
    CircuitSpec,
    LoopGeometry,
    TrapSpec,
    TwoEnsembleSplit,
    coupling_distribution,
    match_two_ensembles,
    sample_moments,
)
from .sse import SseConfig

__all__ = ["ConfigError", "Scenario", "SCHEMA", "load_scenario", "parse_override", "scenario_hash"]


class ConfigError(ValueError):
    """Invalid or incomplete scenario."""


_num = (int, float)
_list = (list,)

# section -> key -> (accepted types, default); a default of ... means required
SCHEMA: dict[str, dict[str, tuple]] = {
    "circuit": {
        "inductance_h": (_num, ...),
        "frequency_hz": (_num, C.RB87_HYPERFINE_HZ),
        "d_m": (_num, ...),
        "kappa_per_s": (_num, None),
        "quality": (_num, None),
    },
    "loop": {
        "shape": ((str,), "square"),
        "corners_m": (_list, None),
        "orientation": ((int,), 1),
    },
    "trap": {
        "frequency_hz": (_num + _list, 1e3),
        "center_m": (_list, None),
        "temperature_k": (_num, ...),
        "mass_kg": (_num, C.M_RB87),
    },
    "ensemble": {
        "n1": ((int,), None),
        "n2": ((int,), None),
        "dg_tilde": (_num, None),
        "auto": ((bool,), False),
        "n_atoms": ((int,), None),
        "n_samples": ((int,), 100_000),
    },
    "sse": {
        "d_tau": (_num, 1e-3),
        "tau_max": (_num, 5.0),
        "n_traj": ((int,), 1000),
        "record_grid": (_list, [0.0, 0.5, 1.0, 2.0, 5.0]),
        "bins": ((int,), 50),
        "write_trajectories": ((int,), 0),
    },
    "run": {
        "seed": ((int,), 0),
        "threads": ((int,), 1),
        "out": ((str,), "out"),
    },
    "field_map": {
        "x_min_m": (_num, None),
        "x_max_m": (_num, None),
        "nx": ((int,), 21),
        "z_min_m": (_num, None),
        "z_max_m": (_num, None),
        "nz": ((int,), 11),
        "y_m": (_num, None),
    },
    "coupling_dist": {
        "n_samples": ((int,), 100_000),
        "bins": ((int,), 100),
    },
    "regime": {
        "n_atoms": ((int,), ...),
        "g_typ_hz": (_num, ...),
        "threshold": (_num, 0.1),
    },
    "propagate": {
        "j": (_num, ...),
        "jp": (_num, None),
        "k": (_num, 0.0),
        "tau": (_num + _list, 1.0),
    },
    "inversion": {
        "tau_max": (_num, 5.0),
        "n_tau": ((int,), 101),
    },
    "sweep": {
        "dg_values": (_list, ...),
    },
}

# keys that do not change results and so stay out of the scenario hash
_NON_SEMANTIC = {("run", "out"), ("run", "threads")}


def _check_type(section: str, key: str, value, types):
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"[{section}] {key}: expected a number, got a boolean")
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"[{section}] {key}: expected {names}, got {type(value).__name__}")


def _validate(raw: dict) -> dict:
    out = {}
    for section, values in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            _check_type(section, key, value, SCHEMA[section][key][0])
        out[section] = dict(values)
    return out


def parse_override(text: str) -> tuple[str, str, object]:
    """Parse ``section.key=value`` (value in TOML syntax)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override '{text}' must look like section.key=value")
    lhs, rhs = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {rhs.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = rhs.strip()
    return section, key, value


@dataclass
class Scenario:
    """Validated scenario tables plus builders for the domain objects."""

    data: dict
    source: str | None = None

    def section(self, name: str, required: bool = True) -> dict:
        if name not in self.data and required and any(
            d is ... for _, d in SCHEMA[name].values()
        ):
            raise ConfigError(f"section [{name}] is required for this command")
        given = self.data.get(name, {})
        out = {}
        for key, (_, default) in SCHEMA[name].items():
            if key in given:
                out[key] = given[key]
            elif default is ...:
                raise ConfigError(f"[{name}] {key} is required")
            else:
                out[key] = copy.deepcopy(default)
        return out

    # building blocks --------------------------------------------------------

    def circuit(self) -> CircuitSpec:
        c = self.section("circuit")
        try:
            return CircuitSpec(
                inductance=float(c["inductance_h"]),
                omega=2 * math.pi * float(c["frequency_hz"]),
                d=float(c["d_m"]),
                kappa=None if c["kappa_per_s"] is None else float(c["kappa_per_s"]),
                quality=None if c["quality"] is None else float(c["quality"]),
            )
        except ValueError as exc:
            raise ConfigError(f"[circuit] {exc}") from exc

    def loop(self) -> LoopGeometry:
        lp = self.section("loop", required=False)
        try:
            if lp["corners_m"] is not None:
                return LoopGeometry(lp["corners_m"], lp["orientation"])
            if lp["shape"] != "square":
                raise ConfigError(f"[loop] unknown shape '{lp['shape']}'")
            return LoopGeometry.square(self.circuit().d, lp["orientation"])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[loop] {exc}") from exc

    def trap(self) -> TrapSpec:
        t = self.section("trap")
        f = t["frequency_hz"]
        f = [f] * 3 if isinstance(f, _num) else f
        d = self.circuit().d
        center = t["center_m"] if t["center_m"] is not None else [d / 2, d / 2, d]
        try:
            return TrapSpec(
                tuple(2 * math.pi * float(v) for v in f),
                tuple(float(v) for v in center),
                float(t["temperature_k"]),
                float(t["mass_kg"]),
            )
        except ValueError as exc:
            raise ConfigError(f"[trap] {exc}") from exc

    def split(self) -> TwoEnsembleSplit:
        e = self.section("ensemble")
        if e["auto"]:
            if e["n_atoms"] is None:
                raise ConfigError("[ensemble] auto mode needs n_atoms")
            hist = coupling_distribution(
                self.trap(), self.circuit(), self.loop(), e["n_samples"], seed=self.seed, bins=10
            )
            split = match_two_ensembles(sample_moments(hist.g_over_G), e["n_atoms"])
            if split.g_ref == 0:
                raise ConfigError("[ensemble] matched reference coupling is zero")
            return split
        missing = [k for k in ("n1", "n2", "dg_tilde") if e[k] is None]
        if missing:
            raise ConfigError(f"[ensemble] missing {', '.join(missing)} (or set auto = true)")
        if not -1 <= e["dg_tilde"] <= 1:
            raise ConfigError("[ensemble] dg_tilde must lie in [-1, 1]")
        try:
            return TwoEnsembleSplit.from_dg(e["n1"], e["n2"], float(e["dg_tilde"]))
        except ValueError as exc:
            raise ConfigError(f"[ensemble] {exc}") from exc

    def sse_config(self, split: TwoEnsembleSplit | None = None) -> SseConfig:
        s = self.section("sse", required=False)
        try:
            return SseConfig(
                split=self.split() if split is None else split,
                d_tau=float(s["d_tau"]),
                tau_max=float(s["tau_max"]),
                n_traj=s["n_traj"],
                seed=self.seed,
                record_grid=tuple(s["record_grid"]),
            )
        except ValueError as exc:
            raise ConfigError(f"[sse] {exc}") from exc

    @property
    def seed(self) -> int:
        seed = self.section("run", required=False)["seed"]
        if seed < 0 or seed >= 2**64:
            raise ConfigError("[run] seed must be an unsigned 64-bit integer")
        return seed

    @property
    def threads(self) -> int:
        n = self.section("run", required=False)["threads"]
        if n < 1:
            raise ConfigError("[run] threads must be >= 1")
        return n

    @property
    def out(self) -> Path:
        return Path(self.section("run", required=False)["out"])

    def semantic(self) -> dict:
        """Tables with defaults filled in, without output-only keys."""
        full = {}
        for name in SCHEMA:
            if name in self.data:
                tab = self.section(name, required=False)
                full[name] = {k: v for k, v in tab.items() if (name, k) not in _NON_SEMANTIC}
        if "run" not in full:
            full["run"] = {"seed": self.seed}
        return full


def scenario_hash(scenario: Scenario) -> str:
    blob = json.dumps(scenario.semantic(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_scenario(path=None, overrides=(), text: str | None = None) -> Scenario:
    """Read a scenario file (or TOML ``text``) and apply ``section.key=value`` overrides."""
    raw: dict = {}
    source = None
    if text is not None:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
    elif path is not None:
        source = str(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    for item in overrides:
        section, key, value = parse_override(item) if isinstance(item, str) else item
        raw.setdefault(section, {})[key] = value
    return Scenario(_validate(raw), source)
