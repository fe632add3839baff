"""Scenario files (TOML or JSON) and preset resolution.

Schema (TOML shown; JSON uses the same nesting)::

    [scheme]
    preset = "na2"            # optional base; otherwise all keys are required
    u = 538.3                 # m/s
    gamma02 = 2.38            # MHz
    dipole_ratio_sq = 1.0
    alpha01 = 1.0
    [scheme.transitions.01]
    wavelength = 661.0        # nm
    gamma = 20.69             # MHz

    [fields]
    preset = "fig1b"          # optional base
    [fields.E3minus]
    rabi = 25200.0            # MHz
    detuning = 73200.0        # MHz
    direction = -1
    inv_wavelength = 0.0019455  # 1/nm

    [run]
    omega1_span = "2GHz"
    points = 500

``scheme`` and ``fields`` may also be given as bare preset names.
"""

from __future__ import annotations

import json
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .quantum_scheme import (FIELD_PRESETS, FIELD_ROLES, SCHEME_PRESETS, TRANSITION_LABELS,
                             FieldSet, SchemeConfig, SchemeError, Transition)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEME_KEYS = {"preset", "transitions", "u", "gamma02", "dipole_ratio_sq", "alpha01"}
TRANSITION_KEYS = {"wavelength", "gamma"}
FIELD_KEYS = {"rabi", "detuning", "direction", "inv_wavelength"}
RUN_KEYS = {"omega1_span", "points", "velocity_nodes", "quadrature", "zmax", "nz",
            "compare_off", "no_control", "omega1", "co_propagating"}
TOP_KEYS = {"scheme", "fields", "run"}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


_FREQ = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([kMG]?Hz)?\s*$")
_UNIT = {None: 1.0, "kHz": 1e-3, "MHz": 1.0, "GHz": 1e3, "Hz": 1e-6}


def parse_frequency(text, key: str = "frequency") -> float:
    """'2GHz', '500 MHz' or a bare number (MHz) -> MHz."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    m = _FREQ.match(str(text))
    if not m:
        raise ConfigError(key, f"cannot parse frequency {text!r}")
    return float(m.group(1)) * _UNIT[m.group(2)]


@dataclass
class Scenario:
    scheme: SchemeConfig
    fields: FieldSet
    run: Dict[str, Any] = field(default_factory=dict)
    scheme_name: Optional[str] = None
    fields_name: Optional[str] = None

    def describe(self) -> dict:
        return {"scheme_preset": self.scheme_name, "fields_preset": self.fields_name,
                "scheme": self.scheme.to_dict(), "fields": self.fields.to_dict(),
                "run": dict(sorted(self.run.items()))}


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _check_keys(table, allowed, prefix: str):
    if not isinstance(table, dict):
        raise ConfigError(prefix, "expected a table")
    for k in table:
        if k not in allowed:
            raise ConfigError(f"{prefix}.{k}" if prefix else k, "unknown key")


def _resolve_scheme(entry) -> tuple:
    if entry is None:
        entry = "na2"
    if isinstance(entry, str):
        entry = {"preset": entry}
    _check_keys(entry, SCHEME_KEYS, "scheme")
    name = entry.get("preset")
    if name is not None:
        if name not in SCHEME_PRESETS:
            raise ConfigError("scheme.preset", f"unknown preset {name!r}")
        base = SCHEME_PRESETS[name]()
        transitions = dict(base.transitions)
        values = {k: getattr(base, k) for k in ("u", "gamma02", "dipole_ratio_sq", "alpha01")}
    else:
        base, transitions, values = None, {}, {}

    tr = entry.get("transitions", {})
    _check_keys(tr, set(TRANSITION_LABELS), "scheme.transitions")
    for label, t in tr.items():
        key = f"scheme.transitions.{label}"
        _check_keys(t, TRANSITION_KEYS, key)
        old = transitions.get(label)
        wl = _number(t["wavelength"], f"{key}.wavelength") if "wavelength" in t else getattr(old, "wavelength", None)
        gm = _number(t["gamma"], f"{key}.gamma") if "gamma" in t else getattr(old, "gamma", None)
        if wl is None or gm is None:
            raise ConfigError(key, "needs both wavelength and gamma")
        try:
            transitions[label] = Transition(label, wl, gm)
        except SchemeError as exc:
            raise ConfigError(key, str(exc)) from None
    for k in ("u", "gamma02", "dipole_ratio_sq", "alpha01"):
        if k in entry:
            values[k] = _number(entry[k], f"scheme.{k}")
    values.setdefault("dipole_ratio_sq", 1.0)
    values.setdefault("alpha01", 1.0)
    for k in ("u", "gamma02"):
        if k not in values:
            raise ConfigError(f"scheme.{k}", "required without a preset")
    missing = [lb for lb in TRANSITION_LABELS if lb not in transitions]
    if missing:
        raise ConfigError(f"scheme.transitions.{missing[0]}", "required without a preset")
    try:
        return SchemeConfig(transitions=transitions, **values), name
    except SchemeError as exc:
        raise ConfigError("scheme", str(exc)) from None


def _resolve_fields(entry, scheme: SchemeConfig) -> tuple:
    if entry is None:
        raise ConfigError("fields", "required (table or preset name)")
    if isinstance(entry, str):
        entry = {"preset": entry}
    _check_keys(entry, {"preset", *FIELD_ROLES}, "fields")
    name = entry.get("preset")
    if name is not None:
        if name not in FIELD_PRESETS:
            raise ConfigError("fields.preset", f"unknown preset {name!r}")
        base = FIELD_PRESETS[name](scheme)
    else:
        base = FieldSet.from_scheme(scheme, g12=0.0, g23p=0.0, g23m=0.0,
                                    omega2=0.0, omega3p=0.0, omega3m=0.0)
    roles = {r: getattr(base, r) for r in FIELD_ROLES}
    for role in FIELD_ROLES:
        if role not in entry:
            continue
        key = f"fields.{role}"
        t = entry[role]
        _check_keys(t, FIELD_KEYS, key)
        changes = {}
        for k, val in t.items():
            if k == "direction":
                if val not in (1, -1) or isinstance(val, bool):
                    raise ConfigError(f"{key}.direction", "must be +1 or -1")
                changes[k] = int(val)
            elif k == "detuning" and val is None:
                changes[k] = None
            else:
                changes[k] = _number(val, f"{key}.{k}")
        if role == "E4" and set(changes) - {"rabi"}:
            raise ConfigError(key, "generated wave is derived from the other fields")
        try:
            roles[role] = replace(roles[role], **changes)
        except SchemeError as exc:
            raise ConfigError(key, str(exc)) from None
    roles["E4"] = None
    return FieldSet(**roles), name


def build_scenario(data: dict) -> Scenario:
    _check_keys(data, TOP_KEYS, "")
    scheme, sname = _resolve_scheme(data.get("scheme"))
    fields, fname = _resolve_fields(data.get("fields"), scheme)
    run = data.get("run", {})
    _check_keys(run, RUN_KEYS, "run")
    return Scenario(scheme, fields, dict(run), sname, fname)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("", f"{path}: parse error: {exc}") from None
    return build_scenario(data)


def preset_scenario(fields_preset: str, scheme_preset: str = "na2") -> Scenario:
    return build_scenario({"scheme": scheme_preset, "fields": fields_preset})
