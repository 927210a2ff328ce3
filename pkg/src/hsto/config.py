"""TOML run configuration: strict keys, documented defaults, early
validation.  Unknown keys are hard errors so typos never pass silently."""

from __future__ import annotations

import tomli

from .grid import GridSpec
from .operators import PhysParams
from .stepping import ForcingSpec, RunConfig


class ConfigError(ValueError):
    """Parse failure, unknown key, or invalid value."""


# section -> key -> (type, default); REQUIRED marks keys without a default
REQUIRED = object()

SCHEMA = {
    "grid": {
        "l1": (float, REQUIRED), "l2": (float, REQUIRED),
        "h": (float, REQUIRED), "n1": (int, REQUIRED),
        "n2": (int, REQUIRED), "nz": (int, REQUIRED),
    },
    "physics": {
        "mu_v": (float, 1e-2), "nu_v": (float, 1e-2),
        "mu_t": (float, 1e-2), "nu_t": (float, 1e-2),
        "mu_s": (float, 1e-2), "nu_s": (float, 1e-2),
        "f": (float, 0.0), "g": (float, 9.81), "rho0": (float, 1000.0),
        "beta_t": (float, 2e-4), "beta_s": (float, 8e-4),
        "t_r": (float, 0.0), "s_r": (float, 0.0),
    },
    "noise": {
        "kind": (str, "additive"), "k": (int, 8),
        "amplitude": (object, 0.0),
    },
    "forcing": {
        "kind": (str, "none"), "f_u": (float, 0.0), "f_v": (float, 0.0),
        "f_t": (float, 0.0), "f_s": (float, 0.0),
    },
    "run": {
        "dt": (float, 1e-2), "steps": (int, 100),
        "mode": (str, "direct"), "seed": (int, REQUIRED),
        "advection": (bool, True), "projection": (bool, True),
        "ic": (str, "zero"), "ic_amplitude": (float, 1.0),
        "blowup_ceiling": (float, 1e12), "pressure_tol": (float, 1e-12),
    },
    "output": {
        "cadence": (int, 1), "snapshot_cadence": (int, 0),
    },
}


def _coerce(section, key, typ, value):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"invalid-value: [{section}].{key} must be a "
                              f"number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"invalid-value: [{section}].{key} must be an "
                              f"integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"invalid-value: [{section}].{key} must be a "
                              f"boolean, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"invalid-value: [{section}].{key} must be a "
                              f"string, got {value!r}")
        return value
    return value  # 'object': validated downstream (noise amplitude)


def parse_config_text(text) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"parse-error: {e}") from e
    for section in data:
        if section not in SCHEMA:
            raise ConfigError(f"unknown-key: section [{section}]")
        if not isinstance(data[section], dict):
            raise ConfigError(f"invalid-value: [{section}] must be a table")
        for key in data[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown-key: [{section}].{key}")
    values = {}
    for section, keys in SCHEMA.items():
        got = data.get(section, {})
        values[section] = {}
        for key, (typ, default) in keys.items():
            if key in got:
                values[section][key] = _coerce(section, key, typ, got[key])
            elif default is REQUIRED:
                raise ConfigError(f"invalid-value: [{section}].{key} is "
                                  f"required")
            else:
                values[section][key] = default

    amp = values["noise"]["amplitude"]
    if isinstance(amp, list):
        if not all(isinstance(a, (int, float)) and not isinstance(a, bool)
                   for a in amp):
            raise ConfigError("invalid-value: [noise].amplitude entries must "
                              "be numbers")
        if len(amp) != values["noise"]["k"]:
            raise ConfigError("invalid-value: [noise].amplitude list length "
                              "must equal [noise].k")
        amp = [float(a) for a in amp]
    elif isinstance(amp, (int, float)) and not isinstance(amp, bool):
        amp = float(amp)
    else:
        raise ConfigError("invalid-value: [noise].amplitude must be a number "
                          "or a list of numbers")
    if values["noise"]["kind"] not in ("additive", "linear_multiplicative",
                                       "lipschitz_functional"):
        raise ConfigError("invalid-value: [noise].kind must be additive, "
                          "linear_multiplicative or lipschitz_functional")

    cfg = RunConfig(
        grid=GridSpec(values["grid"]["l1"], values["grid"]["l2"],
                      values["grid"]["h"], values["grid"]["n1"],
                      values["grid"]["n2"], values["grid"]["nz"]),
        physics=PhysParams(**values["physics"]),
        noise_kind=values["noise"]["kind"],
        noise_k=values["noise"]["k"],
        noise_amplitude=amp,
        forcing=ForcingSpec(**values["forcing"]),
        dt=values["run"]["dt"], steps=values["run"]["steps"],
        mode=values["run"]["mode"], seed=values["run"]["seed"],
        cadence=values["output"]["cadence"],
        snapshot_cadence=values["output"]["snapshot_cadence"],
        advection=values["run"]["advection"],
        projection=values["run"]["projection"],
        ic=values["run"]["ic"], ic_amplitude=values["run"]["ic_amplitude"],
        blowup_ceiling=values["run"]["blowup_ceiling"],
        pressure_tol=values["run"]["pressure_tol"],
    )
    try:
        cfg.validate()
    except Exception as e:
        raise ConfigError(f"invalid-value: {e}") from e
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"parse-error: cannot read {path}: {e}") from e
    return parse_config_text(text)
