"""JSON run configurations: schema validation, defaults and resolution into model objects."""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError, InputError
from .fock import FockIndex, LambDickeSet, ModeSpec, SQRT3, lamb_dicke_from_com, lamb_dicke_from_trap
from .rate import LaserConfig
from .spectrum import StateDistribution

# Defaults reproduce the Lamb-Dicke sideband-cooling run (COM cooled, stretch nearly frozen).
DEFAULTS = {
    "nu_units": True,
    "modes": {"n_com_max": 18, "n_rel_max": 14, "freq_com": 1.0, "freq_rel": SQRT3},
    "lamb_dicke": {"eta_com": 0.1, "cos_theta": 1.0},
    "laser": {"omega_1": 0.034, "omega_2": 0.0, "detuning": -1.0, "gamma": 0.2, "pattern": "dipole-pi"},
    "initial": {"kind": "flat", "cutoff": 15.0},
    "solver": "rate",
    "rate": {"t_final": 600.0, "n_out": 61, "single_ion_control": False},
    "qmc": {"n_traj": 200, "t_final": 600.0, "n_out": 31, "master_seed": 20240601},
    "spectrum": {"delta_min": -6.0, "delta_max": 6.0, "bin_width": 0.1},
    "dos": {"e_max": 20.0, "bin_width": 1.0 / 3.0},
    "diagnose": {"threshold": None, "target": 0.5, "gammas": [], "omega_over_gamma": 0.17},
    "outputs": {"dir": ".", "snapshot_times": [], "jump_log": False},
}

_SCHEMA = None


def schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = json.loads(resources.files("ioncool").joinpath("schema.json").read_text())
    return _SCHEMA


def shipped_configs() -> list[str]:
    d = resources.files("ioncool").joinpath("configs")
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))


def resolve_path(name: str) -> tuple[str, str]:
    """Return (label, text) for a config file path or a shipped config name such as ``fig2``."""
    p = Path(name)
    if p.is_file():
        return str(p), p.read_text()
    stem = name[:-5] if name.endswith(".json") else name
    if "/" not in stem and stem in shipped_configs():
        return f"<shipped {stem}>", resources.files("ioncool").joinpath("configs", stem + ".json").read_text()
    raise ConfigError(f"config file not found: {name}", path=name)


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of a JSON field path inside ``text``."""
    pos = 0
    for part in path:
        if isinstance(part, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1 if pos else None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("initial",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse(text: str, label: str = "<config>") -> dict:
    """Validate ``text`` against the schema and return the merged dictionary (defaults filled)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{label}:{exc.lineno}: invalid JSON: {exc.msg}", path="", line=exc.lineno) from exc
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        line = _line_of(text, list(err.absolute_path))
        prefix = f"{label}:{line}" if line else label
        raise ConfigError(f"{prefix}: {where}: {err.message}", path=where, line=line)
    return _merge(DEFAULTS, raw)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A fully resolved configuration; ``data`` is the merged dictionary it came from."""

    data: dict
    modes: ModeSpec
    lds: LambDickeSet
    laser: LaserConfig
    initial: StateDistribution
    label: str = "<config>"

    @property
    def solver(self) -> str:
        return self.data["solver"]

    def section(self, name: str) -> dict:
        return self.data[name]

    def distribution(self, spec: dict, modes: ModeSpec | None = None) -> StateDistribution:
        return _distribution(spec, modes or self.modes, "initial")

    def with_seed(self, seed: int) -> "RunConfig":
        data = copy.deepcopy(self.data)
        data["qmc"]["master_seed"] = int(seed)
        return build(data, self.label)

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))


def _distribution(spec: dict, modes: ModeSpec, where: str) -> StateDistribution:
    kind = spec["kind"]
    try:
        if kind == "flat":
            return StateDistribution.flat(modes, spec["cutoff"])
        if kind == "thermal":
            if "energy_per_mode" in spec:
                return StateDistribution.thermal(modes, energy_per_mode=spec["energy_per_mode"])
            return StateDistribution.thermal(modes, nbar=spec["nbar"])
        return StateDistribution.delta(modes, FockIndex(spec["n_com"], spec["n_rel"]))
    except Exception as exc:  # noqa: BLE001 - reported with the field path
        raise ConfigError(f"{where}: {exc}", path=where) from exc


def build(data: dict, label: str = "<config>") -> RunConfig:
    try:
        m = data["modes"]
        modes = ModeSpec(m["n_com_max"], m["n_rel_max"], m["freq_com"], m["freq_rel"])
        ld = data["lamb_dicke"]
        ratio = modes.freq_rel / modes.freq_com
        cos = ld.get("cos_theta", 1.0)
        if "recoil_freq" in ld:
            lds = lamb_dicke_from_trap(ld["recoil_freq"], modes.freq_com, cos, freq_rel=ratio)
        else:
            lds = lamb_dicke_from_com(ld["eta_com"], cos, freq_rel=ratio)
        la = data["laser"]
        laser = LaserConfig(la["omega_1"], la["detuning"], la["gamma"], la["omega_2"], cos, la["pattern"])
    except InputError as exc:
        raise ConfigError(f"{label}: {exc}") from exc
    initial = _distribution(data["initial"], modes, "initial")
    return RunConfig(data, modes, lds, laser, initial, label)


def load(name: str) -> RunConfig:
    label, text = resolve_path(name)
    return build(parse(text, label), label)


def loads(text: str, label: str = "<config>") -> RunConfig:
    return build(parse(text, label), label)
