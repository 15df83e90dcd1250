"""Run configuration: TOML (or JSON) files validated into a RunConfig."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import tomli

from .errors import ConfigError

FORMATS = ("json", "csv", "md")
_TOP_KEYS = {"seed", "battery", "potentials", "grid", "c_scan", "params", "output"}


@dataclass
class RunConfig:
    seed: int
    battery: list
    potentials: list = field(default_factory=lambda: [{"family": "gaussian"}])
    domain: list = field(default_factory=lambda: [[-8.0, 8.0]])
    resolution: int = 1024
    c_scan: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    output_path: str = "til-out/manifest"
    output_format: str = "json"

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """sha256 of the canonical JSON form; output location does not enter the hash."""
        d = self.to_dict()
        d.pop("output_path")
        d.pop("output_format")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **kw) -> "RunConfig":
        d = copy.deepcopy(self.to_dict())
        d.update(kw)
        return RunConfig(**d)


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def parse_config(raw: dict, registered=None) -> RunConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in raw:
        raise ConfigError("seed is mandatory")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    battery = raw.get("battery", "default")
    if isinstance(battery, str):
        battery = [b.strip() for b in battery.split(",") if b.strip()]
    if not isinstance(battery, list):
        raise ConfigError("battery must be a list of statement ids")
    pots = raw.get("potentials", [{"family": "gaussian"}])
    if not isinstance(pots, list) or not all(isinstance(p, dict) for p in pots) or not pots:
        raise ConfigError("potentials must be a non-empty list of tables")
    grid = raw.get("grid", {})
    out = raw.get("output", {})
    fmt = out.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError(f"output format must be one of {FORMATS}")
    cfg = RunConfig(seed=seed, battery=battery, potentials=pots,
                    domain=grid.get("domain", [[-8.0, 8.0]]), resolution=int(grid.get("resolution", 1024)),
                    c_scan=[float(c) for c in raw.get("c_scan", [])], params=dict(raw.get("params", {})),
                    output_path=str(out.get("path", "til-out/manifest")), output_format=fmt)
    if registered is not None:
        validate_battery(cfg.battery, registered)
    return cfg


def validate_battery(battery, registered):
    bad = [b for b in battery if b not in registered and b != "default"]
    if bad:
        raise ConfigError(f"unknown statement ids {bad}; registered: {sorted(registered)}")


def load_config(path, registered=None) -> RunConfig:
    return parse_config(read_config_file(path), registered)
