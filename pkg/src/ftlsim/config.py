"""Simulation configuration: defaults, key=value config files, size suffixes."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .flash import Geometry, Latencies


class ConfigError(Exception):
    pass


_SUFFIX = {"k": 1024, "m": 1024**2, "g": 1024**3, "t": 1024**4}


def parse_size(text: str) -> int:
    """Parse a byte count like '8M', '1G', '4096'."""
    s = str(text).strip().lower()
    if s and s[-1] in _SUFFIX:
        return int(float(s[:-1]) * _SUFFIX[s[-1]])
    return int(s)


@dataclass
class Config:
    # geometry (defaults model a 2 TB, 16-channel drive with 4 KB pages)
    channels: int = 16
    blocks_per_channel: int = 131072
    pages_per_block: int = 256
    page_size: int = 4096
    oob_size: int = 128
    # timing
    read_us: float = 20.0
    write_us: float = 200.0
    erase_us: float = 1500.0
    # translation
    gamma: int = 0
    op_ratio: float = 0.20  # overprovisioning fraction of physical capacity
    dram_bytes: int = 1024**3
    dram_policy: str = "mapping-first"  # or "capped" (mapping <= 80% of DRAM)
    buffer_bytes: int = 8 * 1024**2
    # policies
    compaction_interval: int = 1_000_000  # host writes between compactions
    snapshot_interval: int = 1_000_000  # host writes between snapshots
    snapshot_on_gc: bool = True
    gc_low: float = 0.15  # trigger GC below this free-block fraction
    gc_high: float = 0.25  # collect until free fraction reaches this
    wear_threshold: int = 0  # max-min erase count; 0 disables wear leveling

    _INT_FIELDS = {
        "channels",
        "blocks_per_channel",
        "pages_per_block",
        "gamma",
        "compaction_interval",
        "snapshot_interval",
        "wear_threshold",
    }
    _SIZE_FIELDS = {"page_size", "oob_size", "dram_bytes", "buffer_bytes"}
    _FLOAT_FIELDS = {"read_us", "write_us", "erase_us", "op_ratio", "gc_low", "gc_high"}
    _BOOL_FIELDS = {"snapshot_on_gc"}

    @property
    def total_pages(self) -> int:
        return self.channels * self.blocks_per_channel * self.pages_per_block

    @property
    def logical_pages(self) -> int:
        return int(self.total_pages * (1.0 - self.op_ratio))

    def geometry(self) -> Geometry:
        return Geometry(
            self.channels,
            self.blocks_per_channel,
            self.pages_per_block,
            self.page_size,
            self.oob_size,
        )

    def latencies(self) -> Latencies:
        return Latencies(self.read_us, self.write_us, self.erase_us)

    def validate(self) -> "Config":
        try:
            self.geometry().validate(self.gamma)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if not 0.0 <= self.op_ratio < 0.9:
            raise ConfigError("op_ratio must be in [0, 0.9)")
        if self.buffer_bytes < self.pages_per_block * self.page_size:
            raise ConfigError("buffer_bytes smaller than one flash block")
        if not 0.0 < self.gc_low < self.gc_high <= 1.0:
            raise ConfigError("need 0 < gc_low < gc_high <= 1")
        if self.dram_policy not in ("mapping-first", "capped"):
            raise ConfigError(f"unknown dram_policy {self.dram_policy!r}")
        if min(self.read_us, self.write_us, self.erase_us) < 0:
            raise ConfigError("latencies must be >= 0")
        return self

    def with_overrides(self, overrides: dict) -> "Config":
        return replace(self, **_coerce(overrides)).validate()


def _coerce(raw: dict) -> dict:
    known = {f.name for f in fields(Config)}
    out = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in Config._SIZE_FIELDS:
            out[key] = parse_size(value)
        elif key in Config._INT_FIELDS:
            out[key] = int(value)
        elif key in Config._FLOAT_FIELDS:
            out[key] = float(value)
        elif key in Config._BOOL_FIELDS:
            out[key] = str(value).strip().lower() in ("1", "true", "yes", "on")
        else:
            out[key] = str(value)
    return out


def load_config(path: str) -> dict:
    """Parse a flat key=value file (# comments, blank lines allowed)."""
    raw = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                raw[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return raw


def build_config(path=None, overrides=None) -> Config:
    conf = Config()
    merged = load_config(path) if path else {}
    if overrides:
        merged.update(overrides)
    return conf.with_overrides(merged) if merged else conf.validate()
