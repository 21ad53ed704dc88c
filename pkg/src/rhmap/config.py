"""Configuration dataclasses and the flat key=value config file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Raised for invalid configuration values or unknown config keys."""


@dataclass
class MapConfig:
    cube_size: float = 0.1
    mask_bits: int = 3
    table_size: int = 1 << 20
    hash_prime_x: int = 73856093
    hash_prime_y: int = 19349663
    hash_prime_z: int = 83492791
    log_odds_hit: float = 0.85
    log_odds_clamp_lo: float = -2.0
    log_odds_clamp_hi: float = 3.5
    occupied_threshold: float = 0.0

    @property
    def mask(self) -> int:
        return (1 << self.mask_bits) - 1

    @property
    def region_size(self) -> float:
        return (self.mask + 1) * self.cube_size

    def validate(self):
        if not (self.cube_size > 0 and math.isfinite(self.cube_size)):
            raise ConfigError(f"cube_size must be positive, got {self.cube_size}")
        if self.mask_bits < 1:
            raise ConfigError(f"mask_bits must be >= 1, got {self.mask_bits}")
        if self.table_size <= 0:
            raise ConfigError(f"table_size must be positive, got {self.table_size}")
        if self.log_odds_clamp_lo >= self.log_odds_clamp_hi:
            raise ConfigError("log_odds clamp interval is empty")
        return self


@dataclass
class FrontendConfig:
    delta1: float = 0.2
    delta2: float = 0.2
    r1: float = 1.0
    r2: float = 1.0
    r_gro: float = 1.25            # cube units
    max_search: int = 10
    image_rows: int = 64
    image_cols: int = 1080
    fov_down_deg: float = -24.8
    fov_up_deg: float = 2.0
    r_max: float = 80.0
    signed_jump: bool = False      # True: use the signed range difference for sup/inf
    bootstrap_margin: float = 0.3  # provisional ground reference above column min z
    eps_div: float = 1e-6
    min_ground_normal_z: float = 0.8  # reject ground fits steeper than ~37 degrees
    min_flag_points: int = 6       # scan points a column needs before it can flag

    @property
    def fov(self) -> tuple[float, float]:
        return (math.radians(self.fov_down_deg), math.radians(self.fov_up_deg))

    def validate(self):
        for name in ("delta1", "delta2", "r1", "r2", "r_gro", "r_max"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.image_rows < 1 or self.image_cols < 1:
            raise ConfigError("range image must have at least one row and column")
        if self.fov_down_deg >= self.fov_up_deg:
            raise ConfigError("vertical FOV interval is empty")
        return self


@dataclass
class BackendConfig:
    dist_keyframe: float = 5.0
    time_keyframe: float = 10.0
    info_delta: float = 10.0       # percentage points
    dist_away: float = 20.0
    queue_capacity: int = 50
    max_per_step: int = 1

    def validate(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ConfigError(f"{f.name} must be positive")
        return self


@dataclass
class PipelineConfig:
    map: MapConfig = field(default_factory=MapConfig)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    backend_enabled: bool = True
    seed: int = 0
    scans_dir: str = ""
    poses_file: str = ""
    labels_dir: str = ""
    out_map: str = ""
    report: str = ""

    def validate(self):
        self.map.validate()
        self.frontend.validate()
        self.backend.validate()
        return self


_SUBSECTIONS = ("map", "frontend", "backend")


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw, 0)
    if isinstance(like, float):
        return float(raw)
    return raw


def set_config_key(cfg: PipelineConfig, key: str, raw: str):
    """Assign one flat ``key = value`` pair, searching the nested sections."""
    targets = [cfg] + [getattr(cfg, s) for s in _SUBSECTIONS]
    for target in targets:
        for f in fields(target):
            if f.name == key and f.name not in _SUBSECTIONS:
                try:
                    setattr(target, key, _coerce(raw, getattr(target, key)))
                except ValueError as e:
                    raise ConfigError(f"bad value for {key!r}: {e}") from e
                return
    raise ConfigError(f"unknown config key {key!r}")


def load_config(path: str) -> PipelineConfig:
    """Parse a flat UTF-8 ``key = value`` file with # comments."""
    cfg = PipelineConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            try:
                set_config_key(cfg, key, raw)
            except ConfigError as e:
                raise ConfigError(f"{path}:{lineno}: {e}") from e
    return cfg.validate()
