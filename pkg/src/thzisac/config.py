"""System configuration and flat key=value config-file handling."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a configuration violates a system constraint."""


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the wideband ISAC transmitter and scenario.

    Counts follow the usual array-processing symbols: N transmit antennas,
    N_prime user antennas, K selected antennas, M subcarriers, N_RF RF
    chains, N_ds data streams, T point targets, L user multipath components.
    SNR convention: SNR = 1/sigma2 with unit-average-power symbols
    (E{z z^H} = I / N_ds), so snr_db = -10 log10(sigma2).
    """

    N: int = 16
    N_prime: int = 16
    K: int = 8
    M: int = 16
    N_RF: int = 8
    N_ds: int = 3
    T: int = 3
    L: int = 3
    f_c: float = 300e9          # carrier frequency [Hz]
    B_hz: float = 30e9          # total bandwidth [Hz]
    epsilon: float = 0.5        # sensing/communications trade-off in [0,1]
    sigma2: float = 1.0         # noise variance (linear)
    G: int = 4                  # group size for grouped subarray selection
    T_S: int = 256              # sensing snapshots
    seed: int = 0

    # Scenario knobs. The source article gives no absolute link budget
    # (distances, absorption), so these are documented defaults.
    use_los: bool = False       # first path line-of-sight instead of NLoS
    k_abs_per_m: float = 0.0    # molecular absorption coefficient [1/m]
    ray_decay_s: float = 1e-7   # NLoS ray decay constant [s]
    dist_min_m: float = 5.0
    dist_max_m: float = 20.0
    # Scale path gains to unit mean power so sigma2 is a meaningful SNR knob.
    normalize_path_power: bool = True

    def validate(self) -> "SystemConfig":
        """Check every invariant; raise ConfigError naming the violated one."""
        c = self
        for name in ("N", "N_prime", "K", "M", "N_RF", "N_ds", "T", "L", "T_S", "G"):
            if getattr(c, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(c, name)}")
        if not (c.T + c.L <= c.N_RF <= c.K <= c.N):
            raise ConfigError(
                f"need T + L <= N_RF <= K <= N, got T+L={c.T + c.L}, "
                f"N_RF={c.N_RF}, K={c.K}, N={c.N}"
            )
        if c.N_ds > c.N_RF:
            raise ConfigError(f"N_ds must satisfy N_ds <= N_RF, got N_ds={c.N_ds}, N_RF={c.N_RF}")
        if c.N % c.G != 0:
            raise ConfigError(f"N must be divisible by G, got N={c.N}, G={c.G}")
        if not 0.0 <= c.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in [0, 1], got {c.epsilon}")
        if c.f_c <= 0:
            raise ConfigError(f"f_c must be > 0, got {c.f_c}")
        if c.B_hz < 0:
            raise ConfigError(f"B_hz must be >= 0, got {c.B_hz}")
        if c.sigma2 <= 0:
            raise ConfigError(f"sigma2 must be > 0, got {c.sigma2}")
        if c.dist_min_m <= 0 or c.dist_max_m < c.dist_min_m:
            raise ConfigError("distance range must satisfy 0 < dist_min_m <= dist_max_m")
        if c.ray_decay_s <= 0:
            raise ConfigError(f"ray_decay_s must be > 0, got {c.ray_decay_s}")
        if c.k_abs_per_m < 0:
            raise ConfigError(f"k_abs_per_m must be >= 0, got {c.k_abs_per_m}")
        return self

    def validate_gss(self) -> "SystemConfig":
        """Additionally require K divisible by G (grouped selection)."""
        self.validate()
        if self.K % self.G != 0:
            raise ConfigError(f"K must be divisible by G for grouped selection, "
                              f"got K={self.K}, G={self.G}")
        return self

    def replace(self, **kwargs) -> "SystemConfig":
        return dataclasses.replace(self, **kwargs)

    @property
    def snr_db(self) -> float:
        import math
        return -10.0 * math.log10(self.sigma2)

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        return self.replace(sigma2=10.0 ** (-snr_db / 10.0))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}


def _parse_value(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key '{name}'")
    raw = raw.strip()
    kind = _FIELD_TYPES[name]
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    if kind in ("bool", bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean config value {name} = {raw!r}")
    raise ConfigError(f"unsupported config field type for '{name}'")


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a flat `key = value` config file on top of `base` (or defaults).

    Lines starting with '#' and blank lines are ignored. Unknown keys raise
    ConfigError.
    """
    cfg = base or SystemConfig()
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        name, raw = line.split("=", 1)
        name = name.strip()
        overrides[name] = _parse_value(name, raw)
    return cfg.replace(**overrides)


def config_lines(cfg: SystemConfig) -> list[str]:
    """Render the fully-resolved configuration as `key = value` lines."""
    out = []
    for f in dataclasses.fields(SystemConfig):
        out.append(f"{f.name} = {getattr(cfg, f.name)!r}")
    return out


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text("\n".join(config_lines(cfg)) + "\n")
