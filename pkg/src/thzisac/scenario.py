"""Scenario generation, wideband THz channels, and sensing signals.

The channel realized here carries beam squint physically: at subcarrier m the
array responds with steering phases scaled by eta_m = f_m / f_c. A second,
carrier-referenced matrix set (eta = 1, the textbook narrowband steering) is
kept alongside as the squint-unaware design reference; beamformers designed
against it and evaluated on the physical matrices exhibit the array-gain loss
that beam-squint compensation recovers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig

SPEED_OF_LIGHT = 299792458.0

DEG_MIN = 30.0
DEG_MAX = 150.0


def subcarrier_frequency(m: int, cfg: SystemConfig) -> float:
    """Frequency of subcarrier m (1-based): f_c + (B/M) (m - 1 - (M-1)/2)."""
    if not 1 <= m <= cfg.M:
        raise IndexError(f"subcarrier index m={m} outside 1..{cfg.M}")
    return cfg.f_c + (cfg.B_hz / cfg.M) * (m - 1 - (cfg.M - 1) / 2)


def eta(m: int, cfg: SystemConfig) -> float:
    """Relative subcarrier frequency eta_m = f_m / f_c (1 means no squint)."""
    return subcarrier_frequency(m, cfg) / cfg.f_c


def all_etas(cfg: SystemConfig) -> np.ndarray:
    return np.array([eta(m, cfg) for m in range(1, cfg.M + 1)])


def steering_vector(theta: float, n_elem: int, eta_m: float = 1.0) -> np.ndarray:
    """Unit-norm ULA steering vector at half-wavelength spacing.

    Entry n is exp(-j pi (n-1) eta_m sin(theta)) / sqrt(n_elem); eta_m = 1
    gives the carrier-referenced (squint-free) vector.
    """
    n = np.arange(n_elem)
    return np.exp(-1j * np.pi * n * eta_m * np.sin(theta)) / np.sqrt(n_elem)


@dataclass(frozen=True)
class Scenario:
    """Realized target/user geometry for one Monte Carlo trial."""

    target_directions: np.ndarray   # [T] radians
    path_doas: np.ndarray           # [L] radians, user side
    path_dods: np.ndarray           # [L] radians, transmitter side
    path_delays: np.ndarray         # [L] seconds
    path_distances: np.ndarray      # [L] meters
    ray_decay: float                # seconds
    k_abs_per_subcarrier: np.ndarray  # [M] 1/m
    target_rcs: np.ndarray          # [T] complex reflection coefficients
    gain_seed: int = 0              # drives the path-gain draws


@dataclass(frozen=True)
class ChannelSet:
    """Per-subcarrier downlink channel matrices for one scenario.

    `matrices` is the physical wideband channel (squinted steering, used for
    spectral-efficiency evaluation); `design_matrices` is the carrier-
    referenced variant the squint-unaware designer works from. Both stacks
    are (M, N_prime, N) and share the same path gains.
    """

    matrices: np.ndarray
    design_matrices: np.ndarray
    path_gains: np.ndarray          # (L, M)


def save_scenario(scn: Scenario, path) -> None:
    """Write a scenario as human-readable `key = value` lines (angles in
    radians; complex values as re+imj; lists comma separated)."""
    from pathlib import Path

    def fmt(values) -> str:
        return ",".join(repr(complex(v)) if np.iscomplexobj(values) else repr(float(v))
                        for v in np.atleast_1d(values))

    lines = [
        f"target_directions = {fmt(scn.target_directions)}",
        f"path_doas = {fmt(scn.path_doas)}",
        f"path_dods = {fmt(scn.path_dods)}",
        f"path_delays = {fmt(scn.path_delays)}",
        f"path_distances = {fmt(scn.path_distances)}",
        f"ray_decay = {scn.ray_decay!r}",
        f"k_abs_per_subcarrier = {fmt(scn.k_abs_per_subcarrier)}",
        f"target_rcs = {fmt(scn.target_rcs)}",
        f"gain_seed = {scn.gain_seed}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_scenario(path) -> Scenario:
    """Inverse of save_scenario."""
    from pathlib import Path
    fields = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        fields[key] = raw
    unknown = set(fields) - {"target_directions", "path_doas", "path_dods",
                             "path_delays", "path_distances", "ray_decay",
                             "k_abs_per_subcarrier", "target_rcs", "gain_seed"}
    if unknown:
        raise ValueError(f"unknown scenario keys {sorted(unknown)}")
    real = lambda key: np.array([float(v) for v in fields[key].split(",")])
    cplx = np.array([complex(v.strip("()")) for v in fields["target_rcs"].split(",")])
    return Scenario(
        target_directions=real("target_directions"),
        path_doas=real("path_doas"),
        path_dods=real("path_dods"),
        path_delays=real("path_delays"),
        path_distances=real("path_distances"),
        ray_decay=float(fields["ray_decay"]),
        k_abs_per_subcarrier=real("k_abs_per_subcarrier"),
        target_rcs=cplx,
        gain_seed=int(fields["gain_seed"]),
    )


def sample_scenario(cfg: SystemConfig, rng: np.random.Generator) -> Scenario:
    """Draw a random scenario: directions uniform in [30, 150] degrees."""
    lo, hi = np.deg2rad(DEG_MIN), np.deg2rad(DEG_MAX)
    dists = rng.uniform(cfg.dist_min_m, cfg.dist_max_m, cfg.L)
    return Scenario(
        target_directions=rng.uniform(lo, hi, cfg.T),
        path_doas=rng.uniform(lo, hi, cfg.L),
        path_dods=rng.uniform(lo, hi, cfg.L),
        path_delays=dists / SPEED_OF_LIGHT,
        path_distances=dists,
        ray_decay=cfg.ray_decay_s,
        k_abs_per_subcarrier=np.full(cfg.M, cfg.k_abs_per_m),
        target_rcs=(rng.standard_normal(cfg.T) + 1j * rng.standard_normal(cfg.T))
        / np.sqrt(2),
        gain_seed=int(rng.integers(0, 2**63 - 1)),
    )


def los_gain(m: int, cfg: SystemConfig, distance_m: float, k_abs: float = 0.0) -> complex:
    """Deterministic line-of-sight path gain at subcarrier m.

    Spreading loss c/(4 pi f_m d), molecular absorption exp(-k_abs d / 2), and
    propagation phase exp(-j 2 pi f_m d / c).
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    f_m = subcarrier_frequency(m, cfg)
    amp = SPEED_OF_LIGHT / (4 * np.pi * f_m * distance_m)
    return (amp * np.exp(-0.5 * k_abs * distance_m)
            * np.exp(-2j * np.pi * f_m * distance_m / SPEED_OF_LIGHT))


def nlos_power(m: int, cfg: SystemConfig, distance_m: float, delay_s: float,
               ray_decay_s: float, k_abs: float = 0.0) -> float:
    """Expected power E{|alpha|^2} of an NLoS path at subcarrier m."""
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    if ray_decay_s <= 0:
        raise ValueError(f"ray decay must be > 0, got {ray_decay_s}")
    f_m = subcarrier_frequency(m, cfg)
    amp = SPEED_OF_LIGHT / (4 * np.pi * f_m * distance_m)
    return amp**2 * np.exp(-k_abs * distance_m) * np.exp(-delay_s / ray_decay_s)


def nlos_gain(m: int, cfg: SystemConfig, distance_m: float, delay_s: float,
              ray_decay_s: float, rng: np.random.Generator,
              k_abs: float = 0.0) -> complex:
    """Circularly-symmetric complex Gaussian NLoS gain draw at subcarrier m."""
    std = np.sqrt(nlos_power(m, cfg, distance_m, delay_s, ray_decay_s, k_abs) / 2)
    return complex(std * rng.standard_normal() + 1j * std * rng.standard_normal())


def draw_path_gains(scn: Scenario, cfg: SystemConfig) -> np.ndarray:
    """Draw the (L, M) path-gain matrix for a scenario.

    First path is LoS when cfg.use_los, remaining paths NLoS. Gains are
    rescaled to unit mean power when cfg.normalize_path_power (the article
    states no absolute link budget, and SNR = 1/sigma2 needs a reference).
    """
    rng = np.random.default_rng(scn.gain_seed)
    gains = np.zeros((cfg.L, cfg.M), dtype=complex)
    for l in range(cfg.L):
        for mi, m in enumerate(range(1, cfg.M + 1)):
            k_abs = float(scn.k_abs_per_subcarrier[mi])
            if cfg.use_los and l == 0:
                gains[l, mi] = los_gain(m, cfg, scn.path_distances[l], k_abs)
            else:
                gains[l, mi] = nlos_gain(m, cfg, scn.path_distances[l],
                                         scn.path_delays[l], scn.ray_decay,
                                         rng, k_abs)
    if cfg.normalize_path_power:
        scale = np.zeros((cfg.L, cfg.M))
        for l in range(cfg.L):
            for mi, m in enumerate(range(1, cfg.M + 1)):
                k_abs = float(scn.k_abs_per_subcarrier[mi])
                if cfg.use_los and l == 0:
                    scale[l, mi] = abs(los_gain(m, cfg, scn.path_distances[l],
                                                k_abs)) ** 2
                else:
                    scale[l, mi] = nlos_power(m, cfg, scn.path_distances[l],
                                              scn.path_delays[l], scn.ray_decay,
                                              k_abs)
        gains /= np.sqrt(scale.mean())
    return gains


def assemble_channel(scn: Scenario, cfg: SystemConfig,
                     path_gains: np.ndarray) -> ChannelSet:
    """Build both channel stacks from given per-path per-subcarrier gains.

    H[m] = sqrt(N' N / L) sum_l alpha_{l,m} a'(phi_l) a^H(theta_l), with the
    physical stack using eta_m-squinted steering on both array ends and the
    design stack using carrier-referenced steering (eta = 1).
    """
    L = cfg.L
    if path_gains.shape != (L, cfg.M):
        raise ValueError(f"path_gains must be ({L}, {cfg.M}), got {path_gains.shape}")
    scale = np.sqrt(cfg.N_prime * cfg.N / L)
    phys = np.zeros((cfg.M, cfg.N_prime, cfg.N), dtype=complex)
    design = np.zeros_like(phys)
    for mi, m in enumerate(range(1, cfg.M + 1)):
        e = eta(m, cfg)
        for l in range(L):
            a_rx_d = steering_vector(scn.path_doas[l], cfg.N_prime, 1.0)
            a_tx_d = steering_vector(scn.path_dods[l], cfg.N, 1.0)
            a_rx_p = steering_vector(scn.path_doas[l], cfg.N_prime, e)
            a_tx_p = steering_vector(scn.path_dods[l], cfg.N, e)
            design[mi] += path_gains[l, mi] * np.outer(a_rx_d, a_tx_d.conj())
            phys[mi] += path_gains[l, mi] * np.outer(a_rx_p, a_tx_p.conj())
    return ChannelSet(matrices=scale * phys, design_matrices=scale * design,
                      path_gains=path_gains.copy())


def generate_channel(scn: Scenario, cfg: SystemConfig) -> ChannelSet:
    """Realize the channel for a scenario (deterministic given scn and cfg)."""
    return assemble_channel(scn, cfg, draw_path_gains(scn, cfg))


def sensing_steering_matrix(directions: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Sensing-only beamformer: one carrier-referenced steering column per target."""
    return np.stack([steering_vector(t, cfg.N, 1.0) for t in np.atleast_1d(directions)],
                    axis=1)


def echo_signal(probing: np.ndarray, scn: Scenario, cfg: SystemConfig,
                antenna_indices0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Received target echo across the selected subarray.

    probing is the N x T_S transmitted block; the noise-free echo
    sum_t beta_t a(Phi_t) a^T(Phi_t) X is restricted to the K selected rows
    (zero-based `antenna_indices0`) before i.i.d. complex Gaussian noise of
    variance sigma2 is added.
    """
    if probing.shape[0] != cfg.N:
        raise ValueError(f"probing must have {cfg.N} rows, got {probing.shape[0]}")
    echo = np.zeros((cfg.N, probing.shape[1]), dtype=complex)
    for t in range(cfg.T):
        a = steering_vector(scn.target_directions[t], cfg.N, 1.0)
        echo += scn.target_rcs[t] * np.outer(a, a) @ probing
    k = len(antenna_indices0)
    noise = np.sqrt(cfg.sigma2 / 2) * (rng.standard_normal((k, probing.shape[1]))
                                       + 1j * rng.standard_normal((k, probing.shape[1])))
    return echo[antenna_indices0, :] + noise
