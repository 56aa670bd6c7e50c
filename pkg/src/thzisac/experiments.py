"""Monte Carlo sweep engine, dataset export, and selection robustness checks.

Two wirings of the selection pipeline appear here. Sweep methods emulate the
squint-unaware designer: beamforming references come from the carrier-
referenced channel while spectral efficiency is always scored on the physical
(squinted) matrices, which is what separates the compensated and uncompensated
methods. The dataset/labeling pipeline instead derives its references from the
same matrices stored in the classifier input, so a noise-free input reproduces
the labels exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beamformer import comms_beamformer_full, design_directions, fd_jsc_beamformer
from .config import ConfigError, SystemConfig, config_lines
from .scenario import ChannelSet, Scenario, generate_channel, sample_scenario, \
    sensing_steering_matrix
from .selection import (SelectionResult, enumerate_candidates,
                        evaluate_candidate, exhaustive_select,
                        spectral_efficiency_per_subcarrier)

SWEEP_VARIABLES = ("snr", "K", "N_RF", "G", "epsilon")
METHODS = ("fd_full", "fd_comm_only", "opt_bsc", "opt_nobsc", "rand_bsc", "rand_nobsc")

MANIFEST_NAME = "manifest.json"
BLOB_NAME = "samples.f32le"
CLEAN_BLOB_NAME = "clean.f32le"
SE_TABLE_NAME = "selection.csv"
PARTIAL_MARKER = "MANIFEST.partial"

_RAND_SUBARRAY_TAG = 0x5EED


@dataclass(frozen=True)
class SweepSpec:
    """One sweep family: which scalar varies, over which values, how often."""

    variable: str
    values: tuple
    trials: int
    methods: tuple = METHODS
    base_config: SystemConfig = field(default_factory=SystemConfig)
    seed: int = 0
    mode: str = "gss"           # candidate enumeration for the opt_* methods

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}, "
                             f"got {self.variable!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")


def _config_for(spec: SweepSpec, value) -> SystemConfig:
    cfg = spec.base_config
    if spec.variable == "snr":
        return cfg.with_snr_db(float(value))
    if spec.variable == "epsilon":
        return cfg.replace(epsilon=float(value))
    return cfg.replace(**{spec.variable: int(value)})


@dataclass
class TrialContext:
    scenario: Scenario
    channel: ChannelSet
    F_C_design: np.ndarray      # (M, N, N_ds), refs from the carrier channel
    F_S_full: np.ndarray        # (N, T)
    directions_sin: np.ndarray


def _realize_trial(cfg: SystemConfig, seed: int, trial: int,
                   n_beams: int) -> TrialContext:
    rng = np.random.default_rng((seed, trial))
    scn = sample_scenario(cfg, rng)
    channel = generate_channel(scn, cfg)
    F_C = np.stack([comms_beamformer_full(channel.design_matrices[mi], cfg.N_ds)
                    for mi in range(cfg.M)])
    F_S = sensing_steering_matrix(scn.target_directions, cfg)
    dirs = design_directions(F_C, F_S, n_beams, cfg.L)
    return TrialContext(scn, channel, F_C, F_S, dirs)


def _fd_se(matrices: np.ndarray, precoders: np.ndarray, sigma2: float,
           n_streams: int) -> float:
    n = matrices.shape[2]
    eye = np.eye(n)
    return float(np.sum(spectral_efficiency_per_subcarrier(
        matrices, eye, precoders, sigma2, n_streams)))


def run_sweep(spec: SweepSpec):
    """Run every (value, trial, method) cell of a sweep.

    Returns (rows, aggregates, skipped): per-trial rows
    (variable, value, method, trial, se), aggregate rows
    (variable, value, method, mean, stderr, n), and a list of
    (value, reason) cells skipped as infeasible. Scenario realizations are
    shared across values (seeded by trial only), so e.g. SE is strictly
    increasing along an SNR sweep realization by realization.
    """
    base = spec.base_config
    configs = {}
    skipped = []
    for value in spec.values:
        try:
            cfg_v = _config_for(spec, value)
            cfg_v.validate()
            if spec.mode == "gss" and any(m.startswith(("opt", "rand"))
                                          for m in spec.methods):
                cfg_v.validate_gss()
            configs[value] = cfg_v
        except ConfigError as exc:
            skipped.append((value, str(exc)))
    n_beams = max((c.N_RF for c in configs.values()), default=base.N_RF)

    rows = []
    for trial in range(spec.trials):
        ctx = _realize_trial(base, spec.seed, trial, n_beams)
        design_seed = spec.seed * 1_000_003 + trial
        rand_rng = np.random.default_rng((spec.seed, trial, _RAND_SUBARRAY_TAG))
        for value in spec.values:
            if value not in configs:
                continue
            cfg_v = configs[value]
            eps = cfg_v.epsilon
            eval_mats = ctx.channel.matrices
            selections = {}

            def run_select(use_bsc: bool) -> SelectionResult:
                if use_bsc not in selections:
                    selections[use_bsc] = exhaustive_select(
                        eval_mats, ctx.F_C_design, ctx.F_S_full, cfg_v,
                        mode=spec.mode, design_seed=design_seed,
                        use_bsc=use_bsc, directions_sin=ctx.directions_sin,
                        keep_candidates=False)
                return selections[use_bsc]

            rand_sub = None
            for method in spec.methods:
                if method == "fd_full":
                    fd = fd_jsc_beamformer(ctx.F_C_design, ctx.F_S_full, eps,
                                           cfg_v.N_ds)
                    se = _fd_se(eval_mats, fd, cfg_v.sigma2, cfg_v.N_ds)
                elif method == "fd_comm_only":
                    fd = fd_jsc_beamformer(ctx.F_C_design, ctx.F_S_full, 1.0,
                                           cfg_v.N_ds)
                    se = _fd_se(eval_mats, fd, cfg_v.sigma2, cfg_v.N_ds)
                elif method in ("opt_bsc", "opt_nobsc"):
                    se = run_select(method == "opt_bsc").se_total
                else:  # rand_bsc / rand_nobsc share the drawn subarray
                    if rand_sub is None:
                        cands = enumerate_candidates(cfg_v, spec.mode)
                        rand_sub = cands[int(rand_rng.integers(len(cands)))]
                    rec = evaluate_candidate(rand_sub, eval_mats, ctx.F_C_design,
                                             ctx.F_S_full, cfg_v, design_seed,
                                             use_bsc=(method == "rand_bsc"),
                                             directions_sin=ctx.directions_sin)
                    se = rec.se_total
                rows.append((spec.variable, value, method, trial, se))

    aggregates = []
    for value in spec.values:
        if value not in configs:
            continue
        for method in spec.methods:
            ses = np.array([r[4] for r in rows
                            if r[1] == value and r[2] == method])
            stderr = float(ses.std(ddof=1) / math.sqrt(len(ses))) if len(ses) > 1 else 0.0
            aggregates.append((spec.variable, value, method,
                               float(ses.mean()), stderr, len(ses)))
    return rows, aggregates, skipped


def _header_lines(cfg: SystemConfig, extra: dict | None = None) -> list[str]:
    out = [f"# {line}" for line in config_lines(cfg)]
    for key, val in (extra or {}).items():
        out.append(f"# {key} = {val}")
    return out


def format_float(x: float) -> str:
    return repr(float(x))


def write_trial_csv(path: Path, cfg: SystemConfig, rows, extra: dict | None = None):
    lines = _header_lines(cfg, extra)
    lines.append("sweep_var,value,method,trial,SE")
    for var, value, method, trial, se in rows:
        lines.append(f"{var},{value},{method},{trial},{format_float(se)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_aggregate_csv(path: Path, cfg: SystemConfig, aggregates,
                        extra: dict | None = None):
    lines = _header_lines(cfg, extra)
    lines.append("sweep_var,value,method,mean_SE,stderr,trials")
    for var, value, method, mean, stderr, n in aggregates:
        lines.append(f"{var},{value},{method},{format_float(mean)},"
                     f"{format_float(stderr)},{n}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# dataset export / loading
# ---------------------------------------------------------------------------

def build_classifier_input(channel_matrices: np.ndarray,
                           F_S_full: np.ndarray) -> np.ndarray:
    """Stack channel and sensing data into the (M, N, N'+T) classifier input:
    input[m] = [H[m]^T, F_S]."""
    m_sub = channel_matrices.shape[0]
    return np.stack([np.concatenate([channel_matrices[mi].T, F_S_full], axis=1)
                     for mi in range(m_sub)])


def split_classifier_input(pi: np.ndarray, n_user: int):
    """Invert build_classifier_input for one stacked input (M, N, N'+T)."""
    h = np.transpose(pi[:, :, :n_user], (0, 2, 1))
    f_s = pi[:, :, n_user:].mean(axis=0)
    return h, f_s


def to_real_sample(pi_m: np.ndarray) -> np.ndarray:
    """One (N, N'+T) complex matrix as an (N, N'+T, 2) float32 tensor."""
    return np.stack([pi_m.real, pi_m.imag], axis=-1).astype("<f4")


def from_real_sample(sample: np.ndarray) -> np.ndarray:
    return sample[..., 0].astype(float) + 1j * sample[..., 1].astype(float)


def label_realization(channel: ChannelSet, F_S_full: np.ndarray,
                      cfg: SystemConfig, design_seed: int,
                      use_bsc: bool = True):
    """Best grouped subarray for one realization, with all candidate records.

    References are derived from the physical channel matrices themselves (the
    data the classifier input carries), so the labeling is a pure function of
    (classifier input, seeds) and a noise-free input reproduces it exactly.
    Equals the block-sequential search result for any block count because the
    per-candidate designs are seeded by candidate rank.
    """
    F_C = np.stack([comms_beamformer_full(channel.matrices[mi], cfg.N_ds)
                    for mi in range(cfg.M)])
    dirs = design_directions(F_C, F_S_full, cfg.N_RF, cfg.L)
    return exhaustive_select(channel.matrices, F_C, F_S_full, cfg, mode="gss",
                             design_seed=design_seed, use_bsc=use_bsc,
                             directions_sin=dirs, keep_candidates=True)


def _selection_pipeline(matrices: np.ndarray, F_S_full: np.ndarray,
                        cfg: SystemConfig, design_seed: int,
                        use_bsc: bool = True) -> SelectionResult:
    """The model-based pipeline on arbitrary (possibly corrupted) inputs."""
    F_C = np.stack([comms_beamformer_full(matrices[mi], cfg.N_ds)
                    for mi in range(cfg.M)])
    dirs = design_directions(F_C, F_S_full, cfg.N_RF, cfg.L)
    return exhaustive_select(matrices, F_C, F_S_full, cfg, mode="gss",
                             design_seed=design_seed, use_bsc=use_bsc,
                             directions_sin=dirs, keep_candidates=False)


def _corruption_std(pi: np.ndarray, snr_db: float) -> np.ndarray:
    """Per-subcarrier complex-noise std for a target input SNR (dB), relative
    to the mean entry power of each (N, N'+T) slice."""
    power = np.mean(np.abs(pi) ** 2, axis=(1, 2))
    return np.sqrt(power * 10.0 ** (-snr_db / 10.0))


def corrupt_input(pi: np.ndarray, snr_db: float,
                  rng: np.random.Generator) -> np.ndarray:
    if math.isinf(snr_db):
        return pi.copy()
    std = _corruption_std(pi, snr_db)
    noise = (rng.standard_normal(pi.shape) + 1j * rng.standard_normal(pi.shape))
    return pi + noise * (std[:, None, None] / np.sqrt(2))


def export_dataset(cfg: SystemConfig, i1: int, i2: int, snr_train_db,
                   out_dir: str | Path, seed: int = 0,
                   use_bsc: bool = True) -> dict:
    """Write a labeled classifier dataset: i1 realizations x i2 noise draws x
    M subcarriers x len(snr_train_db) training SNRs.

    Layout: `samples.f32le` holds little-endian float32 samples of shape
    (N, N'+T, 2) stored contiguously row-major; `clean.f32le` holds the
    noise-free input per (realization, subcarrier); `manifest.json` carries
    counts, shapes, zero-based labels, per-sample byte offsets and provenance;
    `selection.csv` tabulates the spectral efficiency of every class for every
    realization (the single source of truth for SE lookups).
    """
    cfg.validate_gss()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snr_list = [float(s) for s in snr_train_db]
    try:
        classes = enumerate_candidates(cfg, "gss")
        sample_shape = (cfg.N, cfg.N_prime + cfg.T, 2)
        sample_bytes = int(np.prod(sample_shape)) * 4
        labels = []
        samples_meta = []
        clean_meta = []
        table_rows = []
        realizations = []
        with open(out / BLOB_NAME, "wb") as blob, \
                open(out / CLEAN_BLOB_NAME, "wb") as clean_blob:
            offset = 0
            clean_offset = 0
            for r in range(i1):
                rng = np.random.default_rng((seed, r))
                scn = sample_scenario(cfg, rng)
                channel = generate_channel(scn, cfg)
                f_s = sensing_steering_matrix(scn.target_directions, cfg)
                design_seed = seed * 1_000_003 + r
                sel = label_realization(channel, f_s, cfg, design_seed, use_bsc)
                label = sel.candidate_index - 1
                realizations.append({"index": r, "label": label,
                                     "design_seed": design_seed})
                for rec in sel.candidates:
                    cls = next(i for i, c in enumerate(classes)
                               if c.rank_p == rec.subarray.rank_p)
                    table_rows.append((r, cls, rec.subarray.rank_p,
                                       rec.subarray.antenna_indices,
                                       rec.se_total, rec.se_per_subcarrier))
                pi = build_classifier_input(channel.matrices, f_s)
                for mi in range(cfg.M):
                    clean_blob.write(to_real_sample(pi[mi]).tobytes())
                    clean_meta.append({"offset": clean_offset, "realization": r,
                                       "subcarrier": mi + 1})
                    clean_offset += sample_bytes
                for si, snr in enumerate(snr_list):
                    for d in range(i2):
                        noise_rng = np.random.default_rng((seed, r, si, d))
                        noisy = corrupt_input(pi, snr, noise_rng)
                        for mi in range(cfg.M):
                            blob.write(to_real_sample(noisy[mi]).tobytes())
                            labels.append(label)
                            samples_meta.append({
                                "offset": offset, "realization": r,
                                "snr_db": snr, "noise_draw": d,
                                "subcarrier": mi + 1})
                            offset += sample_bytes
        _write_se_table(out / SE_TABLE_NAME, cfg, table_rows)
        manifest = {
            "format_version": 1,
            "dtype": "f32le",
            "shape": list(sample_shape),
            "sample_count": len(labels),
            "sample_bytes": sample_bytes,
            "blob_file": BLOB_NAME,
            "blob_bytes": offset,
            "class_count": len(classes),
            "classes": [list(c.antenna_indices) for c in classes],
            "labels": labels,
            "samples": samples_meta,
            "clean": {"file": CLEAN_BLOB_NAME, "count": len(clean_meta),
                      "bytes": clean_offset, "records": clean_meta},
            "se_table_file": SE_TABLE_NAME,
            "seed": seed,
            "i1": i1, "i2": i2, "snr_train_db": snr_list,
            "realizations": realizations,
            "config": {line.split(" = ")[0]: line.split(" = ")[1]
                       for line in config_lines(cfg)},
        }
        (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1))
        return manifest
    except OSError as exc:
        (out / PARTIAL_MARKER).write_text(f"export aborted: {exc}\n")
        raise


def _write_se_table(path: Path, cfg: SystemConfig, table_rows):
    m_cols = ",".join(f"SE_m{m}" for m in range(1, cfg.M + 1))
    lines = _header_lines(cfg)
    lines.append(f"realization,class,rank_p,antenna_indices,SE_total,{m_cols}")
    for r, cls, rank_p, indices, se_total, se_m in table_rows:
        idx = "|".join(str(i) for i in indices)
        per_m = ",".join(format_float(v) for v in se_m)
        lines.append(f"{r},{cls},{rank_p},{idx},{format_float(se_total)},{per_m}")
    path.write_text("\n".join(lines) + "\n")


def read_se_table(path: str | Path) -> dict:
    """Map (realization, class) -> SE_total from a selection.csv file."""
    table = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or line.startswith("realization") or not line:
            continue
        parts = line.split(",")
        table[(int(parts[0]), int(parts[1]))] = float(parts[4])
    return table


def load_manifest(dataset_dir: str | Path) -> dict:
    path = Path(dataset_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {dataset_dir}")
    manifest = json.loads(path.read_text())
    blob = Path(dataset_dir) / manifest["blob_file"]
    if blob.stat().st_size != manifest["blob_bytes"]:
        raise ValueError(f"blob length {blob.stat().st_size} != manifest "
                         f"{manifest['blob_bytes']}")
    return manifest


def load_clean_inputs(dataset_dir: str | Path, manifest: dict) -> dict:
    """Noise-free classifier inputs keyed by realization: (M, N, N'+T) complex."""
    shape = tuple(manifest["shape"])
    raw = np.fromfile(Path(dataset_dir) / manifest["clean"]["file"], dtype="<f4")
    per = int(np.prod(shape))
    out = {}
    for rec in manifest["clean"]["records"]:
        start = rec["offset"] // 4
        sample = raw[start:start + per].reshape(shape)
        out.setdefault(rec["realization"], []).append(from_real_sample(sample))
    return {r: np.stack(v) for r, v in out.items()}


def _config_from_manifest(manifest: dict) -> SystemConfig:
    import ast
    kwargs = {}
    for key, raw in manifest["config"].items():
        kwargs[key] = ast.literal_eval(raw)
    return SystemConfig(**kwargs)


def evaluate_selection_robustness(dataset_dir: str | Path, snr_test_db,
                                  seed: int = 1, use_bsc: bool = True,
                                  selector: str = "model_based",
                                  predictions: dict | None = None):
    """Selection accuracy and SE of the chosen subarrays on corrupted inputs.

    For each test SNR and realization, the stored clean classifier input is
    corrupted, the model-based pipeline (references, designs and ranking all
    recomputed from the corrupted data with the stored per-realization seeds)
    picks a subarray, and the result is scored against the clean label. The
    reported SE is looked up from the clean-channel table, so per sample it
    never exceeds the labeled-best SE. selector="learned_labels" (alias
    "predictions") scores an externally supplied {realization: class} mapping
    instead, e.g. the classifier frontend's predictions.csv.

    Returns rows (snr_test_db, accuracy, mean_SE).
    """
    manifest = load_manifest(dataset_dir)
    cfg = _config_from_manifest(manifest)
    clean = load_clean_inputs(dataset_dir, manifest)
    table = read_se_table(Path(dataset_dir) / manifest["se_table_file"])
    labels = {rec["index"]: rec["label"] for rec in manifest["realizations"]}
    dseeds = {rec["index"]: rec["design_seed"] for rec in manifest["realizations"]}
    rows = []
    for si, snr in enumerate(float(s) for s in snr_test_db):
        hits = 0
        ses = []
        for r, pi in clean.items():
            if selector in ("predictions", "learned_labels"):
                chosen = int(predictions[r])
            else:
                rng = np.random.default_rng((seed, si, r))
                noisy = corrupt_input(pi, snr, rng)
                h_hat, f_s_hat = split_classifier_input(noisy, cfg.N_prime)
                sel = _selection_pipeline(h_hat, f_s_hat, cfg, dseeds[r], use_bsc)
                chosen = sel.candidate_index - 1
            hits += int(chosen == labels[r])
            ses.append(table[(r, chosen)])
        rows.append((snr, hits / len(clean), float(np.mean(ses))))
    return rows


def write_robustness_csv(path: Path, cfg: SystemConfig, rows,
                         extra: dict | None = None):
    lines = _header_lines(cfg, extra)
    lines.append("snr_test_db,accuracy,mean_SE")
    for snr, acc, se in rows:
        lines.append(f"{format_float(snr)},{format_float(acc)},{format_float(se)}")
    Path(path).write_text("\n".join(lines) + "\n")
