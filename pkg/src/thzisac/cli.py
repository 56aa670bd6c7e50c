"""Command-line front end.

Subcommands: design, select, sweep, export-dataset, gain-profile,
eval-robustness. Every delimited output embeds the fully-resolved
configuration as `# key = value` header lines, outputs are written atomically
(temp file + rename), and the report path renders a matplotlib figure next to
each CSV unless --no-plot is given.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import report
from .beamformer import comms_beamformer_full, design_directions, design_hybrid
from .config import ConfigError, SystemConfig, config_lines, load_config
from .experiments import (SweepSpec, METHODS, evaluate_selection_robustness,
                          export_dataset, format_float, run_sweep)
from .scenario import all_etas, generate_channel, sample_scenario, \
    sensing_steering_matrix
from .selection import (SelectionBudgetError, array_gain_profile,
                        exhaustive_select, sequential_select,
                        subarray_from_indices)

CONFIG_FLAGS = {
    "N": int, "K": int, "G": int, "M": int, "N_RF": int, "N_ds": int,
    "N_prime": int, "T": int, "L": int,
}


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_values(spec: str) -> list[float]:
    """Parse sweep values: either 'a,b,c' or 'start:step:stop' (inclusive)."""
    if ":" in spec:
        parts = [float(p) for p in spec.split(":")]
        if len(parts) != 3:
            raise ValueError("range values must be start:step:stop")
        start, step, stop = parts
        if step == 0:
            raise ValueError("range step must be nonzero")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(n, 0))]
    return [float(p) for p in spec.split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output path (CSV or directory)")
    for name in CONFIG_FLAGS:
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--fc", type=float, default=None, help="carrier frequency [Hz]")
    p.add_argument("--bandwidth", type=float, default=None, help="bandwidth [Hz]")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--snr", type=float, default=None, help="SNR [dB] = -10 log10(sigma2)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def _resolve_config(args) -> SystemConfig:
    cfg = SystemConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {}
    for name in CONFIG_FLAGS:
        val = getattr(args, name)
        if val is not None:
            overrides[name] = val
    if args.fc is not None:
        overrides["f_c"] = args.fc
    if args.bandwidth is not None:
        overrides["B_hz"] = args.bandwidth
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = cfg.replace(**overrides)
    if args.snr is not None:
        cfg = cfg.with_snr_db(args.snr)
    return cfg.validate()


def _trial_inputs(cfg: SystemConfig, seed: int):
    rng = np.random.default_rng((seed, 0))
    scn = sample_scenario(cfg, rng)
    channel = generate_channel(scn, cfg)
    f_c = np.stack([comms_beamformer_full(channel.design_matrices[mi], cfg.N_ds)
                    for mi in range(cfg.M)])
    f_s = sensing_steering_matrix(scn.target_directions, cfg)
    dirs = design_directions(f_c, f_s, cfg.N_RF, cfg.L)
    return scn, channel, f_c, f_s, dirs


def _cmd_design(args) -> int:
    cfg = _resolve_config(args)
    scn, channel, f_c, f_s, dirs = _trial_inputs(cfg, cfg.seed)
    sub = subarray_from_indices(range(1, cfg.K + 1), cfg.N)
    trace: list = []
    bf = design_hybrid(sub.indices0, f_c, f_s, cfg,
                       rng=np.random.default_rng((cfg.seed, sub.rank_p)),
                       use_bsc=not args.no_bsc, directions_sin=dirs,
                       trace_sink=trace if args.trace else None)
    from .selection import spectral_efficiency_per_subcarrier
    se_m = spectral_efficiency_per_subcarrier(channel.matrices[:, :, sub.indices0],
                                              bf.analog, bf.digital, cfg.sigma2,
                                              cfg.N_ds)
    lines = [f"# {l}" for l in config_lines(cfg)]
    lines.append(f"# subarray = {'|'.join(str(i) for i in sub.antenna_indices)}")
    lines.append(f"# bsc = {not args.no_bsc}")
    lines.append("subcarrier,SE")
    for mi, se in enumerate(se_m, start=1):
        lines.append(f"{mi},{format_float(se)}")
    lines.append(f"total,{format_float(float(se_m.sum()))}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    if args.trace and trace:
        trace_path = Path(args.out).with_suffix(".trace.csv")
        body = "\n".join(f"{i},{format_float(d)}" for i, d in trace)
        _atomic_write(trace_path, "iteration,delta\n" + body + "\n")
        if not args.no_plot:
            report.plot_design_trace(trace, trace_path.with_suffix(".png"))
    print(f"wrote {args.out} (total SE {se_m.sum():.3f} bits/s/Hz)")
    return 0


def _cmd_select(args) -> int:
    cfg = _resolve_config(args)
    scn, channel, f_c, f_s, dirs = _trial_inputs(cfg, cfg.seed)
    kwargs = dict(mode=args.mode if args.mode != "sequential" else "full",
                  design_seed=cfg.seed, use_bsc=not args.no_bsc,
                  directions_sin=dirs)
    if args.mode == "sequential":
        result = sequential_select(channel.matrices, f_c, f_s, cfg,
                                   n_blocks=args.blocks, **kwargs)
    else:
        result = exhaustive_select(channel.matrices, f_c, f_s, cfg, **kwargs)
    lines = [f"# {l}" for l in config_lines(cfg)]
    lines.append(f"# mode = {args.mode}")
    m_cols = ",".join(f"SE_m{m}" for m in range(1, cfg.M + 1))
    lines.append(f"p,antenna_indices,SE_total,{m_cols}")
    records = result.candidates or []
    for rec in records:
        idx = "|".join(str(i) for i in rec.subarray.antenna_indices)
        per_m = ",".join(format_float(v) for v in rec.se_per_subcarrier)
        lines.append(f"{rec.subarray.rank_p},{idx},{format_float(rec.se_total)},{per_m}")
    idx = "|".join(str(i) for i in result.subarray.antenna_indices)
    per_m = ",".join(format_float(v) for v in result.se_per_subcarrier)
    lines.append(f"best:{result.subarray.rank_p},{idx},"
                 f"{format_float(result.se_total)},{per_m}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    if not args.no_plot and records:
        report.plot_selection([r.subarray.rank_p for r in records],
                              [r.se_total for r in records],
                              result.subarray.rank_p,
                              Path(args.out).with_suffix(".png"))
    print(f"best subarray p={result.subarray.rank_p} "
          f"antennas={result.subarray.antenna_indices} "
          f"SE={result.se_total:.3f} bits/s/Hz -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    methods = tuple(args.methods.split(",")) if args.methods else METHODS
    spec = SweepSpec(variable=args.var, values=tuple(_parse_values(args.values)),
                     trials=args.trials, methods=methods, base_config=cfg,
                     seed=cfg.seed, mode="gss" if args.mode != "full" else "full")
    rows, aggregates, skipped = run_sweep(spec)
    out = Path(args.out)
    extra = {"sweep_variable": spec.variable, "trials": spec.trials,
             "methods": ",".join(methods)}
    for value, reason in skipped:
        extra[f"skipped_{value}"] = reason
        print(f"skipped {spec.variable}={value}: {reason}", file=sys.stderr)
    agg_path = out.with_name(out.stem + "_agg" + out.suffix)
    from .experiments import _header_lines
    trial_lines = _header_lines(cfg, extra) + ["sweep_var,value,method,trial,SE"]
    for var, value, method, trial, se in rows:
        trial_lines.append(f"{var},{value},{method},{trial},{format_float(se)}")
    _atomic_write(out, "\n".join(trial_lines) + "\n")
    agg_lines = _header_lines(cfg, extra) + ["sweep_var,value,method,mean_SE,stderr,trials"]
    for var, value, method, mean, stderr, n in aggregates:
        agg_lines.append(f"{var},{value},{method},{format_float(mean)},"
                         f"{format_float(stderr)},{n}")
    _atomic_write(agg_path, "\n".join(agg_lines) + "\n")
    if not args.no_plot:
        report.plot_sweep(aggregates, spec.variable, out.with_suffix(".png"))
    print(f"wrote {out} and {agg_path}")
    return 0


def _cmd_gain_profile(args) -> int:
    cfg = _resolve_config(args)
    theta = np.deg2rad(args.theta_deg)
    grid = np.deg2rad(np.arange(args.grid_start, args.grid_stop + 1e-12,
                                args.grid_step))
    sub = subarray_from_indices(range(1, cfg.K + 1), cfg.N) \
        if args.K is not None and cfg.K < cfg.N else \
        subarray_from_indices(range(1, cfg.N + 1), cfg.N)
    etas = all_etas(cfg)
    gains = [array_gain_profile(theta, grid, sub, sub, float(e)) for e in etas]
    lines = [f"# {l}" for l in config_lines(cfg)]
    lines.append(f"# theta_deg = {args.theta_deg}")
    header = "vartheta_deg," + ",".join(f"m{m}" for m in range(1, cfg.M + 1))
    lines.append(header)
    grid_deg = np.rad2deg(grid)
    for gi in range(len(grid)):
        row = ",".join(format_float(gains[mi][gi]) for mi in range(cfg.M))
        lines.append(f"{format_float(grid_deg[gi])},{row}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    if not args.no_plot:
        report.plot_gain_profile(grid_deg, gains, args.theta_deg,
                                 Path(args.out).with_suffix(".png"))
    print(f"wrote {args.out}")
    return 0


def _cmd_export_dataset(args) -> int:
    cfg = _resolve_config(args)
    snrs = _parse_values(args.snr_train)
    manifest = export_dataset(cfg, args.i1, args.i2, snrs, args.out,
                              seed=cfg.seed, use_bsc=not args.no_bsc)
    print(f"wrote {manifest['sample_count']} samples "
          f"({manifest['class_count']} classes) to {args.out}")
    return 0


def _cmd_eval_robustness(args) -> int:
    snrs = _parse_values(args.snr_test)
    rows = evaluate_selection_robustness(args.dataset, snrs, seed=args.eval_seed,
                                         use_bsc=not args.no_bsc)
    from .experiments import _config_from_manifest, load_manifest
    cfg = _config_from_manifest(load_manifest(args.dataset))
    lines = [f"# {l}" for l in config_lines(cfg)]
    lines.append("snr_test_db,accuracy,mean_SE")
    for snr, acc, se in rows:
        lines.append(f"{format_float(snr)},{format_float(acc)},{format_float(se)}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    if not args.no_plot:
        report.plot_robustness(rows, Path(args.out).with_suffix(".png"))
    for snr, acc, se in rows:
        print(f"SNR_TEST {snr:6.1f} dB: accuracy {acc:5.3f}, mean SE {se:.3f}")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thzisac",
        description="Antenna selection and beam-squint-compensated hybrid "
                    "beamforming for wideband THz ISAC arrays. SNR convention: "
                    "SNR = 1/sigma2 in dB with unit-average-power symbols.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design the hybrid beamformer for the "
                                      "first K antennas of one realization")
    _add_common(p)
    p.add_argument("--no-bsc", action="store_true")
    p.add_argument("--trace", action="store_true",
                   help="also write the outer-iteration residual trace")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("select", help="search subarrays for one realization")
    _add_common(p)
    p.add_argument("--mode", choices=("full", "gss", "sequential"), default="gss")
    p.add_argument("--blocks", type=int, default=4,
                   help="block count for sequential mode")
    p.add_argument("--no-bsc", action="store_true")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over snr/K/N_RF/G/epsilon")
    _add_common(p)
    p.add_argument("--var", choices=("snr", "K", "N_RF", "G", "epsilon"),
                   required=True)
    p.add_argument("--values", required=True,
                   help="comma list 'a,b,c' or range 'start:step:stop'")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--methods", default=None,
                   help=f"comma subset of {','.join(METHODS)}")
    p.add_argument("--mode", choices=("full", "gss"), default="gss")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gain-profile", help="array-gain grids per subcarrier "
                                            "(squint peak-shift profile)")
    _add_common(p)
    p.add_argument("--theta-deg", type=float, default=40.0)
    p.add_argument("--grid-start", type=float, default=30.0)
    p.add_argument("--grid-stop", type=float, default=150.0)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.set_defaults(func=_cmd_gain_profile)

    p = sub.add_parser("export-dataset", help="write a labeled classifier dataset")
    _add_common(p)
    p.add_argument("--i1", type=int, default=10, help="channel realizations")
    p.add_argument("--i2", type=int, default=5, help="noise draws per SNR")
    p.add_argument("--snr-train", default="15,20,25", help="training SNRs [dB]")
    p.add_argument("--no-bsc", action="store_true")
    p.set_defaults(func=_cmd_export_dataset)

    p = sub.add_parser("eval-robustness", help="model-based selection accuracy "
                                               "and SE on corrupted inputs")
    _add_common(p)
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--snr-test", default="-10:5:30", help="test SNRs [dB]")
    p.add_argument("--eval-seed", type=int, default=1)
    p.add_argument("--no-bsc", action="store_true")
    p.set_defaults(func=_cmd_eval_robustness)
    return ap


_VALUE_FLAGS = ("--values", "--snr-train", "--snr-test", "--snr")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Fold `--values -10:5:20` into `--values=-10:5:20` so argparse does not
    mistake the leading minus for a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(_join_negative_values(list(argv)))
    try:
        return args.func(args)
    except (ConfigError, SelectionBudgetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
