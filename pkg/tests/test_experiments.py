"""Sweep engine, dataset export, and robustness evaluation checks."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from thzisac.config import SystemConfig
from thzisac.experiments import (SweepSpec, build_classifier_input,
                                 corrupt_input, evaluate_selection_robustness,
                                 export_dataset, from_real_sample,
                                 load_clean_inputs, load_manifest,
                                 read_se_table, run_sweep,
                                 split_classifier_input, to_real_sample,
                                 write_aggregate_csv, write_trial_csv)

DESK = SystemConfig(N=16, N_prime=16, K=8, M=16, N_RF=6, N_ds=3, T=3, L=3, G=4)
SMALL = SystemConfig(N=8, N_prime=8, K=4, M=4, N_RF=4, N_ds=2, T=2, L=2, G=2,
                     T_S=16)


def rows_by(rows, **match):
    out = []
    for var, value, method, trial, se in rows:
        keep = True
        if "value" in match and value != match["value"]:
            keep = False
        if "method" in match and method != match["method"]:
            keep = False
        if "trial" in match and trial != match["trial"]:
            keep = False
        if keep:
            out.append((var, value, method, trial, se))
    return out


def test_sweep_epsilon_one_fd_equals_comm_only():
    spec = SweepSpec(variable="epsilon", values=(1.0,), trials=3,
                     methods=("fd_full", "fd_comm_only"), base_config=SMALL,
                     seed=11)
    rows, aggregates, skipped = run_sweep(spec)
    assert not skipped
    for t in range(3):
        fd = rows_by(rows, method="fd_full", trial=t)[0][4]
        comms = rows_by(rows, method="fd_comm_only", trial=t)[0][4]
        assert fd == comms


def test_sweep_bsc_noop_per_trial_at_zero_bandwidth():
    cfg = SMALL.replace(B_hz=0.0)
    spec = SweepSpec(variable="epsilon", values=(0.5,), trials=5,
                     methods=("opt_bsc", "opt_nobsc"), base_config=cfg, seed=3)
    rows, _, _ = run_sweep(spec)
    for t in range(5):
        bsc = rows_by(rows, method="opt_bsc", trial=t)[0][4]
        nobsc = rows_by(rows, method="opt_nobsc", trial=t)[0][4]
        assert abs(bsc - nobsc) < 1e-9


def test_sweep_snr_strictly_increasing_per_method():
    spec = SweepSpec(variable="snr", values=(-10.0, 0.0, 10.0), trials=3,
                     methods=("fd_full", "opt_bsc", "rand_nobsc"),
                     base_config=SMALL, seed=7)
    rows, aggregates, _ = run_sweep(spec)
    for method in spec.methods:
        means = [next(a[3] for a in aggregates if a[1] == v and a[2] == method)
                 for v in spec.values]
        assert means[0] < means[1] < means[2]
        # per-trial monotonicity holds as well (shared realizations)
        for t in range(3):
            per = [rows_by(rows, value=v, method=method, trial=t)[0][4]
                   for v in spec.values]
            assert per[0] < per[1] < per[2]


def test_sweep_skips_infeasible_values():
    spec = SweepSpec(variable="K", values=(2, 4), trials=1,
                     methods=("opt_bsc",), base_config=SMALL, seed=1)
    rows, aggregates, skipped = run_sweep(spec)
    assert [v for v, _ in skipped] == [2]     # K=2 < N_RF=4
    assert "N_RF" in skipped[0][1]
    assert {r[1] for r in rows} == {4}


def test_sweep_reproducible_csv(tmp_path):
    spec = SweepSpec(variable="snr", values=(0.0, 5.0), trials=2,
                     methods=("fd_full", "opt_bsc"), base_config=SMALL, seed=5)
    paths = []
    for run in range(2):
        rows, aggregates, _ = run_sweep(spec)
        p_rows = tmp_path / f"rows{run}.csv"
        p_agg = tmp_path / f"agg{run}.csv"
        write_trial_csv(p_rows, SMALL, rows)
        write_aggregate_csv(p_agg, SMALL, aggregates)
        paths.append((p_rows.read_bytes(), p_agg.read_bytes()))
    assert paths[0] == paths[1]


def test_classifier_input_round_trip():
    rng = np.random.default_rng(2)
    h = rng.standard_normal((4, 6, 8)) + 1j * rng.standard_normal((4, 6, 8))
    f_s = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
    pi = build_classifier_input(h, f_s)
    assert pi.shape == (4, 8, 6 + 2)
    h2, f_s2 = split_classifier_input(pi, 6)
    assert np.allclose(h2, h)
    assert np.allclose(f_s2, f_s)


def test_real_sample_round_trip_is_float32_exact():
    rng = np.random.default_rng(3)
    pi_m = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    sample = to_real_sample(pi_m)
    assert sample.dtype == np.dtype("<f4")
    back = from_real_sample(sample)
    assert np.array_equal(back.astype(np.complex64), pi_m.astype(np.complex64))
    assert np.array_equal(to_real_sample(back), sample)


def test_corrupt_input_power_matches_target():
    rng = np.random.default_rng(4)
    pi = rng.standard_normal((16, 16, 19)) + 1j * rng.standard_normal((16, 16, 19))
    snr_db = 10.0
    noise = corrupt_input(pi, snr_db, np.random.default_rng(8)) - pi
    measured = np.mean(np.abs(noise) ** 2)
    target = np.mean(np.abs(pi) ** 2) * 10 ** (-snr_db / 10)
    assert measured == pytest.approx(target, rel=0.03)
    assert np.array_equal(corrupt_input(pi, math.inf, rng), pi)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    cfg = SMALL
    manifest = export_dataset(cfg, i1=4, i2=2, snr_train_db=[15.0, 25.0],
                              out_dir=out, seed=13)
    return out, cfg, manifest


def test_export_dataset_counts_and_shapes(small_dataset):
    out, cfg, manifest = small_dataset
    assert manifest["sample_count"] == 4 * 2 * cfg.M * 2
    assert manifest["shape"] == [cfg.N, cfg.N_prime + cfg.T, 2]
    assert manifest["class_count"] == 6  # C(4, 2) grouped candidates
    assert len(manifest["labels"]) == manifest["sample_count"]
    assert all(0 <= lab < 6 for lab in manifest["labels"])
    blob = out / manifest["blob_file"]
    assert blob.stat().st_size == manifest["blob_bytes"]
    assert manifest["blob_bytes"] == manifest["sample_count"] * manifest["sample_bytes"]


def test_export_dataset_desk_sample_shape():
    # desk-scale input tensor is 16 x 19 x 2 (N x (N'+T) x 2)
    cfg = DESK
    rng = np.random.default_rng(0)
    h = rng.standard_normal((cfg.M, cfg.N_prime, cfg.N)) * 1j
    f_s = rng.standard_normal((cfg.N, cfg.T)) + 0j
    pi = build_classifier_input(h, f_s)
    assert to_real_sample(pi[0]).shape == (16, 19, 2)


def test_export_dataset_blob_matches_manifest_offsets(small_dataset):
    out, cfg, manifest = small_dataset
    raw = np.fromfile(out / manifest["blob_file"], dtype="<f4")
    per = int(np.prod(manifest["shape"]))
    # spot-check a few samples: offset slicing reproduces stored tensors
    for rec_idx in (0, 7, manifest["sample_count"] - 1):
        rec = manifest["samples"][rec_idx]
        start = rec["offset"] // 4
        sample = raw[start:start + per].reshape(manifest["shape"])
        assert np.isfinite(sample).all()
    # clean section: one record per (realization, subcarrier)
    assert manifest["clean"]["count"] == 4 * cfg.M
    clean = load_clean_inputs(out, manifest)
    assert sorted(clean) == [0, 1, 2, 3]
    assert clean[0].shape == (cfg.M, cfg.N, cfg.N_prime + cfg.T)


def test_export_dataset_noise_power(small_dataset):
    out, cfg, manifest = small_dataset
    raw = np.fromfile(out / manifest["blob_file"], dtype="<f4")
    per = int(np.prod(manifest["shape"]))
    clean = load_clean_inputs(out, manifest)
    # pool the noise-power ratio over every 15 dB sample in the dataset
    num, den = 0.0, 0.0
    for rec in manifest["samples"]:
        if rec["snr_db"] != 15.0:
            continue
        start = rec["offset"] // 4
        sample = from_real_sample(raw[start:start + per].reshape(manifest["shape"]))
        ref = clean[rec["realization"]][rec["subcarrier"] - 1]
        num += np.sum(np.abs(sample - ref) ** 2)
        den += np.sum(np.abs(ref) ** 2) * 10 ** (-15.0 / 10)
    assert num / den == pytest.approx(1.0, rel=0.03)


def test_se_table_consistency(small_dataset):
    out, cfg, manifest = small_dataset
    table = read_se_table(out / manifest["se_table_file"])
    assert len(table) == 4 * manifest["class_count"]
    for rec in manifest["realizations"]:
        r, label = rec["index"], rec["label"]
        ses = [table[(r, c)] for c in range(manifest["class_count"])]
        assert table[(r, label)] == max(ses)


def test_robustness_clean_input_reproduces_labels(small_dataset):
    out, cfg, manifest = small_dataset
    rows = evaluate_selection_robustness(out, [math.inf], seed=5)
    assert rows[0][1] == 1.0


def test_robustness_trend_and_se_bound(small_dataset):
    out, cfg, manifest = small_dataset
    rows = evaluate_selection_robustness(out, [-15.0, 10.0, math.inf], seed=5)
    accs = [r[1] for r in rows]
    assert accs[0] <= accs[-1]
    assert accs[-1] == 1.0
    table = read_se_table(out / manifest["se_table_file"])
    best = {rec["index"]: table[(rec["index"], rec["label"])]
            for rec in manifest["realizations"]}
    for snr, acc, mean_se in rows:
        assert mean_se <= np.mean(list(best.values())) + 1e-12


def test_robustness_predictions_selector(small_dataset):
    out, cfg, manifest = small_dataset
    labels = {rec["index"]: rec["label"] for rec in manifest["realizations"]}
    rows = evaluate_selection_robustness(out, [0.0], selector="predictions",
                                         predictions=labels)
    assert rows[0][1] == 1.0
    wrong = {r: (lab + 1) % manifest["class_count"] for r, lab in labels.items()}
    rows = evaluate_selection_robustness(out, [0.0], selector="predictions",
                                         predictions=wrong)
    assert rows[0][1] == 0.0


def test_partial_marker_on_disk_failure(tmp_path, monkeypatch):
    target = tmp_path / "broken"
    import thzisac.experiments as exp

    real_open = open

    def failing_open(path, *args, **kwargs):
        if str(path).endswith(exp.BLOB_NAME) and "wb" in args:
            raise OSError("disk full")
        return real_open(path, *args, **kwargs)

    monkeypatch.setattr("builtins.open", failing_open)
    with pytest.raises(OSError):
        export_dataset(SMALL, 1, 1, [15.0], target, seed=0)
    monkeypatch.undo()
    assert (target / exp.PARTIAL_MARKER).exists()
