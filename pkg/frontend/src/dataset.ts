/** Loader for the dataset directory written by `thzisac export-dataset`:
 * manifest.json + little-endian float32 blobs + selection.csv SE table. */

import * as fs from "fs";
import * as path from "path";

export interface SampleMeta {
  offset: number;
  realization: number;
  snr_db: number;
  noise_draw: number;
  subcarrier: number;
}

export interface CleanMeta {
  offset: number;
  realization: number;
  subcarrier: number;
}

export interface Manifest {
  format_version: number;
  dtype: string;
  shape: [number, number, number];
  sample_count: number;
  sample_bytes: number;
  blob_file: string;
  blob_bytes: number;
  class_count: number;
  classes: number[][];
  labels: number[];
  samples: SampleMeta[];
  clean: { file: string; count: number; bytes: number; records: CleanMeta[] };
  se_table_file: string;
  seed: number;
  i1: number;
  i2: number;
  snr_train_db: number[];
  realizations: { index: number; label: number; design_seed: number }[];
}

export interface Dataset {
  empty: boolean;
  dir: string;
  manifest: Manifest;
  /** (samples, N, N'+T, 2) float32 values, sample-major. */
  tensors: Float32Array;
  labels: Int32Array;
  /** Noise-free inputs, one per clean record, same per-sample layout. */
  clean: Float32Array;
  sampleSize: number;
}

export function loadDataset(dir: string): Dataset {
  const manifestPath = path.join(dir, "manifest.json");
  if (!fs.existsSync(manifestPath)) {
    throw new Error(`no manifest.json in ${dir}`);
  }
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8")) as Manifest;
  if (manifest.dtype !== "f32le") {
    throw new Error(`unsupported dtype '${manifest.dtype}' (expected f32le)`);
  }
  const sampleSize = manifest.shape[0] * manifest.shape[1] * manifest.shape[2];
  if (manifest.sample_bytes !== sampleSize * 4) {
    throw new Error(`sample_bytes ${manifest.sample_bytes} does not match shape `
      + `${manifest.shape} (field: sample_bytes)`);
  }
  const blobPath = path.join(dir, manifest.blob_file);
  const blob = fs.readFileSync(blobPath);
  if (blob.byteLength !== manifest.blob_bytes) {
    throw new Error(`blob length ${blob.byteLength} != manifest blob_bytes `
      + `${manifest.blob_bytes} (field: blob_bytes)`);
  }
  if (manifest.labels.length !== manifest.sample_count) {
    throw new Error(`labels length ${manifest.labels.length} != sample_count `
      + `${manifest.sample_count} (field: labels)`);
  }
  if (manifest.sample_count * manifest.sample_bytes !== manifest.blob_bytes) {
    throw new Error(`sample_count x sample_bytes != blob_bytes (field: sample_count)`);
  }
  const tensors = new Float32Array(blob.buffer, blob.byteOffset,
    manifest.sample_count * sampleSize).slice();
  const cleanBuf = fs.readFileSync(path.join(dir, manifest.clean.file));
  if (cleanBuf.byteLength !== manifest.clean.bytes) {
    throw new Error(`clean blob length ${cleanBuf.byteLength} != manifest `
      + `${manifest.clean.bytes} (field: clean.bytes)`);
  }
  const clean = new Float32Array(cleanBuf.buffer, cleanBuf.byteOffset,
    manifest.clean.count * sampleSize).slice();
  return {
    empty: manifest.sample_count === 0,
    dir,
    manifest,
    tensors,
    labels: Int32Array.from(manifest.labels),
    clean,
    sampleSize,
  };
}

export function sampleView(ds: Dataset, index: number): Float32Array {
  return ds.tensors.subarray(index * ds.sampleSize, (index + 1) * ds.sampleSize);
}

export function cleanView(ds: Dataset, record: number): Float32Array {
  return ds.clean.subarray(record * ds.sampleSize, (record + 1) * ds.sampleSize);
}

/** SE_total per (realization, class) from the core's selection.csv. */
export function readSeTable(dir: string, file: string): Map<string, number> {
  const table = new Map<string, number>();
  const text = fs.readFileSync(path.join(dir, file), "utf8");
  for (const line of text.split("\n")) {
    if (!line || line.startsWith("#") || line.startsWith("realization")) continue;
    const parts = line.split(",");
    table.set(`${parts[0]}:${parts[1]}`, parseFloat(parts[4]));
  }
  return table;
}

export function seLookup(table: Map<string, number>, realization: number,
                         cls: number): number {
  const v = table.get(`${realization}:${cls}`);
  if (v === undefined) {
    throw new Error(`no SE table entry for realization ${realization}, class ${cls}`);
  }
  return v;
}

/** 70/30 train/validation split (seeded, sample-level). */
export function splitIndices(n: number, valFraction: number,
                             shuffleFn: (a: number[]) => void):
    { train: number[]; val: number[] } {
  const idx = Array.from({ length: n }, (_, i) => i);
  shuffleFn(idx);
  const nVal = Math.round(n * valFraction);
  return { val: idx.slice(0, nVal), train: idx.slice(nVal) };
}

/** Additive complex Gaussian corruption at a target SNR (dB), relative to the
 * sample's mean entry power. Mirrors the core's corrupt_input convention:
 * the (.., 2) channel pairs are the real/imag parts of one complex entry. */
export function corruptSample(sample: Float32Array, snrDb: number,
                              gauss: () => number): Float32Array {
  if (!isFinite(snrDb)) return sample.slice();
  let power = 0;
  for (let i = 0; i < sample.length; i += 2) {
    power += sample[i] * sample[i] + sample[i + 1] * sample[i + 1];
  }
  power /= sample.length / 2;
  const std = Math.sqrt((power * Math.pow(10, -snrDb / 10)) / 2);
  const out = sample.slice();
  for (let i = 0; i < out.length; i++) {
    out[i] += std * gauss();
  }
  return out;
}
