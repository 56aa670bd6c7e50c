/** Test utilities: synthetic dataset directories and core-CLI exports. */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { Rng } from "../src/rng";

export function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Export a dataset with the core CLI (must be on PATH). */
export function exportDataset(dir: string, args: string[]): void {
  execFileSync("thzisac", ["export-dataset", "--out", dir, ...args],
    { stdio: "pipe" });
}

export interface SyntheticOptions {
  dir: string;
  n: number;           // antennas
  npt: number;         // N' + T columns
  classes: number;
  realizations: number;
  samplesPerRealization: number;
  labelOf: (realization: number) => number;
  seed: number;
  /** Class-dependent mean shift so the labels are learnable. */
  signal: number;
}

/** Write a minimal dataset directory in the core's format with Gaussian
 * class-shifted samples (learnable) plus a consistent SE table. */
export function makeSyntheticDataset(opts: SyntheticOptions): void {
  const rng = new Rng(opts.seed);
  const sampleSize = opts.n * opts.npt * 2;
  const sampleBytes = sampleSize * 4;
  fs.mkdirSync(opts.dir, { recursive: true });
  const labels: number[] = [];
  const samples: object[] = [];
  const cleanRecords: object[] = [];
  const blobs: Buffer[] = [];
  const cleanBlobs: Buffer[] = [];
  let offset = 0;
  let cleanOffset = 0;
  const realizationRows: object[] = [];
  const seLines = ["realization,class,rank_p,antenna_indices,SE_total,SE_m1"];
  for (let r = 0; r < opts.realizations; r++) {
    const label = opts.labelOf(r);
    realizationRows.push({ index: r, label, design_seed: 1000 + r });
    for (let c = 0; c < opts.classes; c++) {
      const se = c === label ? 10 : 10 - 1 - ((c + r) % opts.classes);
      seLines.push(`${r},${c},${c + 1},1|2,${se},${se}`);
    }
    const makeSample = (shift: number) => {
      const arr = new Float32Array(sampleSize);
      for (let i = 0; i < sampleSize; i++) {
        arr[i] = rng.gauss() * 0.3 + (i % opts.classes === label ? shift : 0);
      }
      return Buffer.from(arr.buffer.slice(0));
    };
    const clean = makeSample(opts.signal);
    cleanBlobs.push(clean);
    cleanRecords.push({ offset: cleanOffset, realization: r, subcarrier: 1 });
    cleanOffset += sampleBytes;
    for (let s = 0; s < opts.samplesPerRealization; s++) {
      blobs.push(makeSample(opts.signal));
      labels.push(label);
      samples.push({ offset, realization: r, snr_db: 20, noise_draw: s,
                     subcarrier: 1 });
      offset += sampleBytes;
    }
  }
  fs.writeFileSync(path.join(opts.dir, "samples.f32le"), Buffer.concat(blobs));
  fs.writeFileSync(path.join(opts.dir, "clean.f32le"), Buffer.concat(cleanBlobs));
  fs.writeFileSync(path.join(opts.dir, "selection.csv"), seLines.join("\n") + "\n");
  const manifest = {
    format_version: 1,
    dtype: "f32le",
    shape: [opts.n, opts.npt, 2],
    sample_count: labels.length,
    sample_bytes: sampleBytes,
    blob_file: "samples.f32le",
    blob_bytes: offset,
    class_count: opts.classes,
    classes: Array.from({ length: opts.classes }, (_, c) => [c + 1]),
    labels,
    samples,
    clean: { file: "clean.f32le", count: cleanRecords.length,
             bytes: cleanOffset, records: cleanRecords },
    se_table_file: "selection.csv",
    seed: opts.seed,
    i1: opts.realizations,
    i2: opts.samplesPerRealization,
    snr_train_db: [20],
    realizations: realizationRows,
  };
  fs.writeFileSync(path.join(opts.dir, "manifest.json"),
    JSON.stringify(manifest));
}
