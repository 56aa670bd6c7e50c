/** Robustness and clean-data evaluation of a trained classifier.
 *
 * Spectral efficiency is never recomputed here: every SE value is looked up
 * from the core's per-class table (selection.csv), so the chosen subarray's
 * SE can never exceed the labeled best for the same realization.
 */

import { Dataset, cleanView, corruptSample, readSeTable, sampleView, seLookup }
  from "./dataset";
import { Network } from "./network";
import { Rng } from "./rng";

export interface RobustnessRow {
  snrTestDb: number;
  accuracy: number;
  meanSe: number;
}

export interface CleanEvalResult {
  accuracy: number;
  meanSeSelected: number;
  meanSeLabelBest: number;
  /** Majority-vote class per realization (for the core's predictions scorer). */
  perRealization: Map<number, number>;
}

/** Evaluate on the noise-free inputs, one prediction per (realization,
 * subcarrier) record. */
export function evaluateClean(ds: Dataset, net: Network): CleanEvalResult {
  const table = readSeTable(ds.dir, ds.manifest.se_table_file);
  const labelOf = new Map<number, number>();
  for (const rec of ds.manifest.realizations) labelOf.set(rec.index, rec.label);
  let hits = 0;
  let seSel = 0;
  let seBest = 0;
  const votes = new Map<number, number[]>();
  ds.manifest.clean.records.forEach((rec, i) => {
    const pred = net.predict(cleanView(ds, i));
    const label = labelOf.get(rec.realization)!;
    if (pred === label) hits++;
    seSel += seLookup(table, rec.realization, pred);
    seBest += seLookup(table, rec.realization, label);
    if (!votes.has(rec.realization)) {
      votes.set(rec.realization, new Array(ds.manifest.class_count).fill(0));
    }
    votes.get(rec.realization)![pred]++;
  });
  const n = ds.manifest.clean.records.length;
  const perRealization = new Map<number, number>();
  for (const [r, counts] of votes) {
    let best = 0;
    for (let c = 1; c < counts.length; c++) if (counts[c] > counts[best]) best = c;
    perRealization.set(r, best);
  }
  return {
    accuracy: hits / n,
    meanSeSelected: seSel / n,
    meanSeLabelBest: seBest / n,
    perRealization,
  };
}

/** Corrupt the validation samples at each test SNR and score top-1 accuracy
 * and the mean table SE of the chosen classes. Infinite SNR evaluates the
 * validation samples as stored (the training-curve data path). */
export function evaluateRobustness(ds: Dataset, net: Network,
                                   valIndices: number[], snrTestDb: number[],
                                   seed = 1): RobustnessRow[] {
  const table = readSeTable(ds.dir, ds.manifest.se_table_file);
  const rows: RobustnessRow[] = [];
  snrTestDb.forEach((snr, si) => {
    const rng = new Rng(seed + 7919 * si);
    let hits = 0;
    let se = 0;
    for (const idx of valIndices) {
      const corrupted = corruptSample(sampleView(ds, idx), snr, () => rng.gauss());
      const pred = net.predict(corrupted);
      if (pred === ds.labels[idx]) hits++;
      se += seLookup(table, ds.manifest.samples[idx].realization, pred);
    }
    rows.push({
      snrTestDb: snr,
      accuracy: hits / valIndices.length,
      meanSe: se / valIndices.length,
    });
  });
  return rows;
}

export function robustnessCsv(rows: RobustnessRow[]): string {
  const lines = ["snr_test_db,accuracy,mean_SE"];
  for (const r of rows) {
    lines.push(`${isFinite(r.snrTestDb) ? r.snrTestDb : "inf"},${r.accuracy},${r.meanSe}`);
  }
  return lines.join("\n") + "\n";
}

export function predictionsCsv(perRealization: Map<number, number>): string {
  const lines = ["realization,predicted_class"];
  for (const r of Array.from(perRealization.keys()).sort((a, b) => a - b)) {
    lines.push(`${r},${perRealization.get(r)}`);
  }
  return lines.join("\n") + "\n";
}
