import assert from "node:assert/strict";
import { before, test } from "node:test";
import * as fs from "node:fs";
import * as path from "node:path";

import { loadDataset } from "../src/dataset";
import { evaluateClean, evaluateRobustness, robustnessCsv } from "../src/evaluate";
import { defaultSpec, Network } from "../src/network";
import { Rng } from "../src/rng";
import { accuracy, accuracyCsv, defaultTrainSpec, train } from "../src/train";
import { exportDataset, makeSyntheticDataset, tmpDir } from "./helpers";

let deskDir: string;

before(() => {
  // desk-scale 6-class dataset: 10 x 5 x 16 x 3 = 2400 samples
  deskDir = tmpDir("desk-ds-");
  exportDataset(deskDir, [
    "--N", "16", "--N_prime", "16", "--K", "8", "--N_RF", "8", "--N_ds", "3",
    "--T", "3", "--L", "3", "--G", "4", "--M", "16", "--seed", "21",
    "--i1", "10", "--i2", "5", "--snr-train", "15,20,25", "--no-plot",
  ]);
});

test("acceptance: desk-scale training, SE gap, robustness trend", { timeout: 900_000 }, () => {
  const ds = loadDataset(deskDir);
  assert.ok(ds.manifest.sample_count >= 2400);
  const spec = defaultSpec(ds.manifest.shape[0], ds.manifest.shape[1],
    ds.manifest.class_count);
  spec.filters = 16; // narrow width keeps the CPU run short; layout unchanged
  const tspec = { ...defaultTrainSpec, epochs: 30, seed: 1, targetValAccuracy: 0.8 };
  const net = new Network(spec, new Rng(tspec.seed));
  const result = train(ds, net, tspec);
  const last = result.curves[result.curves.length - 1];
  console.log(`ACCEPTANCE cnn-training: val accuracy ${last.valAccuracy.toFixed(3)} `
    + `after ${result.curves.length} epochs`);
  assert.ok(result.curves.length <= 30);
  assert.ok(last.valAccuracy >= 0.8,
    `validation accuracy ${last.valAccuracy} below 0.8`);
  // optimizer sanity: training loss decreased from the first epoch
  assert.ok(last.loss < result.curves[0].loss);

  // accuracy.csv interface
  const csv = accuracyCsv(result.curves);
  assert.ok(csv.startsWith("epoch,train_acc,val_acc"));
  assert.equal(csv.trim().split("\n").length, result.curves.length + 1);

  // clean-data SE: CNN-selected within 5% of label-best, never above it
  const clean = evaluateClean(ds, net);
  console.log(`ACCEPTANCE cnn-se: selected ${clean.meanSeSelected.toFixed(3)} `
    + `vs label-best ${clean.meanSeLabelBest.toFixed(3)}`);
  assert.ok(clean.meanSeSelected <= clean.meanSeLabelBest + 1e-12);
  assert.ok(clean.meanSeSelected >= 0.95 * clean.meanSeLabelBest,
    `SE gap above 5%: ${clean.meanSeSelected} vs ${clean.meanSeLabelBest}`);

  // robustness: non-decreasing accuracy in test SNR; infinite SNR matches the
  // validation accuracy from the training curves (same data path)
  const rows = evaluateRobustness(ds, net, result.valIndices,
    [0, 10, 20, Infinity], 5);
  console.log("ACCEPTANCE cnn-robustness: "
    + rows.map((r) => `${r.snrTestDb}dB=${r.accuracy.toFixed(3)}`).join(" "));
  for (let i = 1; i < rows.length; i++) {
    assert.ok(rows[i].accuracy >= rows[i - 1].accuracy - 0.05,
      `accuracy trend violated at ${rows[i].snrTestDb} dB`);
  }
  assert.ok(rows[rows.length - 1].accuracy >= rows[0].accuracy);
  assert.equal(rows[rows.length - 1].accuracy, last.valAccuracy);
  const rcsv = robustnessCsv(rows);
  assert.ok(rcsv.startsWith("snr_test_db,accuracy,mean_SE"));
  const outDir = tmpDir("cnn-out-");
  fs.writeFileSync(path.join(outDir, "accuracy.csv"), csv);
  fs.writeFileSync(path.join(outDir, "robustness.csv"), rcsv);
});

test("degenerate single-class dataset trains to 100% immediately", () => {
  const dir = tmpDir("one-class-");
  makeSyntheticDataset({
    dir, n: 4, npt: 5, classes: 1, realizations: 2, samplesPerRealization: 20,
    labelOf: () => 0, seed: 2, signal: 0.5,
  });
  const ds = loadDataset(dir);
  const spec = defaultSpec(4, 5, 1);
  spec.filters = 4;
  spec.fcUnits = 8;
  const net = new Network(spec, new Rng(0));
  const result = train(ds, net, { ...defaultTrainSpec, epochs: 1, seed: 3 });
  assert.equal(result.curves[0].trainAccuracy, 1.0);
  assert.equal(result.curves[0].valAccuracy, 1.0);
});

test("training is deterministic for a fixed seed", () => {
  const dir = tmpDir("det-ds-");
  makeSyntheticDataset({
    dir, n: 4, npt: 6, classes: 3, realizations: 6, samplesPerRealization: 10,
    labelOf: (r) => r % 3, seed: 4, signal: 0.8,
  });
  const ds = loadDataset(dir);
  const runOnce = () => {
    const spec = defaultSpec(4, 6, 3);
    spec.filters = 4;
    spec.fcUnits = 8;
    const net = new Network(spec, new Rng(9));
    return train(ds, net, { ...defaultTrainSpec, epochs: 2, seed: 9 });
  };
  const a = runOnce();
  const b = runOnce();
  assert.deepEqual(a.curves, b.curves);
});

test("training is equivariant under class relabeling", () => {
  // permuting the labels and the output-layer initialization identically
  // leaves every accuracy untouched: the classifier carries no label-order
  // dependence
  const dir = tmpDir("perm-ds-");
  makeSyntheticDataset({
    dir, n: 4, npt: 6, classes: 3, realizations: 6, samplesPerRealization: 12,
    labelOf: (r) => r % 3, seed: 5, signal: 0.8,
  });
  const perm = [2, 0, 1]; // class c -> perm[c]
  const ds = loadDataset(dir);
  const spec = defaultSpec(4, 6, 3);
  spec.filters = 4;
  spec.fcUnits = 8;

  const netA = new Network(spec, new Rng(11));
  const resA = train(ds, netA, { ...defaultTrainSpec, epochs: 2, seed: 13 });

  const dsPerm = loadDataset(dir);
  for (let i = 0; i < dsPerm.labels.length; i++) {
    dsPerm.labels[i] = perm[dsPerm.labels[i]];
  }
  const netB = new Network(spec, new Rng(11));
  // permute the output rows of the initial state to match the relabeling
  const w = netB.out13.w.slice();
  const bvec = netB.out13.b.slice();
  const inN = netB.out13.inN;
  for (let c = 0; c < 3; c++) {
    netB.out13.w.set(w.subarray(c * inN, (c + 1) * inN), perm[c] * inN);
    netB.out13.b[perm[c]] = bvec[c];
  }
  const resB = train(dsPerm, netB, { ...defaultTrainSpec, epochs: 2, seed: 13 });
  for (let e = 0; e < resA.curves.length; e++) {
    assert.equal(resA.curves[e].trainAccuracy, resB.curves[e].trainAccuracy);
    assert.equal(resA.curves[e].valAccuracy, resB.curves[e].valAccuracy);
  }
});

test("a class stranded in the validation split aborts with its id", () => {
  const dir = tmpDir("strand-ds-");
  // one realization of a rare class with a single sample: with a 30% split
  // some seed puts it into validation
  makeSyntheticDataset({
    dir, n: 4, npt: 5, classes: 2, realizations: 5, samplesPerRealization: 1,
    labelOf: (r) => (r === 0 ? 1 : 0), seed: 6, signal: 0.5,
  });
  const ds = loadDataset(dir);
  const spec = defaultSpec(4, 5, 2);
  spec.filters = 2;
  spec.fcUnits = 4;
  let aborted = false;
  for (let seed = 0; seed < 40 && !aborted; seed++) {
    try {
      const net = new Network(spec, new Rng(seed));
      train(ds, net, { ...defaultTrainSpec, epochs: 1, seed });
    } catch (err) {
      assert.match((err as Error).message, /class 1 absent/);
      aborted = true;
    }
  }
  assert.ok(aborted, "no split stranded the rare class");
});
