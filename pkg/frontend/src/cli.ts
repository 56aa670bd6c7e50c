/** Command-line entry: train a classifier on an exported dataset and
 * evaluate its robustness.
 *
 *   node dist/src/cli.js train --dataset DIR --out-dir OUT
 *        [--filters 256] [--epochs 30] [--batch 64] [--seed 1] [--target-acc 1.1]
 *   node dist/src/cli.js eval --dataset DIR --model OUT/model.json
 *        --out OUT/robustness.csv [--snr-test 0,10,20,inf] [--seed 1]
 */

import * as fs from "fs";
import * as path from "path";

import { loadDataset } from "./dataset";
import { defaultSpec, Network } from "./network";
import { Rng } from "./rng";
import { accuracyCsv, defaultTrainSpec, train } from "./train";
import { evaluateClean, evaluateRobustness, predictionsCsv, robustnessCsv }
  from "./evaluate";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got '${argv[i]}'`);
    }
    out.set(argv[i].slice(2), argv[i + 1]);
  }
  return out;
}

function cmdTrain(args: Map<string, string>): number {
  const ds = loadDataset(args.get("dataset")!);
  const outDir = args.get("out-dir")!;
  fs.mkdirSync(outDir, { recursive: true });
  const [n, npt] = ds.manifest.shape;
  const spec = defaultSpec(n, npt, ds.manifest.class_count);
  if (args.has("filters")) spec.filters = parseInt(args.get("filters")!, 10);
  const tspec = { ...defaultTrainSpec };
  if (args.has("epochs")) tspec.epochs = parseInt(args.get("epochs")!, 10);
  if (args.has("batch")) tspec.batchSize = parseInt(args.get("batch")!, 10);
  if (args.has("seed")) tspec.seed = parseInt(args.get("seed")!, 10);
  if (args.has("target-acc")) tspec.targetValAccuracy = parseFloat(args.get("target-acc")!);
  const net = new Network(spec, new Rng(tspec.seed));
  const result = train(ds, net, tspec);
  fs.writeFileSync(path.join(outDir, "accuracy.csv"), accuracyCsv(result.curves));
  fs.writeFileSync(path.join(outDir, "model.json"),
    JSON.stringify(net.serialize()));
  fs.writeFileSync(path.join(outDir, "val_indices.json"),
    JSON.stringify(result.valIndices));
  const last = result.curves[result.curves.length - 1];
  console.log(`trained ${result.curves.length} epochs: `
    + `train_acc=${last.trainAccuracy.toFixed(3)} `
    + `val_acc=${last.valAccuracy.toFixed(3)} -> ${outDir}`);
  return 0;
}

function cmdEval(args: Map<string, string>): number {
  const ds = loadDataset(args.get("dataset")!);
  const modelPath = args.get("model")!;
  const net = Network.deserialize(JSON.parse(fs.readFileSync(modelPath, "utf8")));
  const valPath = path.join(path.dirname(modelPath), "val_indices.json");
  const valIdx = fs.existsSync(valPath)
    ? JSON.parse(fs.readFileSync(valPath, "utf8")) as number[]
    : Array.from({ length: ds.manifest.sample_count }, (_, i) => i);
  const snrs = (args.get("snr-test") ?? "0,10,20,inf").split(",")
    .map((s) => (s.trim() === "inf" ? Infinity : parseFloat(s)));
  const seed = args.has("seed") ? parseInt(args.get("seed")!, 10) : 1;
  const rows = evaluateRobustness(ds, net, valIdx, snrs, seed);
  const outPath = args.get("out")!;
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, robustnessCsv(rows));
  const clean = evaluateClean(ds, net);
  fs.writeFileSync(path.join(path.dirname(outPath), "predictions.csv"),
    predictionsCsv(clean.perRealization));
  for (const r of rows) {
    console.log(`SNR_TEST ${r.snrTestDb} dB: accuracy ${r.accuracy.toFixed(3)} `
      + `mean SE ${r.meanSe.toFixed(3)}`);
  }
  console.log(`clean accuracy ${clean.accuracy.toFixed(3)}; `
    + `SE selected ${clean.meanSeSelected.toFixed(3)} vs label-best `
    + `${clean.meanSeLabelBest.toFixed(3)} -> ${outPath}`);
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const args = parseArgs(rest);
    if (command === "train") return cmdTrain(args);
    if (command === "eval") return cmdEval(args);
    console.error("usage: cli.js {train|eval} --flag value ...");
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
