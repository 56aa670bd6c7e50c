/** SGD-with-momentum training of the subarray classifier.
 *
 * Loss: the element-wise cross entropy
 *   ce = -(1/I) sum_i sum_p [ w_ip ln(k_ip) + (1 - w_ip) ln(1 - k_ip) ]
 * applied to the softmax outputs (as specified for the classifier), with the
 * standard multiclass cross entropy -ln k_label tracked alongside for
 * reporting. Learning rate starts at 0.01 and halves every 500 optimizer
 * iterations; momentum 0.9; 70% train / 30% validation split.
 */

import { Dataset, sampleView, splitIndices } from "./dataset";
import { Network } from "./network";
import { Rng } from "./rng";

export interface TrainSpec {
  lr: number;
  momentum: number;
  lrHalvingIterations: number;
  batchSize: number;
  epochs: number;
  valFraction: number;
  seed: number;
  /** Global gradient-norm clip per batch; the element-wise cross entropy
   * otherwise drives a confidence runaway through its 1/(1-k) repulsion. */
  clipNorm: number;
  /** Stop once validation accuracy reaches this level (1.1 = never). */
  targetValAccuracy: number;
}

export const defaultTrainSpec: TrainSpec = {
  lr: 0.01,
  momentum: 0.9,
  lrHalvingIterations: 500,
  batchSize: 64,
  epochs: 30,
  valFraction: 0.3,
  seed: 1,
  clipNorm: 1.0,
  targetValAccuracy: 1.1,
};

export interface EpochStats {
  epoch: number;
  trainAccuracy: number;
  valAccuracy: number;
  loss: number;          // element-wise cross entropy (training loss)
  multiclassLoss: number; // standard -ln k_label, reported for comparison
  lr: number;
}

export interface TrainResult {
  network: Network;
  curves: EpochStats[];
  trainIndices: number[];
  valIndices: number[];
}

// probability clamp: keeps the 1/(1-k) factor of the element-wise cross
// entropy bounded when a class saturates
const EPS = 1e-6;

/** dLoss/dlogits for the element-wise cross entropy through the softmax. */
function lossGradient(probs: Float64Array, label: number, nSamples: number,
                      grad: Float64Array): { loss: number; mc: number } {
  const p = probs.length;
  let loss = 0;
  // dL/dk_q
  const gk = new Float64Array(p);
  for (let q = 0; q < p; q++) {
    const k = Math.min(Math.max(probs[q], EPS), 1 - EPS);
    const w = q === label ? 1 : 0;
    loss -= w * Math.log(k) + (1 - w) * Math.log(1 - k);
    gk[q] = (-(w / k) + (1 - w) / (1 - k)) / nSamples;
  }
  // chain through softmax: dL/dz_r = k_r (gk_r - sum_q gk_q k_q)
  let dot = 0;
  for (let q = 0; q < p; q++) dot += gk[q] * probs[q];
  for (let r = 0; r < p; r++) grad[r] = probs[r] * (gk[r] - dot);
  const mc = -Math.log(Math.min(Math.max(probs[label], EPS), 1 - EPS));
  return { loss: loss / nSamples, mc };
}

interface Momentum {
  vw: Float64Array;
  vb: Float64Array;
}

export function train(ds: Dataset, net: Network, spec: TrainSpec): TrainResult {
  if (ds.empty) throw new Error("cannot train on an empty dataset");
  const rng = new Rng(spec.seed);
  const { train: trainIdx, val: valIdx } = splitIndices(
    ds.manifest.sample_count, spec.valFraction, (a) => rng.shuffle(a));
  // every class observed in the dataset must survive into the training split
  const observed = new Set<number>(ds.labels);
  const present = new Set<number>();
  for (const i of trainIdx) present.add(ds.labels[i]);
  for (const c of observed) {
    if (!present.has(c)) {
      throw new Error(`class ${c} absent from the training split`);
    }
  }
  const momentum: Momentum[] = net.params().map((p) => ({
    vw: new Float64Array(p.w.length),
    vb: new Float64Array(p.b.length),
  }));
  let iteration = 0;
  const curves: EpochStats[] = [];
  const order = trainIdx.slice();
  const grad = new Float64Array(ds.manifest.class_count);
  for (let epoch = 1; epoch <= spec.epochs; epoch++) {
    rng.shuffle(order);
    let hits = 0;
    let lossSum = 0;
    let mcSum = 0;
    let lr = spec.lr;
    for (let start = 0; start < order.length; start += spec.batchSize) {
      const batch = order.slice(start, start + spec.batchSize);
      net.zeroGrad();
      for (const idx of batch) {
        const x = net.toChw(sampleView(ds, idx));
        const probs = net.forward(x, true, rng);
        const label = ds.labels[idx];
        let best = 0;
        for (let i = 1; i < probs.length; i++) if (probs[i] > probs[best]) best = i;
        if (best === label) hits++;
        const { loss, mc } = lossGradient(probs, label, batch.length, grad);
        lossSum += loss;
        mcSum += mc;
        net.backward(x, grad);
      }
      let norm2 = 0;
      for (const p of net.params()) {
        for (let i = 0; i < p.dw.length; i++) norm2 += p.dw[i] * p.dw[i];
        for (let i = 0; i < p.db.length; i++) norm2 += p.db[i] * p.db[i];
      }
      const clipScale = Math.min(1, spec.clipNorm / Math.sqrt(norm2));
      lr = spec.lr * Math.pow(0.5, Math.floor(iteration / spec.lrHalvingIterations));
      const step = lr * clipScale;
      net.params().forEach((p, pi) => {
        const m = momentum[pi];
        for (let i = 0; i < p.w.length; i++) {
          m.vw[i] = spec.momentum * m.vw[i] - step * p.dw[i];
          p.w[i] += m.vw[i];
        }
        for (let i = 0; i < p.b.length; i++) {
          m.vb[i] = spec.momentum * m.vb[i] - step * p.db[i];
          p.b[i] += m.vb[i];
        }
      });
      iteration++;
    }
    const valAcc = accuracy(net, ds, valIdx);
    curves.push({
      epoch,
      trainAccuracy: hits / order.length,
      valAccuracy: valAcc,
      loss: lossSum / Math.ceil(order.length / spec.batchSize),
      multiclassLoss: mcSum / order.length,
      lr,
    });
    if (valAcc >= spec.targetValAccuracy) break;
  }
  return { network: net, curves, trainIndices: trainIdx, valIndices: valIdx };
}

export function accuracy(net: Network, ds: Dataset, indices: number[]): number {
  if (indices.length === 0) return 0;
  let hits = 0;
  for (const idx of indices) {
    if (net.predict(sampleView(ds, idx)) === ds.labels[idx]) hits++;
  }
  return hits / indices.length;
}

export function accuracyCsv(curves: EpochStats[]): string {
  const lines = ["epoch,train_acc,val_acc,loss,multiclass_loss,lr"];
  for (const c of curves) {
    lines.push(`${c.epoch},${c.trainAccuracy},${c.valAccuracy},${c.loss},`
      + `${c.multiclassLoss},${c.lr}`);
  }
  return lines.join("\n") + "\n";
}
