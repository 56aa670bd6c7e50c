import assert from "node:assert/strict";
import { test } from "node:test";

import {
  convBackward, convForward, denseBackward, denseForward, makeConv, makeDense,
  poolBackward, poolForward, reluBackward, reluForward, softmax,
} from "../src/layers";
import { defaultSpec, Network } from "../src/network";
import { Rng } from "../src/rng";

function randArray(n: number, rng: Rng): Float64Array {
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = rng.gauss();
  return out;
}

test("conv forward matches a hand-computed 1x1-channel case", () => {
  const rng = new Rng(1);
  const p = makeConv(1, 1, 3, rng);
  p.w.set([0, 0, 0, 0, 1, 0, 0, 0, 0]); // identity kernel
  p.b[0] = 0.5;
  const x = Float64Array.from([1, 2, 3, 4, 5, 6, 7, 8, 9]);
  const out = new Float64Array(9);
  convForward(p, x, 3, 3, out);
  for (let i = 0; i < 9; i++) assert.ok(Math.abs(out[i] - (x[i] + 0.5)) < 1e-12);
});

test("conv gradients match central finite differences", () => {
  const rng = new Rng(2);
  const inC = 2, outC = 3, h = 4, w = 5;
  const p = makeConv(inC, outC, 3, rng);
  const x = randArray(inC * h * w, rng);
  const gOut = randArray(outC * h * w, rng);
  const out = new Float64Array(outC * h * w);
  const gIn = new Float64Array(inC * h * w);
  p.dw.fill(0); p.db.fill(0);
  convForward(p, x, h, w, out);
  convBackward(p, x, h, w, gOut, gIn);
  const loss = () => {
    convForward(p, x, h, w, out);
    let s = 0;
    for (let i = 0; i < out.length; i++) s += out[i] * gOut[i];
    return s;
  };
  const eps = 1e-6;
  for (const i of [0, 7, p.w.length - 1]) {
    const keep = p.w[i];
    p.w[i] = keep + eps; const up = loss();
    p.w[i] = keep - eps; const dn = loss();
    p.w[i] = keep;
    assert.ok(Math.abs((up - dn) / (2 * eps) - p.dw[i]) < 1e-6);
  }
  for (const i of [0, 11, x.length - 1]) {
    const keep = x[i];
    x[i] = keep + eps; const up = loss();
    x[i] = keep - eps; const dn = loss();
    x[i] = keep;
    assert.ok(Math.abs((up - dn) / (2 * eps) - gIn[i]) < 1e-6);
  }
});

test("dense gradients match central finite differences", () => {
  const rng = new Rng(3);
  const p = makeDense(7, 4, rng);
  const x = randArray(7, rng);
  const gOut = randArray(4, rng);
  const out = new Float64Array(4);
  const gIn = new Float64Array(7);
  p.dw.fill(0); p.db.fill(0);
  denseForward(p, x, out);
  denseBackward(p, x, gOut, gIn);
  const loss = () => {
    denseForward(p, x, out);
    let s = 0;
    for (let i = 0; i < 4; i++) s += out[i] * gOut[i];
    return s;
  };
  const eps = 1e-6;
  for (const i of [0, 13, p.w.length - 1]) {
    const keep = p.w[i];
    p.w[i] = keep + eps; const up = loss();
    p.w[i] = keep - eps; const dn = loss();
    p.w[i] = keep;
    assert.ok(Math.abs((up - dn) / (2 * eps) - p.dw[i]) < 1e-6);
  }
  for (let i = 0; i < 7; i++) {
    const keep = x[i];
    x[i] = keep + eps; const up = loss();
    x[i] = keep - eps; const dn = loss();
    x[i] = keep;
    assert.ok(Math.abs((up - dn) / (2 * eps) - gIn[i]) < 1e-6);
  }
});

test("max pooling halves dimensions and routes gradients to the argmax", () => {
  const x = Float64Array.from([
    1, 2, 3, 4,
    5, 6, 7, 8,
    9, 10, 11, 12,
    13, 14, 15, 16,
  ]);
  const out = new Float64Array(4);
  const arg = new Int32Array(4);
  poolForward(x, 1, 4, 4, out, arg);
  assert.deepEqual(Array.from(out), [6, 8, 14, 16]);
  const gIn = new Float64Array(16);
  poolBackward(Float64Array.from([1, 2, 3, 4]), arg, gIn);
  assert.equal(gIn[5], 1);
  assert.equal(gIn[7], 2);
  assert.equal(gIn[13], 3);
  assert.equal(gIn[15], 4);
});

test("relu forward/backward gate on the sign of the input", () => {
  const x = Float64Array.from([-1, 0, 2]);
  const out = new Float64Array(3);
  reluForward(x, out);
  assert.deepEqual(Array.from(out), [0, 0, 2]);
  const gIn = new Float64Array(3);
  reluBackward(x, Float64Array.from([5, 5, 5]), gIn);
  assert.deepEqual(Array.from(gIn), [0, 0, 5]);
});

test("softmax outputs sum to one within 1e-6 and are positive", () => {
  const rng = new Rng(4);
  for (let trial = 0; trial < 20; trial++) {
    const z = randArray(6, rng);
    for (let i = 0; i < z.length; i++) z[i] *= 10;
    const out = new Float64Array(6);
    softmax(z, out);
    let s = 0;
    for (const v of out) {
      assert.ok(v > 0);
      s += v;
    }
    assert.ok(Math.abs(s - 1) < 1e-6);
  }
});

test("full network backward matches finite differences at a few weights", () => {
  const spec = defaultSpec(8, 10, 4);
  spec.filters = 3;
  spec.fcUnits = 11;
  const rng = new Rng(5);
  const net = new Network(spec, rng);
  const sample = randArray(8 * 10 * 2, rng);
  const x = net.toChw(sample);
  // loss = element-wise CE toward class 1, no dropout (eval-mode forward)
  const label = 1;
  const lossOf = () => {
    const probs = net.forward(x, false);
    let l = 0;
    for (let q = 0; q < probs.length; q++) {
      const w = q === label ? 1 : 0;
      l -= w * Math.log(probs[q]) + (1 - w) * Math.log(1 - probs[q]);
    }
    return l;
  };
  const probs = net.forward(x, false);
  const grad = new Float64Array(spec.classes);
  const gk = new Float64Array(spec.classes);
  for (let q = 0; q < spec.classes; q++) {
    const w = q === label ? 1 : 0;
    gk[q] = -(w / probs[q]) + (1 - w) / (1 - probs[q]);
  }
  let dot = 0;
  for (let q = 0; q < spec.classes; q++) dot += gk[q] * probs[q];
  for (let r = 0; r < spec.classes; r++) grad[r] = probs[r] * (gk[r] - dot);
  net.zeroGrad();
  net.backward(x, grad);
  const eps = 1e-5;
  const checks: Array<[Float64Array, Float64Array, number]> = [
    [net.conv2.w, net.conv2.dw, 4],
    [net.conv7.w, net.conv7.dw, 10],
    [net.fc9.w, net.fc9.dw, 23],
    [net.out13.w, net.out13.dw, 7],
  ];
  for (const [w, dw, i] of checks) {
    const keep = w[i];
    w[i] = keep + eps; const up = lossOf();
    w[i] = keep - eps; const dn = lossOf();
    w[i] = keep;
    const num = (up - dn) / (2 * eps);
    assert.ok(Math.abs(num - dw[i]) < 1e-4 * Math.max(1, Math.abs(num)),
      `weight ${i}: numeric ${num} vs analytic ${dw[i]}`);
  }
});
