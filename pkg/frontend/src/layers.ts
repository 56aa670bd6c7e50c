/** Minimal CNN building blocks on flat Float64Arrays (CHW layout per sample).
 * Each layer exposes forward plus a backward that consumes the upstream
 * gradient and accumulates parameter gradients. */

import { Rng } from "./rng";

export interface ConvParams {
  inC: number;
  outC: number;
  k: number;          // kernel size (square, odd), same padding, stride 1
  w: Float64Array;    // [outC, inC, k, k]
  b: Float64Array;    // [outC]
  dw: Float64Array;
  db: Float64Array;
}

export function makeConv(inC: number, outC: number, k: number, rng: Rng): ConvParams {
  const w = new Float64Array(outC * inC * k * k);
  const scale = Math.sqrt(2 / (inC * k * k));
  for (let i = 0; i < w.length; i++) w[i] = scale * rng.gauss();
  return {
    inC, outC, k, w,
    b: new Float64Array(outC),
    dw: new Float64Array(w.length),
    db: new Float64Array(outC),
  };
}

export function convForward(p: ConvParams, x: Float64Array, h: number, wd: number,
                            out: Float64Array): void {
  const { inC, outC, k } = p;
  const pad = (k - 1) >> 1;
  out.fill(0);
  for (let oc = 0; oc < outC; oc++) {
    const outBase = oc * h * wd;
    for (let y = 0; y < h; y++) {
      for (let x0 = 0; x0 < wd; x0++) {
        let acc = p.b[oc];
        for (let ic = 0; ic < inC; ic++) {
          const inBase = ic * h * wd;
          const wBase = (oc * inC + ic) * k * k;
          for (let ky = 0; ky < k; ky++) {
            const yy = y + ky - pad;
            if (yy < 0 || yy >= h) continue;
            const rowBase = inBase + yy * wd;
            const wRow = wBase + ky * k;
            for (let kx = 0; kx < k; kx++) {
              const xx = x0 + kx - pad;
              if (xx < 0 || xx >= wd) continue;
              acc += p.w[wRow + kx] * x[rowBase + xx];
            }
          }
        }
        out[outBase + y * wd + x0] = acc;
      }
    }
  }
}

export function convBackward(p: ConvParams, x: Float64Array, h: number, wd: number,
                             gradOut: Float64Array, gradIn: Float64Array): void {
  const { inC, outC, k } = p;
  const pad = (k - 1) >> 1;
  gradIn.fill(0);
  for (let oc = 0; oc < outC; oc++) {
    const outBase = oc * h * wd;
    for (let y = 0; y < h; y++) {
      for (let x0 = 0; x0 < wd; x0++) {
        const g = gradOut[outBase + y * wd + x0];
        if (g === 0) continue;
        p.db[oc] += g;
        for (let ic = 0; ic < inC; ic++) {
          const inBase = ic * h * wd;
          const wBase = (oc * inC + ic) * k * k;
          for (let ky = 0; ky < k; ky++) {
            const yy = y + ky - pad;
            if (yy < 0 || yy >= h) continue;
            const rowBase = inBase + yy * wd;
            const wRow = wBase + ky * k;
            for (let kx = 0; kx < k; kx++) {
              const xx = x0 + kx - pad;
              if (xx < 0 || xx >= wd) continue;
              p.dw[wRow + kx] += g * x[rowBase + xx];
              gradIn[rowBase + xx] += g * p.w[wRow + kx];
            }
          }
        }
      }
    }
  }
}

export function reluForward(x: Float64Array, out: Float64Array): void {
  for (let i = 0; i < x.length; i++) out[i] = x[i] > 0 ? x[i] : 0;
}

export function reluBackward(x: Float64Array, gradOut: Float64Array,
                             gradIn: Float64Array): void {
  for (let i = 0; i < x.length; i++) gradIn[i] = x[i] > 0 ? gradOut[i] : 0;
}

/** 2x2 max pooling with stride 2 (floor output dims); argmax kept for backward. */
export function poolForward(x: Float64Array, c: number, h: number, wd: number,
                            out: Float64Array, argmax: Int32Array): void {
  const oh = h >> 1;
  const ow = wd >> 1;
  for (let ch = 0; ch < c; ch++) {
    const inBase = ch * h * wd;
    const outBase = ch * oh * ow;
    for (let y = 0; y < oh; y++) {
      for (let x0 = 0; x0 < ow; x0++) {
        let best = -Infinity;
        let bestIdx = -1;
        for (let dy = 0; dy < 2; dy++) {
          for (let dx = 0; dx < 2; dx++) {
            const idx = inBase + (2 * y + dy) * wd + 2 * x0 + dx;
            if (x[idx] > best) {
              best = x[idx];
              bestIdx = idx;
            }
          }
        }
        out[outBase + y * ow + x0] = best;
        argmax[outBase + y * ow + x0] = bestIdx;
      }
    }
  }
}

export function poolBackward(gradOut: Float64Array, argmax: Int32Array,
                             gradIn: Float64Array): void {
  gradIn.fill(0);
  for (let i = 0; i < gradOut.length; i++) {
    gradIn[argmax[i]] += gradOut[i];
  }
}

export interface DenseParams {
  inN: number;
  outN: number;
  w: Float64Array;    // [outN, inN]
  b: Float64Array;
  dw: Float64Array;
  db: Float64Array;
}

export function makeDense(inN: number, outN: number, rng: Rng,
                          scale?: number): DenseParams {
  const w = new Float64Array(outN * inN);
  const s = scale ?? Math.sqrt(2 / inN);
  for (let i = 0; i < w.length; i++) w[i] = s * rng.gauss();
  return {
    inN, outN, w,
    b: new Float64Array(outN),
    dw: new Float64Array(w.length),
    db: new Float64Array(outN),
  };
}

export function denseForward(p: DenseParams, x: Float64Array,
                             out: Float64Array): void {
  for (let o = 0; o < p.outN; o++) {
    let acc = p.b[o];
    const base = o * p.inN;
    for (let i = 0; i < p.inN; i++) acc += p.w[base + i] * x[i];
    out[o] = acc;
  }
}

export function denseBackward(p: DenseParams, x: Float64Array,
                              gradOut: Float64Array, gradIn: Float64Array): void {
  gradIn.fill(0);
  for (let o = 0; o < p.outN; o++) {
    const g = gradOut[o];
    p.db[o] += g;
    const base = o * p.inN;
    for (let i = 0; i < p.inN; i++) {
      p.dw[base + i] += g * x[i];
      gradIn[i] += g * p.w[base + i];
    }
  }
}

/** Inverted dropout: scales kept units by 1/(1-p) during training so the
 * evaluation path is the identity. */
export function dropoutMask(n: number, prob: number, rng: Rng): Float64Array {
  const mask = new Float64Array(n);
  const keep = 1 - prob;
  for (let i = 0; i < n; i++) {
    mask[i] = rng.float() < prob ? 0 : 1 / keep;
  }
  return mask;
}

export function softmax(z: Float64Array, out: Float64Array): void {
  let max = -Infinity;
  for (let i = 0; i < z.length; i++) if (z[i] > max) max = z[i];
  let sum = 0;
  for (let i = 0; i < z.length; i++) {
    out[i] = Math.exp(z[i] - max);
    sum += out[i];
  }
  for (let i = 0; i < z.length; i++) out[i] /= sum;
}
