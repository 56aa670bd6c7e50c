/** The 13-layer subarray classifier.
 *
 * Realized sequence (layer numbers in comments):
 *   1 input (N x (N'+T) x 2, channels-first internally)
 *   2 conv 3x3        3 relu
 *   4 conv 3x3        5 maxpool 2x2/2      6 relu
 *   7 conv 3x3        8 maxpool 2x2/2
 *   9 fc (1024)      10 dropout 0.5
 *  11 fc (1024)      12 dropout 0.5
 *  13 output fc + softmax over the subarray classes
 *
 * Convolutions sit at layers {2,4,7}, relus at {3,6}, pooling at {5,8} and
 * the two 1024-unit fully connected layers at {9,11}, each followed by a
 * 0.5-dropout layer.
 */

import {
  ConvParams, DenseParams, convBackward, convForward, denseBackward,
  denseForward, dropoutMask, makeConv, makeDense, poolBackward, poolForward,
  reluBackward, reluForward, softmax,
} from "./layers";
import { Rng } from "./rng";

export interface CnnSpec {
  height: number;      // N
  width: number;       // N' + T
  channels: number;    // 2 (Re/Im)
  classes: number;
  filters: number;     // 256 per the reference architecture
  fcUnits: number;     // 1024
  dropout: number;     // 0.5
}

export function defaultSpec(height: number, width: number,
                            classes: number): CnnSpec {
  return { height, width, channels: 2, classes, filters: 256, fcUnits: 1024,
           dropout: 0.5 };
}

interface Dims {
  h1: number; w1: number;   // after conv2/conv4 (same padding)
  h2: number; w2: number;   // after pool5
  h3: number; w3: number;   // after pool8
  flat: number;
}

export class Network {
  spec: CnnSpec;
  dims: Dims;
  conv2: ConvParams;
  conv4: ConvParams;
  conv7: ConvParams;
  fc9: DenseParams;
  fc11: DenseParams;
  out13: DenseParams;
  // forward scratch (per sample)
  private a2: Float64Array;
  private a3: Float64Array;
  private a4: Float64Array;
  private a5: Float64Array;
  private arg5: Int32Array;
  private a6: Float64Array;
  private a7: Float64Array;
  private a8: Float64Array;
  private arg8: Int32Array;
  private a9: Float64Array;
  private a10: Float64Array;
  private a11: Float64Array;
  private a12: Float64Array;
  private z13: Float64Array;
  probs: Float64Array;
  private mask10: Float64Array | null = null;
  private mask12: Float64Array | null = null;
  // backward scratch
  private g: Float64Array[];

  constructor(spec: CnnSpec, rng: Rng) {
    this.spec = spec;
    const f = spec.filters;
    const h1 = spec.height;
    const w1 = spec.width;
    const h2 = h1 >> 1;
    const w2 = w1 >> 1;
    const h3 = h2 >> 1;
    const w3 = w2 >> 1;
    this.dims = { h1, w1, h2, w2, h3, w3, flat: f * h3 * w3 };
    this.conv2 = makeConv(spec.channels, f, 3, rng);
    this.conv4 = makeConv(f, f, 3, rng);
    this.conv7 = makeConv(f, f, 3, rng);
    this.fc9 = makeDense(this.dims.flat, spec.fcUnits, rng);
    this.fc11 = makeDense(spec.fcUnits, spec.fcUnits, rng);
    // small output-layer init keeps the softmax un-saturated at start
    this.out13 = makeDense(spec.fcUnits, spec.classes, rng, 0.01);
    this.a2 = new Float64Array(f * h1 * w1);
    this.a3 = new Float64Array(f * h1 * w1);
    this.a4 = new Float64Array(f * h1 * w1);
    this.a5 = new Float64Array(f * h2 * w2);
    this.arg5 = new Int32Array(f * h2 * w2);
    this.a6 = new Float64Array(f * h2 * w2);
    this.a7 = new Float64Array(f * h2 * w2);
    this.a8 = new Float64Array(f * h3 * w3);
    this.arg8 = new Int32Array(f * h3 * w3);
    this.a9 = new Float64Array(spec.fcUnits);
    this.a10 = new Float64Array(spec.fcUnits);
    this.a11 = new Float64Array(spec.fcUnits);
    this.a12 = new Float64Array(spec.fcUnits);
    this.z13 = new Float64Array(spec.classes);
    this.probs = new Float64Array(spec.classes);
    this.g = [
      new Float64Array(f * h1 * w1), new Float64Array(f * h1 * w1),
      new Float64Array(f * h1 * w1), new Float64Array(f * h2 * w2),
      new Float64Array(f * h2 * w2), new Float64Array(f * h2 * w2),
      new Float64Array(f * h3 * w3), new Float64Array(spec.fcUnits),
      new Float64Array(spec.fcUnits), new Float64Array(spec.fcUnits),
      new Float64Array(spec.fcUnits), new Float64Array(spec.classes),
      new Float64Array(spec.channels * h1 * w1),
    ];
  }

  params(): (ConvParams | DenseParams)[] {
    return [this.conv2, this.conv4, this.conv7, this.fc9, this.fc11, this.out13];
  }

  zeroGrad(): void {
    for (const p of this.params()) {
      p.dw.fill(0);
      p.db.fill(0);
    }
  }

  /** Input sample as HWC float32 (N, N'+T, 2); converted to CHW here. */
  toChw(sample: ArrayLike<number>): Float64Array {
    const { height, width, channels } = this.spec;
    const out = new Float64Array(channels * height * width);
    let i = 0;
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        for (let c = 0; c < channels; c++) {
          out[c * height * width + y * width + x] = sample[i++];
        }
      }
    }
    return out;
  }

  /** Forward pass; dropout masks are drawn only when training. */
  forward(x: Float64Array, training: boolean, rng?: Rng): Float64Array {
    const d = this.dims;
    const f = this.spec.filters;
    convForward(this.conv2, x, d.h1, d.w1, this.a2);
    reluForward(this.a2, this.a3);
    convForward(this.conv4, this.a3, d.h1, d.w1, this.a4);
    poolForward(this.a4, f, d.h1, d.w1, this.a5, this.arg5);
    reluForward(this.a5, this.a6);
    convForward(this.conv7, this.a6, d.h2, d.w2, this.a7);
    poolForward(this.a7, f, d.h2, d.w2, this.a8, this.arg8);
    denseForward(this.fc9, this.a8, this.a9);
    if (training && rng) {
      this.mask10 = dropoutMask(this.a9.length, this.spec.dropout, rng);
      for (let i = 0; i < this.a9.length; i++) this.a10[i] = this.a9[i] * this.mask10[i];
    } else {
      this.mask10 = null;
      this.a10.set(this.a9);
    }
    denseForward(this.fc11, this.a10, this.a11);
    if (training && rng) {
      this.mask12 = dropoutMask(this.a11.length, this.spec.dropout, rng);
      for (let i = 0; i < this.a11.length; i++) this.a12[i] = this.a11[i] * this.mask12[i];
    } else {
      this.mask12 = null;
      this.a12.set(this.a11);
    }
    denseForward(this.out13, this.a12, this.z13);
    softmax(this.z13, this.probs);
    return this.probs;
  }

  /** Backward pass from dLoss/dLogits; accumulates parameter gradients. */
  backward(x: Float64Array, gradLogits: Float64Array): void {
    const d = this.dims;
    const f = this.spec.filters;
    const [g2, g3, g4, g5, g6, g7, g8, g9, g10, g11, g12, gz, gx] = this.g;
    gz.set(gradLogits);
    denseBackward(this.out13, this.a12, gz, g12);
    if (this.mask12) for (let i = 0; i < g12.length; i++) g12[i] *= this.mask12[i];
    denseBackward(this.fc11, this.a10, g12, g10);
    if (this.mask10) for (let i = 0; i < g10.length; i++) g10[i] *= this.mask10[i];
    denseBackward(this.fc9, this.a8, g10, g8);
    poolBackward(g8, this.arg8, g7);
    convBackward(this.conv7, this.a6, d.h2, d.w2, g7, g6);
    reluBackward(this.a5, g6, g5);
    poolBackward(g5, this.arg5, g4);
    convBackward(this.conv4, this.a3, d.h1, d.w1, g4, g3);
    reluBackward(this.a2, g3, g2);
    convBackward(this.conv2, x, d.h1, d.w1, g2, gx);
  }

  predict(sample: ArrayLike<number>): number {
    const probs = this.forward(this.toChw(sample), false);
    let best = 0;
    for (let i = 1; i < probs.length; i++) if (probs[i] > probs[best]) best = i;
    return best;
  }

  serialize(): object {
    const dump = (p: ConvParams | DenseParams) => ({
      w: Array.from(p.w), b: Array.from(p.b),
    });
    return {
      spec: this.spec,
      conv2: dump(this.conv2), conv4: dump(this.conv4), conv7: dump(this.conv7),
      fc9: dump(this.fc9), fc11: dump(this.fc11), out13: dump(this.out13),
    };
  }

  static deserialize(data: any): Network {
    const net = new Network(data.spec as CnnSpec, new Rng(0));
    const load = (p: ConvParams | DenseParams, src: any) => {
      p.w.set(src.w);
      p.b.set(src.b);
    };
    load(net.conv2, data.conv2);
    load(net.conv4, data.conv4);
    load(net.conv7, data.conv7);
    load(net.fc9, data.fc9);
    load(net.fc11, data.fc11);
    load(net.out13, data.out13);
    return net;
  }
}
