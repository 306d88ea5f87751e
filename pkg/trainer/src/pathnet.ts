/**
 * PathNet: predicts a per-cell probability heatmap over the workspace
 * marking cells likely to lie near the optimal geometric path.
 *
 * Encoder: five convolutional blocks (kernel 4, stride 2, pad 1), each
 * halving the spatial resolution; on a 200x200 workspace the feature maps
 * shrink 200 -> 100 -> 50 -> 25 -> 12 -> 6, giving a 6x6 bottleneck
 * (1024 channels at full scale; narrower channels at toy scale so the
 * whole network trains on a CPU). The automaton graph is embedded by the
 * same attention stack as StateNet - the layers can be initialized from a
 * trained StateNet - and the pooled graph vector is broadcast and
 * concatenated onto the bottleneck. A U-net style decoder upsamples back
 * to full resolution with skip concatenations and ends in a 1x1
 * convolution with a sigmoid, trained with binary cross entropy against
 * the dilated expert-path mask.
 */

import * as tf from "@tensorflow/tfjs";
import { GatLayer } from "./gat.js";
import { Instance } from "./dataset.js";
import {
  GAT_HIDDEN,
  MAP_FEATURES,
  N_GAT_LAYERS,
  StateNet,
  TrainOptions,
  TrainResult,
  buildNodeFeatures,
  graphEdges,
  nodeFeatureDim,
} from "./statenet.js";

export const N_ENC_BLOCKS = 5;
/** Encoder channel widths at full (paper-sized) scale. */
export const FULL_CHANNELS = [64, 128, 256, 512, 1024];
/** Narrow widths used for CPU-scale training and tests. */
export const TOY_CHANNELS = [8, 16, 24, 32, 32];

/** Output size of one stride-2, kernel-4, pad-1 block. */
export function halve(n: number): number {
  return Math.floor((n + 2 - 4) / 2) + 1;
}

/** Spatial sizes [input, after block 1, ..., bottleneck]. */
export function encoderChain(n: number): number[] {
  const sizes = [n];
  for (let i = 0; i < N_ENC_BLOCKS; i++) {
    sizes.push(halve(sizes[sizes.length - 1]));
  }
  return sizes;
}

export interface PathNetConfig {
  m: number;
  channels?: number[];
  seed?: number;
}

function convVar(
  k: number,
  inC: number,
  outC: number,
  seed: number,
): tf.Variable {
  const scale = Math.sqrt(2.0 / (k * k * inC));
  return tf.variable(
    tf.randomNormal([k, k, inC, outC], 0, scale, "float32", seed),
  );
}

export class PathNet {
  enc: tf.Variable[] = [];
  dec: tf.Variable[] = [];
  head: tf.Variable;
  headB: tf.Variable;
  gats: GatLayer[] = [];
  graphDense: tf.Variable;
  graphDenseB: tf.Variable;
  readonly m: number;
  readonly channels: number[];
  readonly decChannels: number[];

  constructor(cfg: PathNetConfig) {
    const seed = cfg.seed ?? 0;
    this.m = cfg.m;
    this.channels = cfg.channels ?? TOY_CHANNELS;
    if (this.channels.length !== N_ENC_BLOCKS) {
      throw new Error(`need ${N_ENC_BLOCKS} encoder channel widths`);
    }
    let inC = cfg.m + 1;
    this.channels.forEach((outC, i) => {
      this.enc.push(convVar(4, inC, outC, seed + i));
      inC = outC;
    });
    // The graph branch mirrors StateNet's fused node features so its
    // attention layers are shape compatible with a trained StateNet.
    const s = Math.sqrt(2.0 / (cfg.m + 1 + MAP_FEATURES));
    this.graphDense = tf.variable(
      tf.randomNormal([cfg.m + 1, MAP_FEATURES], 0, s, "float32", seed + 50),
    );
    this.graphDenseB = tf.variable(tf.zeros([MAP_FEATURES]));
    let dim = nodeFeatureDim(cfg.m) + MAP_FEATURES;
    for (let i = 0; i < N_GAT_LAYERS; i++) {
      this.gats.push(new GatLayer(dim, GAT_HIDDEN, seed + 100 + 10 * i));
      dim = GAT_HIDDEN;
    }
    // Decoder blocks consume [upsampled features || encoder skip].
    this.decChannels = [...this.channels.slice(0, -1).reverse(), 16];
    let prevC = this.channels[this.channels.length - 1] + GAT_HIDDEN;
    this.decChannels.forEach((outC, i) => {
      const skipC = i < N_ENC_BLOCKS - 1
        ? this.channels[N_ENC_BLOCKS - 2 - i]
        : cfg.m + 1;
      this.dec.push(convVar(3, prevC + skipC, outC, seed + 300 + i));
      prevC = outC;
    });
    this.head = convVar(1, prevC, 1, seed + 400);
    this.headB = tf.variable(tf.zeros([1]));
  }

  /** Copy the attention stack from a trained StateNet. */
  initFromStateNet(net: StateNet): void {
    if (net.m !== this.m) {
      throw new Error(`proposition count mismatch: ${net.m} vs ${this.m}`);
    }
    this.gats.forEach((g, i) => g.loadFrom(net.gats[i]));
  }

  encoderVariables(): tf.Variable[] {
    return [...this.enc];
  }

  variables(): tf.Variable[] {
    return [
      ...this.enc,
      ...this.dec,
      this.head,
      this.headB,
      this.graphDense,
      this.graphDenseB,
      ...this.gats.flatMap((g) => g.variables()),
    ];
  }

  /** Pooled automaton embedding; shape [GAT_HIDDEN]. */
  private graphVector(inst: Instance, training: boolean): tf.Tensor1D {
    return tf.tidy(() => {
      const [c, h, w] = inst.tensor.shape;
      const t = tf.tensor3d(inst.tensor.data as Float32Array, [c, h, w]);
      // Channel means stand in for the image encoder when fusing map
      // context into the graph nodes; cheap and resolution agnostic.
      const chans = tf.mean(t, [1, 2]).expandDims(0);
      const mapVec = tf.add(
        tf.matMul(chans, this.graphDense as tf.Tensor2D),
        this.graphDenseB,
      ).squeeze([0]) as tf.Tensor1D;
      const nodes = buildNodeFeatures(inst.graph);
      const fused = tf.concat(
        [nodes, mapVec.expandDims(0).tile([nodes.shape[0], 1])],
        1,
      ) as tf.Tensor2D;
      const { src, dst } = graphEdges(inst.graph);
      let x = fused;
      for (const gat of this.gats) {
        x = tf.elu(gat.apply(x, src, dst, training)) as tf.Tensor2D;
      }
      return x
        .slice([inst.graph.pooling, 0], [1, GAT_HIDDEN])
        .squeeze([0]) as tf.Tensor1D;
    });
  }

  /** Per-cell on-path probabilities; shape [H, W]. */
  forward(inst: Instance, training = false): tf.Tensor2D {
    return tf.tidy(() => {
      const [c, h, w] = inst.tensor.shape;
      const t = tf.tensor3d(inst.tensor.data as Float32Array, [c, h, w]);
      let x = t.transpose([1, 2, 0]).expandDims(0) as tf.Tensor4D; // NHWC
      const skips: tf.Tensor4D[] = [x];
      for (const wgt of this.enc) {
        x = tf.relu(
          tf.conv2d(x, wgt as tf.Tensor4D, 2, 1),
        ) as tf.Tensor4D;
        skips.push(x);
      }
      const g = this.graphVector(inst, training);
      const [, bh, bw] = [x.shape[0], x.shape[1], x.shape[2]];
      const gMap = g
        .reshape([1, 1, 1, GAT_HIDDEN])
        .tile([1, bh, bw, 1]) as tf.Tensor4D;
      x = tf.concat([x, gMap], 3) as tf.Tensor4D;
      for (let i = 0; i < this.dec.length; i++) {
        const skip = skips[N_ENC_BLOCKS - 1 - i];
        x = tf.image.resizeNearestNeighbor(x, [
          skip.shape[1],
          skip.shape[2],
        ]) as tf.Tensor4D;
        x = tf.relu(
          tf.conv2d(
            tf.concat([x, skip], 3) as tf.Tensor4D,
            this.dec[i] as tf.Tensor4D,
            1,
            "same",
          ),
        ) as tf.Tensor4D;
      }
      const logits = tf.add(
        tf.conv2d(x, this.head as tf.Tensor4D, 1, "same"),
        this.headB,
      );
      return tf.sigmoid(logits).squeeze([0, 3]) as tf.Tensor2D;
    });
  }

  /** Heatmap as a flat row-major Float32Array of length H*W. */
  predict(inst: Instance): Float32Array {
    const p = this.forward(inst, false);
    const out = p.dataSync() as Float32Array;
    p.dispose();
    return out;
  }

  /** Mean binary cross entropy against the expert path mask. */
  loss(inst: Instance, training = false): tf.Scalar {
    return tf.tidy(() => {
      const p = this.forward(inst, training);
      const [h, w] = inst.pathMask.shape;
      const y = tf.tensor2d(
        Float32Array.from(inst.pathMask.data),
        [h, w],
      );
      const pc = tf.clipByValue(p, 1e-7, 1 - 1e-7);
      const bce = tf.neg(
        tf.add(
          tf.mul(y, tf.log(pc)),
          tf.mul(tf.sub(1, y), tf.log(tf.sub(1, pc))),
        ),
      );
      return tf.mean(bce) as tf.Scalar;
    });
  }
}

export function trainPathNet(
  net: PathNet,
  data: Instance[],
  opts: TrainOptions,
): TrainResult {
  const batchSize = opts.batchSize ?? 8;
  const lr = opts.learningRate ?? 0.0001;
  const optimizer = tf.train.adam(lr);
  const epochLosses: number[] = [];
  const order = [...data.keys()];
  let rngState = (opts.shuffleSeed ?? 1) >>> 0;
  const nextRand = () => {
    rngState ^= rngState << 13;
    rngState ^= rngState >>> 17;
    rngState ^= rngState << 5;
    return (rngState >>> 0) / 0xffffffff;
  };
  const vars = net.variables();
  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(nextRand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let total = 0;
    for (let start = 0; start < order.length; start += batchSize) {
      const batch = order.slice(start, start + batchSize);
      const cost = optimizer.minimize(
        () =>
          tf.tidy(() => {
            const losses = batch.map((k) => net.loss(data[k], true));
            return tf.mean(tf.stack(losses)) as tf.Scalar;
          }),
        true,
        vars,
      ) as tf.Scalar;
      total += cost.dataSync()[0] * batch.length;
      cost.dispose();
    }
    epochLosses.push(total / order.length);
  }
  optimizer.dispose();
  return { epochLosses };
}
