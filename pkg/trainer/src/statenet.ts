/**
 * StateNet: predicts, for every automaton state, the probability that it
 * appears on the optimal plan.
 *
 * A small convolutional backbone (stand-in for a large pretrained image
 * encoder at toy scale) maps the workspace tensor to a 256-length feature
 * vector; the vector is fused into every graph node's features; five
 * sequential graph attention layers propagate over the automaton graph;
 * two fully connected layers and a softmax give a per-state on/off
 * distribution, trained with cross entropy against the expert state mask.
 * Training runs in two phases: backbone frozen, then fine-tuned.
 */

import * as tf from "@tensorflow/tfjs";
import { GatLayer } from "./gat.js";
import { HeteroGraph, Instance } from "./dataset.js";

export const MAP_FEATURES = 256;
export const GAT_HIDDEN = 64;
export const N_GAT_LAYERS = 5;

export interface StateNetConfig {
  m: number;
  seed?: number;
}

/** [one-hot node kind (3) | state features (3) | guard vector (m)]. */
export function nodeFeatureDim(m: number): number {
  return 3 + 3 + m;
}

export function buildNodeFeatures(g: HeteroGraph): tf.Tensor2D {
  const n = g.stateFeatures.length;
  const k = g.edgeFeatures.length;
  const dim = nodeFeatureDim(g.m);
  const rows: number[][] = [];
  for (let i = 0; i < n; i++) {
    rows.push([1, 0, 0, ...g.stateFeatures[i], ...new Array(g.m).fill(0)]);
  }
  for (let i = 0; i < k; i++) {
    rows.push([0, 1, 0, 0, 0, 0, ...g.edgeFeatures[i]]);
  }
  rows.push([0, 0, 1, ...new Array(3 + g.m).fill(0)]);
  return tf.tensor2d(rows, [n + k + 1, dim]);
}

export function graphEdges(g: HeteroGraph): {
  src: tf.Tensor1D;
  dst: tf.Tensor1D;
} {
  return {
    src: tf.tensor1d(g.links.map((l) => l[0]), "int32"),
    dst: tf.tensor1d(g.links.map((l) => l[1]), "int32"),
  };
}

class Backbone {
  conv: tf.Variable[] = [];
  dense: tf.Variable;
  denseB: tf.Variable;
  readonly channels = [8, 16, 32];

  constructor(m: number, seed: number) {
    let inC = m + 1;
    this.channels.forEach((outC, i) => {
      const scale = Math.sqrt(2.0 / (9 * inC));
      this.conv.push(
        tf.variable(
          tf.randomNormal([3, 3, inC, outC], 0, scale, "float32", seed + i),
        ),
      );
      inC = outC;
    });
    const scale = Math.sqrt(2.0 / (inC + MAP_FEATURES));
    this.dense = tf.variable(
      tf.randomNormal([inC, MAP_FEATURES], 0, scale, "float32", seed + 9),
    );
    this.denseB = tf.variable(tf.zeros([MAP_FEATURES]));
  }

  variables(): tf.Variable[] {
    return [...this.conv, this.dense, this.denseB];
  }

  /** tensor: [m+1, H, W] -> [MAP_FEATURES] (resolution agnostic). */
  apply(t: tf.Tensor3D): tf.Tensor1D {
    return tf.tidy(() => {
      let x = t.transpose([1, 2, 0]).expandDims(0) as tf.Tensor4D; // NHWC
      for (const w of this.conv) {
        x = tf.relu(tf.conv2d(x, w as tf.Tensor4D, 2, "same"));
      }
      const pooled = tf.mean(x, [1, 2]).squeeze([0]) as tf.Tensor1D;
      return tf.add(
        tf.matMul(pooled.expandDims(0), this.dense as tf.Tensor2D).squeeze([0]),
        this.denseB,
      ) as tf.Tensor1D;
    });
  }
}

export class StateNet {
  backbone: Backbone;
  gats: GatLayer[] = [];
  fc1: tf.Variable;
  fc1b: tf.Variable;
  fc2: tf.Variable;
  fc2b: tf.Variable;
  readonly m: number;

  constructor(cfg: StateNetConfig) {
    const seed = cfg.seed ?? 0;
    this.m = cfg.m;
    this.backbone = new Backbone(cfg.m, seed);
    let dim = nodeFeatureDim(cfg.m) + MAP_FEATURES;
    for (let i = 0; i < N_GAT_LAYERS; i++) {
      this.gats.push(new GatLayer(dim, GAT_HIDDEN, seed + 100 + 10 * i));
      dim = GAT_HIDDEN;
    }
    const s1 = Math.sqrt(2.0 / (GAT_HIDDEN + 32));
    this.fc1 = tf.variable(
      tf.randomNormal([GAT_HIDDEN, 32], 0, s1, "float32", seed + 200),
    );
    this.fc1b = tf.variable(tf.zeros([32]));
    this.fc2 = tf.variable(tf.randomNormal([32, 2], 0, 0.25, "float32", seed + 201));
    this.fc2b = tf.variable(tf.zeros([2]));
  }

  headVariables(): tf.Variable[] {
    return [
      ...this.gats.flatMap((g) => g.variables()),
      this.fc1,
      this.fc1b,
      this.fc2,
      this.fc2b,
    ];
  }

  variables(): tf.Variable[] {
    return [...this.backbone.variables(), ...this.headVariables()];
  }

  /** Per-state [P(off), P(on)] rows; shape [nStates, 2]. */
  forward(inst: Instance, training = false): tf.Tensor2D {
    return tf.tidy(() => {
      const [c, h, w] = inst.tensor.shape;
      const t = tf.tensor3d(inst.tensor.data as Float32Array, [c, h, w]);
      const mapVec = this.backbone.apply(t);
      const nodes = buildNodeFeatures(inst.graph);
      const nNodes = nodes.shape[0];
      const fused = tf.concat(
        [nodes, mapVec.expandDims(0).tile([nNodes, 1])],
        1,
      ) as tf.Tensor2D;
      const { src, dst } = graphEdges(inst.graph);
      let x = fused;
      for (const gat of this.gats) {
        x = tf.elu(gat.apply(x, src, dst, training)) as tf.Tensor2D;
      }
      const nStates = inst.graph.stateFeatures.length;
      const states = x.slice([0, 0], [nStates, GAT_HIDDEN]);
      const hid = tf.relu(
        tf.add(tf.matMul(states, this.fc1 as tf.Tensor2D), this.fc1b),
      );
      const logits = tf.add(tf.matMul(hid, this.fc2 as tf.Tensor2D), this.fc2b);
      return tf.softmax(logits, 1) as tf.Tensor2D;
    });
  }

  /** P(state on optimal plan) per automaton state. */
  predict(inst: Instance): Float32Array {
    const on = tf.tidy(() =>
      this.forward(inst, false).slice([0, 1], [-1, 1]).squeeze([1]),
    );
    const out = on.dataSync() as Float32Array;
    on.dispose();
    return out;
  }

  /** Mean cross entropy of the on/off softmax against the state mask. */
  loss(inst: Instance, training = false): tf.Scalar {
    return tf.tidy(() => {
      const probs = this.forward(inst, training);
      const mask = tf.tensor1d(
        Float32Array.from(inst.stateMask.data),
        "float32",
      );
      const onehot = tf.stack([tf.sub(1, mask), mask], 1);
      const ce = tf.neg(
        tf.sum(tf.mul(onehot, tf.log(tf.add(probs, 1e-7))), 1),
      );
      return tf.mean(ce) as tf.Scalar;
    });
  }
}

export interface TrainResult {
  epochLosses: number[];
}

export interface TrainOptions {
  epochs: number;
  batchSize?: number;
  learningRate?: number;
  /** Epochs with the convolutional backbone frozen (phase 1). */
  backboneFreezeEpochs?: number;
  shuffleSeed?: number;
}

export function trainStateNet(
  net: StateNet,
  data: Instance[],
  opts: TrainOptions,
): TrainResult {
  const batchSize = opts.batchSize ?? 128;
  const lr = opts.learningRate ?? 0.001;
  const freeze = opts.backboneFreezeEpochs ?? opts.epochs;
  const optimizer = tf.train.adam(lr);
  const epochLosses: number[] = [];
  const order = [...data.keys()];
  let rngState = (opts.shuffleSeed ?? 1) >>> 0;
  const nextRand = () => {
    // xorshift32 keeps shuffling reproducible across runs
    rngState ^= rngState << 13;
    rngState ^= rngState >>> 17;
    rngState ^= rngState << 5;
    return (rngState >>> 0) / 0xffffffff;
  };
  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    const vars =
      epoch < freeze ? net.headVariables() : net.variables();
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
