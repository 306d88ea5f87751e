/**
 * Graph attention layer over an explicit directed edge list.
 *
 * Single-head attention: for each edge j -> i the unnormalized score is
 * LeakyReLU(a^T [W h_j || W h_i]) with slope 0.2; scores are softmax
 * normalized over each target's incoming edges and used to average the
 * transformed source features. Dropout (rate 0.5) applies to the
 * attention weights during training.
 */

import * as tf from "@tensorflow/tfjs";

export const LEAKY_SLOPE = 0.2;
export const DROPOUT_RATE = 0.5;

export class GatLayer {
  w: tf.Variable;
  attSrc: tf.Variable;
  attDst: tf.Variable;
  readonly inDim: number;
  readonly outDim: number;

  constructor(inDim: number, outDim: number, seed: number) {
    this.inDim = inDim;
    this.outDim = outDim;
    const scale = Math.sqrt(2.0 / (inDim + outDim));
    this.w = tf.variable(
      tf.randomNormal([inDim, outDim], 0, scale, "float32", seed),
    );
    this.attSrc = tf.variable(
      tf.randomNormal([outDim, 1], 0, scale, "float32", seed + 1),
    );
    this.attDst = tf.variable(
      tf.randomNormal([outDim, 1], 0, scale, "float32", seed + 2),
    );
  }

  variables(): tf.Variable[] {
    return [this.w, this.attSrc, this.attDst];
  }

  /** Copy parameters from another layer of identical dimensions. */
  loadFrom(other: GatLayer): void {
    if (other.inDim !== this.inDim || other.outDim !== this.outDim) {
      throw new Error(
        `GAT shape mismatch: ${other.inDim}x${other.outDim} vs ` +
          `${this.inDim}x${this.outDim}`,
      );
    }
    this.w.assign(other.w);
    this.attSrc.assign(other.attSrc);
    this.attDst.assign(other.attDst);
  }

  /**
   * nodes: [N, inDim]; src/dst: int32 [E] edge endpoints; returns [N, outDim].
   * Nodes with no incoming edge keep a zero output row.
   */
  apply(
    nodes: tf.Tensor2D,
    src: tf.Tensor1D,
    dst: tf.Tensor1D,
    training = false,
  ): tf.Tensor2D {
    return tf.tidy(() => {
      const n = nodes.shape[0];
      const h = tf.matMul(nodes, this.w as tf.Tensor2D); // [N, out]
      const scoreSrc = tf.matMul(h, this.attSrc as tf.Tensor2D).squeeze([1]); // [N]
      const scoreDst = tf.matMul(h, this.attDst as tf.Tensor2D).squeeze([1]);
      const e = tf.leakyRelu(
        tf.add(tf.gather(scoreSrc, src), tf.gather(scoreDst, dst)),
        LEAKY_SLOPE,
      ); // [E]
      // per-target softmax; the detached per-segment max keeps exp stable
      const eMax = segmentMax(e as tf.Tensor1D, dst, n);
      const eShift = tf.exp(tf.sub(e, tf.gather(eMax, dst)));
      const denom = tf.unsortedSegmentSum(eShift, dst, n).add(1e-12);
      let alpha = tf.div(eShift, tf.gather(denom, dst)); // [E]
      if (training) {
        alpha = tf.dropout(alpha, DROPOUT_RATE);
      }
      const weighted = tf.mul(tf.gather(h, src), alpha.expandDims(1)); // [E, out]
      return tf.unsortedSegmentSum(weighted, dst, n) as tf.Tensor2D;
    });
  }
}

/** Per-segment maximum (no native op in tfjs); runs on typed arrays. */
export function segmentMax(
  values: tf.Tensor1D,
  segments: tf.Tensor1D,
  n: number,
): tf.Tensor1D {
  const v = values.dataSync();
  const s = segments.dataSync();
  const out = new Float32Array(n).fill(0);
  const seen = new Uint8Array(n);
  for (let i = 0; i < v.length; i++) {
    const k = s[i];
    if (!seen[k] || v[i] > out[k]) {
      out[k] = v[i];
      seen[k] = 1;
    }
  }
  return tf.tensor1d(out);
}
