/**
 * Prediction export in the planner's on-disk formats.
 *
 * Binary: magic "NNTL1", little-endian header <III> = (n_states, rows,
 * cols), then n_states float32 state probabilities and rows*cols float32
 * heatmap values in row-major order. JSON: {n_states, grid, p, heatmap}
 * with the heatmap flattened row major.
 */

import { writeFileSync } from "node:fs";
import { Instance } from "./dataset.js";
import { StateNet } from "./statenet.js";
import { PathNet } from "./pathnet.js";

export interface PredictionArrays {
  p: Float32Array;
  heatmap: Float32Array;
  rows: number;
  cols: number;
}

export function predictInstance(
  stateNet: StateNet,
  pathNet: PathNet,
  inst: Instance,
): PredictionArrays {
  const p = stateNet.predict(inst);
  const heatmap = pathNet.predict(inst);
  const [, rows, cols] = inst.tensor.shape;
  if (heatmap.length !== rows * cols) {
    throw new Error(
      `heatmap has ${heatmap.length} cells, workspace is ${rows}x${cols}`,
    );
  }
  return { p: clamp01(p), heatmap: clamp01(heatmap), rows, cols };
}

function clamp01(a: Float32Array): Float32Array {
  return a.map((v) => Math.min(1, Math.max(0, v)));
}

export function writePredictionBinary(
  pred: PredictionArrays,
  path: string,
): void {
  const header = Buffer.alloc(5 + 12);
  header.write("NNTL1", 0, "ascii");
  header.writeUInt32LE(pred.p.length, 5);
  header.writeUInt32LE(pred.rows, 9);
  header.writeUInt32LE(pred.cols, 13);
  writeFileSync(
    path,
    Buffer.concat([
      header,
      Buffer.from(pred.p.buffer, pred.p.byteOffset, 4 * pred.p.length),
      Buffer.from(
        pred.heatmap.buffer,
        pred.heatmap.byteOffset,
        4 * pred.heatmap.length,
      ),
    ]),
  );
}

export function writePredictionJson(
  pred: PredictionArrays,
  path: string,
): void {
  writeFileSync(
    path,
    JSON.stringify({
      n_states: pred.p.length,
      grid: [pred.rows, pred.cols],
      p: Array.from(pred.p),
      heatmap: Array.from(pred.heatmap),
    }),
  );
}
