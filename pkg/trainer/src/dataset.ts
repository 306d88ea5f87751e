/**
 * Reader for the planner's exported training datasets.
 *
 * A dataset directory holds a manifest.json plus one directory per
 * instance containing:
 *  - tensor.bin / tensor.meta.json: (m+1, H, W) float32 workspace tensor
 *  - graph.json: heterogeneous automaton graph (state nodes, guard nodes,
 *    pooling node, directed links)
 *  - labels.bin / labels.meta.json: int32 path_mask (H, W) and state_mask
 *  - workspace.json / nba.json: source artifacts
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

export interface ArrayMeta {
  name: string;
  shape: number[];
  dtype: string;
  offset: number;
}

export interface NamedArray {
  shape: number[];
  data: Float32Array | Int32Array;
}

export interface HeteroGraph {
  /** n x 3: [is-initial, is-feasible-accepting, normalized distance]. */
  stateFeatures: number[][];
  /** k x m guard vectors with entries in {-1, 0, 1}. */
  edgeFeatures: number[][];
  /** Directed (src, dst) pairs over the combined node id space. */
  links: [number, number][];
  pooling: number;
  m: number;
}

export interface Instance {
  id: string;
  /** Flattened (m+1, H, W) workspace tensor. */
  tensor: NamedArray;
  graph: HeteroGraph;
  pathMask: NamedArray;
  stateMask: NamedArray;
}

export interface ManifestEntry {
  id: string;
  seed: number;
  expert_cost?: number;
  skipped?: string;
}

export class DatasetMissing extends Error {}
export class ShapeMismatch extends Error {}

/** Arrays from the binary payload plus its JSON sidecar. */
export function readBin(binPath: string, metaPath: string): Record<string, NamedArray> {
  let meta: { arrays: ArrayMeta[] };
  let raw: Buffer;
  try {
    meta = JSON.parse(readFileSync(metaPath, "utf-8"));
    raw = readFileSync(binPath);
  } catch (e) {
    throw new DatasetMissing(`cannot read ${binPath}: ${e}`);
  }
  const out: Record<string, NamedArray> = {};
  for (const a of meta.arrays) {
    const count = a.shape.reduce((x, y) => x * y, 1);
    if (a.offset + 4 * count > raw.length) {
      throw new ShapeMismatch(
        `${a.name}: needs ${a.offset + 4 * count} bytes, file has ${raw.length}`,
      );
    }
    const bytes = raw.buffer.slice(
      raw.byteOffset + a.offset,
      raw.byteOffset + a.offset + 4 * count,
    );
    const data =
      a.dtype === "<f4" ? new Float32Array(bytes) : new Int32Array(bytes);
    if (data.length !== count) {
      throw new ShapeMismatch(
        `${a.name}: expected ${count} entries, got ${data.length}`,
      );
    }
    out[a.name] = { shape: a.shape, data };
  }
  return out;
}

export function readGraph(path: string): HeteroGraph {
  const d = JSON.parse(readFileSync(path, "utf-8"));
  return {
    stateFeatures: d.state_features,
    edgeFeatures: d.edge_features,
    links: d.links,
    pooling: d.pooling,
    m: d.m,
  };
}

export function readManifest(dir: string): ManifestEntry[] {
  let text: string;
  try {
    text = readFileSync(join(dir, "manifest.json"), "utf-8");
  } catch (e) {
    throw new DatasetMissing(`no manifest in ${dir}: ${e}`);
  }
  return JSON.parse(text).instances;
}

export function loadInstance(dir: string, id: string): Instance {
  const d = join(dir, id);
  const tensor = readBin(join(d, "tensor.bin"), join(d, "tensor.meta.json"))
    .tensor;
  const labels = readBin(join(d, "labels.bin"), join(d, "labels.meta.json"));
  const graph = readGraph(join(d, "graph.json"));
  if (graph.stateFeatures.length !== labels.state_mask.shape[0]) {
    throw new ShapeMismatch(
      `${id}: graph has ${graph.stateFeatures.length} states, ` +
        `state_mask has ${labels.state_mask.shape[0]}`,
    );
  }
  return {
    id,
    tensor,
    graph,
    pathMask: labels.path_mask,
    stateMask: labels.state_mask,
  };
}

/** Every non-skipped instance in the dataset. */
export function loadDataset(dir: string): Instance[] {
  return readManifest(dir)
    .filter((e) => !e.skipped)
    .map((e) => loadInstance(dir, e.id));
}
