import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { loadDataset } from "../src/dataset.js";
import { PathNet, trainPathNet } from "../src/pathnet.js";
import { StateNet, trainStateNet } from "../src/statenet.js";
import { predictInstance, writePredictionBinary } from "../src/predict.js";
import { TOY_DIR } from "./helpers.js";

const data = loadDataset(TOY_DIR);
const m = data[0].graph.m;

const stateNet = new StateNet({ m, seed: 0 });
const pathNet = new PathNet({ m, seed: 0 });

describe("training on the toy dataset", () => {
  it("statenet loss drops at least 20% in 5 epochs", () => {
    const before = stateNet.loss(data[0]).dataSync()[0];
    expect(Number.isFinite(before)).toBe(true);
    const r = trainStateNet(stateNet, data, {
      epochs: 5,
      batchSize: 10,
      backboneFreezeEpochs: 2,
      shuffleSeed: 1,
    });
    expect(r.epochLosses.length).toBe(5);
    const [first, last] = [r.epochLosses[0], r.epochLosses[4]];
    expect(last).toBeLessThanOrEqual(0.8 * first);
  });

  it("pathnet loss drops at least 20% in 5 epochs", () => {
    pathNet.initFromStateNet(stateNet);
    const r = trainPathNet(pathNet, data, {
      epochs: 5,
      batchSize: 10,
      learningRate: 0.001,
      shuffleSeed: 2,
    });
    const [first, last] = [r.epochLosses[0], r.epochLosses[4]];
    expect(last).toBeLessThanOrEqual(0.8 * first);
  });

  it("predictions have per-state and per-cell shapes", () => {
    const inst = data[0];
    const pred = predictInstance(stateNet, pathNet, inst);
    expect(pred.p.length).toBe(inst.graph.stateFeatures.length);
    const [, h, w] = inst.tensor.shape;
    expect(pred.heatmap.length).toBe(h * w);
    for (const v of [...pred.p, ...pred.heatmap]) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
  });

  it("an exported prediction drives a guided planner run", () => {
    const inst = data[0];
    const out = mkdtempSync(join(tmpdir(), "pred-"));
    const predPath = join(out, `${inst.id}.nntl`);
    writePredictionBinary(predictInstance(stateNet, pathNet, inst), predPath);

    const instDir = join(TOY_DIR, inst.id);
    const planPath = join(out, "plan.json");
    execFileSync(
      "ltlplan",
      [
        "plan",
        "--workspace", join(instDir, "workspace.json"),
        "--nba", join(instDir, "nba.json"),
        "--strategy", "guided",
        "--prediction", predPath,
        "--seed", "0",
        "--max-iters", "50000",
        "--out-plan", planPath,
        "--out-stats", join(out, "stats.json"),
      ],
      { stdio: "pipe" },
    );
    expect(existsSync(planPath)).toBe(true);
    const plan = JSON.parse(readFileSync(planPath, "utf-8"));
    expect(plan.prefix.length).toBeGreaterThan(0);
    expect(plan.suffix.length).toBeGreaterThan(0);
  });
});
