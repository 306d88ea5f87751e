import { describe, expect, it } from "vitest";
import { loadDataset, Instance } from "../src/dataset.js";
import {
  FULL_CHANNELS,
  PathNet,
  encoderChain,
  halve,
} from "../src/pathnet.js";
import { StateNet } from "../src/statenet.js";
import { TOY_DIR } from "./helpers.js";

describe("pathnet encoder geometry", () => {
  it("halves 200x200 down to a 6x6 bottleneck", () => {
    expect(encoderChain(200)).toEqual([200, 100, 50, 25, 12, 6]);
    expect(halve(200)).toBe(100);
    expect(halve(25)).toBe(12);
  });

  it("matches the full-scale 1024x6x6 bottleneck symbolically", () => {
    const sizes = encoderChain(200);
    const bottleneck = [
      FULL_CHANNELS[FULL_CHANNELS.length - 1],
      sizes[sizes.length - 1],
      sizes[sizes.length - 1],
    ];
    expect(bottleneck).toEqual([1024, 6, 6]);
  });
});

describe("pathnet forward pass", () => {
  it("produces an [H, W] probability map on a toy instance", () => {
    const inst = loadDataset(TOY_DIR)[0];
    const net = new PathNet({ m: inst.graph.m, seed: 3 });
    const p = net.forward(inst);
    const [, h, w] = inst.tensor.shape;
    expect(p.shape).toEqual([h, w]);
    const vals = p.dataSync();
    for (const v of vals) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
  });

  it("is resolution agnostic: a 200x200 input yields a 200x200 map", () => {
    const base = loadDataset(TOY_DIR)[0];
    const big: Instance = {
      ...base,
      tensor: {
        shape: [base.graph.m + 1, 200, 200],
        data: new Float32Array((base.graph.m + 1) * 200 * 200),
      },
    };
    const net = new PathNet({ m: base.graph.m, seed: 3 });
    const heat = net.predict(big);
    expect(heat.length).toBe(200 * 200);
  });

  it("adopts a StateNet's attention stack", () => {
    const inst = loadDataset(TOY_DIR)[0];
    const s = new StateNet({ m: inst.graph.m, seed: 11 });
    const p = new PathNet({ m: inst.graph.m, seed: 42 });
    p.initFromStateNet(s);
    for (let i = 0; i < p.gats.length; i++) {
      expect(p.gats[i].w.arraySync()).toEqual(s.gats[i].w.arraySync());
    }
    const wrong = new StateNet({ m: inst.graph.m + 1, seed: 11 });
    expect(() => p.initFromStateNet(wrong)).toThrow(/mismatch/);
  });
});
