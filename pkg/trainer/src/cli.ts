/**
 * Command line trainer.
 *
 * Usage:
 *   node dist/cli.js train <dataset-dir> [--epochs N] [--seed N]
 *       [--freeze N] [--export-dir DIR] [--format bin|json]
 *
 * Trains StateNet, then PathNet with its attention stack initialized
 * from the trained StateNet, printing per-epoch losses. With
 * --export-dir, writes one prediction file per instance in a format the
 * planner's --prediction flag accepts.
 */

import { mkdirSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";
import { loadDataset } from "./dataset.js";
import { StateNet, trainStateNet } from "./statenet.js";
import { PathNet, trainPathNet } from "./pathnet.js";
import {
  predictInstance,
  writePredictionBinary,
  writePredictionJson,
} from "./predict.js";

export function main(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      epochs: { type: "string", default: "5" },
      seed: { type: "string", default: "0" },
      freeze: { type: "string", default: "2" },
      "export-dir": { type: "string" },
      format: { type: "string", default: "bin" },
    },
  });
  if (positionals.length !== 2 || positionals[0] !== "train") {
    console.error("usage: cli train <dataset-dir> [options]");
    return 64;
  }
  const epochs = parseInt(values.epochs!, 10);
  const seed = parseInt(values.seed!, 10);
  const freeze = parseInt(values.freeze!, 10);
  if (!["bin", "json"].includes(values.format!)) {
    console.error(`unknown format: ${values.format}`);
    return 64;
  }

  const data = loadDataset(positionals[1]);
  if (data.length === 0) {
    console.error("dataset is empty");
    return 2;
  }
  const m = data[0].graph.m;
  console.log(`loaded ${data.length} instances (m=${m})`);

  const stateNet = new StateNet({ m, seed });
  const sr = trainStateNet(stateNet, data, {
    epochs,
    backboneFreezeEpochs: freeze,
    shuffleSeed: seed + 1,
  });
  sr.epochLosses.forEach((l, i) =>
    console.log(`statenet epoch ${i + 1}/${epochs} loss ${l.toFixed(6)}`),
  );

  const pathNet = new PathNet({ m, seed });
  pathNet.initFromStateNet(stateNet);
  const pr = trainPathNet(pathNet, data, { epochs, shuffleSeed: seed + 2 });
  pr.epochLosses.forEach((l, i) =>
    console.log(`pathnet epoch ${i + 1}/${epochs} loss ${l.toFixed(6)}`),
  );

  const outDir = values["export-dir"];
  if (outDir) {
    mkdirSync(outDir, { recursive: true });
    for (const inst of data) {
      const pred = predictInstance(stateNet, pathNet, inst);
      if (values.format === "bin") {
        writePredictionBinary(pred, join(outDir, `${inst.id}.nntl`));
      } else {
        writePredictionJson(pred, join(outDir, `${inst.id}.json`));
      }
    }
    console.log(`exported ${data.length} predictions to ${outDir}`);
  }
  return 0;
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
