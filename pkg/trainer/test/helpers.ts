import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));
/** Shipped 50-instance toy dataset exported by the planner. */
export const TOY_DIR = join(HERE, "..", "..", "data", "toy50");
