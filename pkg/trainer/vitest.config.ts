import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 1500_000,
    hookTimeout: 120_000,
    // tfjs keeps global state; a single fork avoids duplicate backends
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});
