import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 30_000,
    hookTimeout: 60_000,
    // one worker: the suite shares a single spawned service instance
    pool: "threads",
    poolOptions: { threads: { singleThread: true } },
  },
});
