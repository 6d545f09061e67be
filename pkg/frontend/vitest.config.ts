import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    testTimeout: 240_000,
    hookTimeout: 60_000,
    // episodes spawn engine subprocesses; keep files sequential
    fileParallelism: false,
  },
});
