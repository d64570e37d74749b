import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    testTimeout: 90_000,
    hookTimeout: 90_000,
    pool: "forks",
  },
});
