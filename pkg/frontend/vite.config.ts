import { defineConfig } from "vitest/config";

export default defineConfig({
  base: "/ui/",
  build: { outDir: "dist" },
  server: {
    proxy: {
      // dev server forwards API calls to a locally running service
      "^/(health|recipes|sessions|vocab).*": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
  },
});
