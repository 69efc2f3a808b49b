import { defineConfig } from "vitest/config";

// dev server proxies API calls to a locally running api service;
// the production bundle is static and same-origin with the API
export default defineConfig({
  server: {
    proxy: {
      "/api": {
        target: process.env.EVIDENTIA_API ?? "http://127.0.0.1:8000",
        changeOrigin: true,
        rewrite: (path) => path.replace(/^\/api/, ""),
      },
    },
  },
  build: {
    outDir: "dist",
    sourcemap: true,
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 120000,
    hookTimeout: 120000,
  },
});
