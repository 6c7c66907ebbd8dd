import { defineConfig } from "vite";

export default defineConfig({
  server: {
    proxy: {
      "/session": "http://127.0.0.1:8000",
      "/agents": "http://127.0.0.1:8000",
    },
  },
  test: {
    environment: "jsdom",
    testTimeout: 120000,
    hookTimeout: 180000,
  },
});
