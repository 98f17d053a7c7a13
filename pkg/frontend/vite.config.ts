import { defineConfig } from "vite";

// served by the backend under /ui/
export default defineConfig({
  base: "/ui/",
  build: {
    outDir: "dist",
    target: "es2022",
  },
  server: {
    proxy: {
      "/health": "http://127.0.0.1:8077",
      "/mesh": "http://127.0.0.1:8077",
      "/texture": "http://127.0.0.1:8077",
      "/classify": "http://127.0.0.1:8077",
    },
  },
});
