import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    // model training is CPU-bound; parallel files would fight for cores
    fileParallelism: false,
    testTimeout: 30_000,
  },
});
