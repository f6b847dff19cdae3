import * as fs from 'node:fs';
import { PNG } from 'pngjs';

/** Decoded image as float RGB in [0,1], row-major HWC. */
export interface ImageArray {
  width: number;
  height: number;
  data: Float32Array; // length = width * height * 3
}

/** Decode a PNG file to normalized RGB, dropping alpha. */
export function readImage(filePath: string): ImageArray {
  const png = PNG.sync.read(fs.readFileSync(filePath));
  const out = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[i * 3] = png.data[i * 4] / 255;
    out[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    out[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { width: png.width, height: png.height, data: out };
}

/** Write 8-bit RGB pixels (row-major, 3 bytes per pixel) as a PNG file. */
export function writeImage(filePath: string, width: number, height: number, rgb: Uint8Array): void {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[i * 3];
    png.data[i * 4 + 1] = rgb[i * 3 + 1];
    png.data[i * 4 + 2] = rgb[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(filePath, PNG.sync.write(png));
}
