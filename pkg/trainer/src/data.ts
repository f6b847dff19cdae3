import * as fs from 'node:fs';
import { loadManifest, resolveImagePath } from './schema.js';
import { readImage } from './png.js';

/** In-memory multi-label dataset: one multi-hot row per image. */
export interface LabeledImages {
  images: Float32Array[]; // each width*height*3, RGB in [0,1]
  targets: number[][]; // images.length rows of classIds.length zeros/ones
  classIds: number[]; // ascending category ids backing the target columns
  width: number;
  height: number;
}

/** Multi-hot encode label id sets against a fixed class-id order. */
export function encodeTargets(labelSets: number[][], classIds: number[]): number[][] {
  const column = new Map(classIds.map((id, j) => [id, j]));
  return labelSets.map(labels => {
    const row = new Array(classIds.length).fill(0);
    for (const id of labels) {
      const j = column.get(id);
      if (j !== undefined) row[j] = 1;
    }
    return row;
  });
}

/**
 * Load every entry of a manifest into memory. The class list defaults to
 * the ascending ids present in the manifest; pass classIds to pin a label
 * space (e.g. to encode a test split against the training classes).
 */
export function loadManifestDataset(manifestPath: string, classIds?: number[]): LabeledImages {
  const manifest = loadManifest(manifestPath);
  if (manifest.entries.length === 0) throw new Error(`${manifestPath}: manifest has no entries`);

  const ids = classIds ?? [...new Set(manifest.entries.flatMap(e => e.labels))].sort((a, b) => a - b);

  const images: Float32Array[] = [];
  const labelSets: number[][] = [];
  let width = 0;
  let height = 0;
  for (const entry of manifest.entries) {
    const imagePath = resolveImagePath(manifestPath, entry);
    if (!fs.existsSync(imagePath)) throw new Error(`missing image file: ${imagePath}`);
    const image = readImage(imagePath);
    if (width === 0) {
      width = image.width;
      height = image.height;
    } else if (image.width !== width || image.height !== height) {
      throw new Error(
        `${imagePath}: size ${image.width}x${image.height} differs from first image ${width}x${height}`,
      );
    }
    images.push(image.data);
    labelSets.push(entry.labels);
  }
  return { images, targets: encodeTargets(labelSets, ids), classIds: ids, width, height };
}
