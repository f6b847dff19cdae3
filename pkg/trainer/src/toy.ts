/**
 * Fabricated toy datasets for experiments and tests.
 *
 * The pretraining set is written to disk as a COCO-style tree so the
 * augmentation pipeline's CLI can consume it: four classes, each drawn as a
 * distinctive black/white texture with identical 50% luminance, so class
 * identity lives purely in spatial pattern, never in color. Mock-generated
 * images, by contrast, are flat color quadrants, so a model only learns
 * color-sensitive features when augmented images are in the training mix.
 *
 * The transfer sets are built in memory: disjoint classes whose flat-color
 * images are jittered around per-class base colors.
 */

import { execFileSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as path from 'node:path';
import { LabeledImages, encodeTargets } from './data.js';
import { writeImage } from './png.js';
import { mulberry32 } from './util.js';

export const IMAGE_SIZE = 16;

export interface ToyClass {
  id: number;
  name: string;
  supercategory: string;
}

// real COCO ids/names so the word-vector fixture covers them
export const PRETRAIN_CLASSES: ToyClass[] = [
  { id: 18, name: 'dog', supercategory: 'animal' },
  { id: 17, name: 'cat', supercategory: 'animal' },
  { id: 3, name: 'car', supercategory: 'vehicle' },
  { id: 6, name: 'bus', supercategory: 'vehicle' },
];

export const TRANSFER_CLASS_IDS = [59, 62, 72]; // pizza, chair, tv

const CAPTION_TEMPLATES = [
  'a photo of a NAME in the park',
  'a NAME near a tree on a sunny day',
];

/** One of four half-white textures; classIndex picks the pattern. */
function texturePixel(classIndex: number, x: number, y: number, phase: number): number {
  switch (classIndex) {
    case 0:
      return Math.floor((y + phase) / 2) % 2 === 0 ? 255 : 0; // horizontal stripes
    case 1:
      return Math.floor((x + phase) / 2) % 2 === 0 ? 255 : 0; // vertical stripes
    case 2:
      return (Math.floor((x + phase) / 4) + Math.floor((y + phase) / 4)) % 2 === 0 ? 255 : 0;
    default:
      return Math.floor((x + y + phase) / 2) % 2 === 0 ? 255 : 0; // diagonal stripes
  }
}

function textureImage(classIndex: number, phase: number, rand: () => number): Uint8Array {
  const rgb = new Uint8Array(IMAGE_SIZE * IMAGE_SIZE * 3);
  for (let y = 0; y < IMAGE_SIZE; y++) {
    for (let x = 0; x < IMAGE_SIZE; x++) {
      let v = texturePixel(classIndex, x, y, phase);
      if (rand() < 0.03) v = 255 - v; // salt-and-pepper variety
      const i = (y * IMAGE_SIZE + x) * 3;
      rgb[i] = rgb[i + 1] = rgb[i + 2] = v;
    }
  }
  return rgb;
}

/**
 * Write a 4-class textured toy COCO tree (images/, annotations.json,
 * config.json) that the augmentation CLI can build from. Returns the
 * config path. vectorsPath must point at a word-vector file.
 */
export function writePretrainTree(root: string, vectorsPath: string, imagesPerClass = 6): string {
  fs.mkdirSync(path.join(root, 'images'), { recursive: true });
  const rand = mulberry32(0x70b0);

  const images: object[] = [];
  const annotations: object[] = [];
  let annId = 0;
  for (let c = 0; c < PRETRAIN_CLASSES.length; c++) {
    for (let k = 0; k < imagesPerClass; k++) {
      const imageId = c * imagesPerClass + k + 1;
      const fileName = `images/orig_${String(imageId).padStart(6, '0')}.png`;
      writeImage(path.join(root, fileName), IMAGE_SIZE, IMAGE_SIZE, textureImage(c, k, rand));
      images.push({ id: imageId, file_name: fileName, width: IMAGE_SIZE, height: IMAGE_SIZE });
      for (const template of CAPTION_TEMPLATES) {
        annotations.push({
          id: ++annId,
          image_id: imageId,
          caption: template.replace('NAME', PRETRAIN_CLASSES[c].name),
        });
      }
      annotations.push({ id: ++annId, image_id: imageId, category_id: PRETRAIN_CLASSES[c].id });
    }
  }
  const doc = {
    images,
    annotations,
    categories: PRETRAIN_CLASSES.map(c => ({
      id: c.id,
      name: c.name,
      supercategory: c.supercategory,
    })),
  };
  fs.writeFileSync(path.join(root, 'annotations.json'), JSON.stringify(doc, null, 2));

  const config = {
    dataset: 'annotations.json',
    embeddings: path.resolve(vectorsPath),
    images_root: '.',
    out_dir: 'out',
    ratio: 1.0,
    seed: 42,
    image_width: IMAGE_SIZE,
    image_height: IMAGE_SIZE,
    backend: { kind: 'mock' },
  };
  const configPath = path.join(root, 'config.json');
  fs.writeFileSync(configPath, JSON.stringify(config, null, 2));
  return configPath;
}

/** Generate the deterministic word-vector fixture once; reuse across runs. */
export function ensureVectors(vectorsPath: string): string {
  if (!fs.existsSync(vectorsPath)) {
    fs.mkdirSync(path.dirname(vectorsPath), { recursive: true });
    execFileSync('python3', [
      '-c',
      `from semaug.demo import write_vector_file; write_vector_file(${JSON.stringify(vectorsPath)})`,
    ]);
  }
  return vectorsPath;
}

/**
 * Run the augmentation CLI against a pretrain tree: one mock build at
 * ratio 1 and a ratio-0 remix. Returns paths to the two saved manifests
 * (augmented and originals-only) over the same generated images.
 */
export function buildPretrainManifests(
  configPath: string,
  runSeed: number,
  outDir: string,
): { augmented: string; baseline: string } {
  const run = (args: string[]) =>
    execFileSync('python3', ['-m', 'semaug.cli', ...args], { stdio: 'pipe' });

  run(['build', '--config', configPath, '--seed', String(runSeed), '--out', outDir]);
  const augmented = path.join(outDir, 'manifest_r1.json');
  fs.copyFileSync(path.join(outDir, 'manifest.json'), augmented);

  run(['mix', '--config', configPath, '--seed', String(runSeed), '--ratio', '0', '--out', outDir]);
  const baseline = path.join(outDir, 'manifest_r0.json');
  fs.copyFileSync(path.join(outDir, 'manifest.json'), baseline);
  return { augmented, baseline };
}

/** Flat-color images jittered around a base color; single-label multi-hot. */
export function makeFlatColorSet(
  classes: { id: number; base: [number, number, number] }[],
  perClass: number,
  jitter: number,
  seed: number,
): LabeledImages {
  const rand = mulberry32(seed);
  const images: Float32Array[] = [];
  const labelSets: number[][] = [];
  for (const cls of classes) {
    for (let k = 0; k < perClass; k++) {
      const color = cls.base.map(v =>
        Math.min(255, Math.max(0, Math.round(v + (rand() * 2 - 1) * jitter))),
      );
      const data = new Float32Array(IMAGE_SIZE * IMAGE_SIZE * 3);
      for (let i = 0; i < IMAGE_SIZE * IMAGE_SIZE; i++) {
        data[i * 3] = color[0] / 255;
        data[i * 3 + 1] = color[1] / 255;
        data[i * 3 + 2] = color[2] / 255;
      }
      images.push(data);
      labelSets.push([cls.id]);
    }
  }
  const classIds = classes.map(c => c.id).sort((a, b) => a - b);
  return {
    images,
    targets: encodeTargets(labelSets, classIds),
    classIds,
    width: IMAGE_SIZE,
    height: IMAGE_SIZE,
  };
}

/** Flat-color images where each class is a union of color modes. */
export function makeModalColorSet(
  classes: { id: number; modes: [number, number, number][] }[],
  perMode: number,
  jitter: number,
  seed: number,
): LabeledImages {
  const rand = mulberry32(seed);
  const images: Float32Array[] = [];
  const labelSets: number[][] = [];
  for (const cls of classes) {
    for (const mode of cls.modes) {
      for (let k = 0; k < perMode; k++) {
        const color = mode.map(v =>
          Math.min(255, Math.max(0, Math.round(v + (rand() * 2 - 1) * jitter))),
        );
        const data = new Float32Array(IMAGE_SIZE * IMAGE_SIZE * 3);
        for (let i = 0; i < IMAGE_SIZE * IMAGE_SIZE; i++) {
          data[i * 3] = color[0] / 255;
          data[i * 3 + 1] = color[1] / 255;
          data[i * 3 + 2] = color[2] / 255;
        }
        images.push(data);
        labelSets.push([cls.id]);
      }
    }
  }
  const classIds = classes.map(c => c.id).sort((a, b) => a - b);
  return {
    images,
    targets: encodeTargets(labelSets, classIds),
    classIds,
    width: IMAGE_SIZE,
    height: IMAGE_SIZE,
  };
}

/**
 * Train/test splits of the 3-class transfer task. Each class pairs a color
 * with its RGB complement, so all class means collapse to the same gray and
 * no linear function of raw color separates them: the task is only solvable
 * through genuinely nonlinear color features, which the backbone develops
 * exactly when flat-color mock images were part of its pretraining classes.
 */
export function makeTransferSets(seed: number): { train: LabeledImages; test: LabeledImages } {
  const classes: { id: number; modes: [number, number, number][] }[] = [
    { id: TRANSFER_CLASS_IDS[0], modes: [[217, 51, 51], [38, 204, 204]] }, // red / cyan
    { id: TRANSFER_CLASS_IDS[1], modes: [[51, 217, 51], [204, 38, 204]] }, // green / magenta
    { id: TRANSFER_CLASS_IDS[2], modes: [[51, 51, 217], [204, 204, 38]] }, // blue / yellow
  ];
  return {
    train: makeModalColorSet(classes, 8, 10, seed * 2 + 1),
    test: makeModalColorSet(classes, 15, 10, seed * 2 + 2),
  };
}
