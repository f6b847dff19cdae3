import * as fs from 'node:fs';
import * as path from 'node:path';
import { z } from 'zod';

/** One training-list entry as written by the augmentation pipeline. */
export const manifestEntrySchema = z.object({
  image_file: z.string().min(1),
  labels: z.array(z.number().int().positive()),
  source: z.enum(['original', 'augmented']),
  strategy: z.string().nullable(),
  source_caption_id: z.number().int().nullable(),
});

export const manifestSchema = z.object({
  ratio: z.number().nonnegative(),
  run_seed: z.number().int().nonnegative(),
  entries: z.array(manifestEntrySchema),
});

export type ManifestEntry = z.infer<typeof manifestEntrySchema>;
export type Manifest = z.infer<typeof manifestSchema>;

/** The slice of a COCO-style document the trainer needs: category names. */
export const categorySchema = z.object({
  id: z.number().int().positive(),
  name: z.string().min(1),
  supercategory: z.string().min(1),
});

const annotationsSchema = z.object({
  categories: z.array(categorySchema).default([]),
});

export type Category = z.infer<typeof categorySchema>;

/** Parse manifest.json; entry image paths stay relative to the manifest dir. */
export function loadManifest(manifestPath: string): Manifest {
  const raw = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  return manifestSchema.parse(raw);
}

/** Resolve an entry's image path against the manifest's own directory. */
export function resolveImagePath(manifestPath: string, entry: ManifestEntry): string {
  return path.resolve(path.dirname(manifestPath), entry.image_file);
}

/** Read id → name for every category listed in a COCO-style document. */
export function loadCategoryNames(annotationsPath: string): Map<number, string> {
  const raw = JSON.parse(fs.readFileSync(annotationsPath, 'utf-8'));
  const doc = annotationsSchema.parse(raw);
  return new Map(doc.categories.map(c => [c.id, c.name]));
}
