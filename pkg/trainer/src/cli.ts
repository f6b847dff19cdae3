/**
 * Train a toy multi-label classifier on a build manifest and report metrics.
 *
 *   train-eval --manifest out/manifest.json [--annotations out/annotations.json]
 *              [--eval-manifest PATH] [--epochs 12] [--seed 0] [--out DIR]
 *
 * Writes metrics.json {mAP, accuracy, per_class_AP} and loss.csv to --out.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs } from 'node:util';
import { loadManifestDataset } from './data.js';
import { evaluate, train } from './model.js';
import { loadCategoryNames } from './schema.js';

export async function main(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      manifest: { type: 'string' },
      annotations: { type: 'string' },
      'eval-manifest': { type: 'string' },
      epochs: { type: 'string', default: '12' },
      seed: { type: 'string', default: '0' },
      out: { type: 'string', default: '.' },
    },
  });
  if (!values.manifest) {
    console.error('--manifest is required');
    return 2;
  }

  const trainData = loadManifestDataset(values.manifest);
  const { checkpoint, lossLog } = await train(trainData, {
    epochs: Number(values.epochs),
    seed: Number(values.seed),
  });

  const evalData = values['eval-manifest']
    ? loadManifestDataset(values['eval-manifest'], trainData.classIds)
    : trainData;
  const metrics = evaluate(checkpoint, evalData);

  fs.mkdirSync(values.out, { recursive: true });
  fs.writeFileSync(
    path.join(values.out, 'metrics.json'),
    JSON.stringify(metrics, null, 2) + '\n',
  );
  const csv = ['epoch,loss', ...lossLog.map((loss, i) => `${i + 1},${loss}`)].join('\n') + '\n';
  fs.writeFileSync(path.join(values.out, 'loss.csv'), csv);

  const names = values.annotations ? loadCategoryNames(values.annotations) : new Map<number, string>();
  const perClass = Object.entries(metrics.per_class_AP)
    .map(([id, ap]) => `${names.get(Number(id)) ?? id}=${ap.toFixed(3)}`)
    .join(' ');
  console.log(`mAP ${metrics.mAP.toFixed(4)}  accuracy ${metrics.accuracy.toFixed(4)}`);
  console.log(`per-class AP: ${perClass}`);
  return 0;
}

const isDirectRun = process.argv[1] && path.resolve(process.argv[1]) === path.resolve(new URL(import.meta.url).pathname);
if (isDirectRun) {
  main(process.argv.slice(2)).then(
    code => process.exit(code),
    err => {
      console.error(err instanceof Error ? err.message : err);
      process.exit(1);
    },
  );
}
