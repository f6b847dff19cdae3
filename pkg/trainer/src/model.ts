import * as tf from '@tensorflow/tfjs';
import { LabeledImages } from './data.js';
import { EvalMetrics, computeMetrics } from './metrics.js';
import { mulberry32, shuffleInPlace } from './util.js';

/** A trained (or freshly initialized) model plus the label space it scores. */
export interface Checkpoint {
  model: tf.LayersModel;
  classIds: number[];
  width: number;
  height: number;
}

export interface TrainOptions {
  epochs: number;
  seed: number;
  learningRate?: number;
  batchSize?: number;
}

export interface TransferSpec {
  frozen?: boolean; // default true: only the new head receives updates
  newHeadClasses: number[];
  epochs: number;
  seed: number;
  learningRate?: number;
}

const DEFAULT_LEARNING_RATE = 0.02;
const DEFAULT_BATCH_SIZE = 8;

/** Two conv/pool blocks, global average pooling, and a sigmoid multi-label head. */
export function buildModel(width: number, height: number, numClasses: number, seed: number): tf.LayersModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [height, width, 3],
      filters: 8,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    }),
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(tf.layers.globalAveragePooling2d({}));
  model.add(
    tf.layers.dense({
      units: numClasses,
      activation: 'sigmoid',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
    }),
  );
  return model;
}

function toTensors(data: LabeledImages, order: number[]): { xs: tf.Tensor4D; ys: tf.Tensor2D } {
  const n = order.length;
  const pixels = new Float32Array(n * data.height * data.width * 3);
  for (let i = 0; i < n; i++) pixels.set(data.images[order[i]], i * data.images[0].length);
  const labels = new Float32Array(n * data.classIds.length);
  for (let i = 0; i < n; i++) labels.set(data.targets[order[i]], i * data.classIds.length);
  return {
    xs: tf.tensor4d(pixels, [n, data.height, data.width, 3]),
    ys: tf.tensor2d(labels, [n, data.classIds.length]),
  };
}

async function fitDeterministic(
  model: tf.LayersModel,
  data: LabeledImages,
  opts: TrainOptions,
): Promise<number[]> {
  const lossLog: number[] = [];
  if (opts.epochs === 0) return lossLog;

  // one seeded shuffle up front; fit itself runs with shuffling disabled
  const order = Array.from({ length: data.images.length }, (_, i) => i);
  shuffleInPlace(order, mulberry32(opts.seed ^ 0x5eed));
  const { xs, ys } = toTensors(data, order);
  try {
    await model.fit(xs, ys, {
      epochs: opts.epochs,
      batchSize: opts.batchSize ?? DEFAULT_BATCH_SIZE,
      shuffle: false,
      verbose: 0,
      callbacks: {
        onEpochEnd: (_epoch, logs) => {
          lossLog.push(logs?.loss as number);
        },
      },
    });
  } finally {
    xs.dispose();
    ys.dispose();
  }
  return lossLog;
}

/**
 * Train a fresh multi-label classifier on an in-memory dataset. Deterministic
 * for a given seed: initializers, the single data shuffle, and the optimizer
 * all derive from it.
 */
export async function train(
  data: LabeledImages,
  opts: TrainOptions,
): Promise<{ checkpoint: Checkpoint; lossLog: number[] }> {
  if (data.classIds.length < 2) {
    throw new Error(`need at least 2 classes, manifest has ${data.classIds.length}`);
  }
  const model = buildModel(data.width, data.height, data.classIds.length, opts.seed);
  model.compile({
    optimizer: tf.train.adam(opts.learningRate ?? DEFAULT_LEARNING_RATE),
    loss: 'binaryCrossentropy',
  });
  const lossLog = await fitDeterministic(model, data, opts);
  return {
    checkpoint: { model, classIds: data.classIds, width: data.width, height: data.height },
    lossLog,
  };
}

/** Score a dataset with a checkpoint; label spaces must match exactly. */
export function evaluate(checkpoint: Checkpoint, data: LabeledImages): EvalMetrics {
  if (
    data.classIds.length !== checkpoint.classIds.length ||
    data.classIds.some((id, i) => id !== checkpoint.classIds[i])
  ) {
    throw new Error(
      `label-space mismatch: checkpoint [${checkpoint.classIds}] vs dataset [${data.classIds}]`,
    );
  }
  const order = Array.from({ length: data.images.length }, (_, i) => i);
  const scores = tf.tidy(() => {
    const { xs, ys } = toTensors(data, order);
    ys.dispose();
    return (checkpoint.model.predict(xs) as tf.Tensor2D).arraySync();
  });
  return computeMetrics(scores, data.targets, data.classIds);
}

/**
 * Replace the classifier head and continue training on a new label space.
 * With frozen=true (the default) every layer below the head keeps its
 * weights bit-for-bit; only the new head learns. The backbone layers are
 * shared with the source checkpoint, so its trainable flags are mutated.
 */
export async function transfer(
  checkpoint: Checkpoint,
  data: LabeledImages,
  spec: TransferSpec,
): Promise<{ checkpoint: Checkpoint; metrics: EvalMetrics; lossLog: number[] }> {
  if (
    data.classIds.length !== spec.newHeadClasses.length ||
    data.classIds.some((id, i) => id !== spec.newHeadClasses[i])
  ) {
    throw new Error(
      `transfer dataset classes [${data.classIds}] do not match spec [${spec.newHeadClasses}]`,
    );
  }
  const frozen = spec.frozen ?? true;
  const source = checkpoint.model;
  const backboneOutput = source.layers[source.layers.length - 2].output as tf.SymbolicTensor;
  for (const layer of source.layers.slice(0, -1)) layer.trainable = !frozen;

  const head = tf.layers.dense({
    units: spec.newHeadClasses.length,
    activation: 'sigmoid',
    kernelInitializer: tf.initializers.glorotUniform({ seed: spec.seed + 3 }),
  });
  const model = tf.model({
    inputs: source.inputs,
    outputs: head.apply(backboneOutput) as tf.SymbolicTensor,
  });
  model.compile({
    optimizer: tf.train.adam(spec.learningRate ?? DEFAULT_LEARNING_RATE),
    loss: 'binaryCrossentropy',
  });

  const lossLog = await fitDeterministic(model, data, {
    epochs: spec.epochs,
    seed: spec.seed,
    batchSize: DEFAULT_BATCH_SIZE,
  });
  const next: Checkpoint = {
    model,
    classIds: spec.newHeadClasses,
    width: data.width,
    height: data.height,
  };
  return { checkpoint: next, metrics: evaluate(next, data), lossLog };
}

/** Exact bytes of every weight tensor, concatenated in model order. */
export function weightBytes(model: tf.LayersModel): Buffer {
  const parts = model.getWeights().map(w => {
    const values = w.dataSync() as Float32Array;
    return Buffer.from(values.buffer.slice(values.byteOffset, values.byteOffset + values.byteLength));
  });
  return Buffer.concat(parts);
}

/** Bytes of everything except the final (head) layer's weights. */
export function backboneBytes(model: tf.LayersModel): Buffer {
  const parts = model.layers.slice(0, -1).flatMap(layer =>
    layer.getWeights().map(w => {
      const values = w.dataSync() as Float32Array;
      return Buffer.from(values.buffer.slice(values.byteOffset, values.byteOffset + values.byteLength));
    }),
  );
  return Buffer.concat(parts);
}
