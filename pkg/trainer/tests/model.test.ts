import { describe, expect, it } from 'vitest';
import { buildModel, backboneBytes, evaluate, train, transfer, weightBytes } from '../src/model.js';
import { makeFlatColorSet } from '../src/toy.js';

// well-separated flat colors: linearly separable from the first conv layer up
function separableTwoClass(seed: number, perClass = 8) {
  return makeFlatColorSet(
    [
      { id: 1, base: [220, 40, 40] },
      { id: 2, base: [40, 40, 220] },
    ],
    perClass,
    20,
    seed,
  );
}

describe('train', { timeout: 120_000 }, () => {
  it('drives training loss below 0.05 within 20 epochs on a separable set', async () => {
    const data = separableTwoClass(1);
    const { lossLog } = await train(data, { epochs: 20, seed: 1 });
    expect(lossLog.length).toBe(20);
    expect(lossLog[lossLog.length - 1]).toBeLessThan(0.05);
    console.log(`PASS separable 2-class final loss ${lossLog[lossLog.length - 1].toFixed(4)}`);
  });

  it('with epochs=0 the checkpoint equals its initialization', async () => {
    const data = separableTwoClass(2);
    const { checkpoint, lossLog } = await train(data, { epochs: 0, seed: 9 });
    expect(lossLog).toEqual([]);
    const fresh = buildModel(data.width, data.height, data.classIds.length, 9);
    expect(weightBytes(checkpoint.model).equals(weightBytes(fresh))).toBe(true);
  });

  it('produces identical loss curves for identical seeds', async () => {
    const data = separableTwoClass(3);
    const a = await train(data, { epochs: 5, seed: 7 });
    const b = await train(data, { epochs: 5, seed: 7 });
    expect(a.lossLog).toEqual(b.lossLog);
    expect(weightBytes(a.checkpoint.model).equals(weightBytes(b.checkpoint.model))).toBe(true);
  });

  it('different seeds give different initializations', async () => {
    const data = separableTwoClass(4);
    const a = await train(data, { epochs: 0, seed: 1 });
    const b = await train(data, { epochs: 0, seed: 2 });
    expect(weightBytes(a.checkpoint.model).equals(weightBytes(b.checkpoint.model))).toBe(false);
  });

  it('rejects a single-class dataset', async () => {
    const data = makeFlatColorSet([{ id: 5, base: [200, 0, 0] }], 4, 10, 1);
    await expect(train(data, { epochs: 1, seed: 0 })).rejects.toThrow(/at least 2 classes/);
  });
});

describe('evaluate', { timeout: 120_000 }, () => {
  it('scores the training set with metrics in range', async () => {
    const data = separableTwoClass(5);
    const { checkpoint } = await train(data, { epochs: 15, seed: 3 });
    const metrics = evaluate(checkpoint, data);
    expect(metrics.mAP).toBeGreaterThan(0.9);
    expect(metrics.mAP).toBeLessThanOrEqual(1);
    expect(metrics.accuracy).toBeGreaterThan(0.9);
  });

  it('rejects a label-space mismatch', async () => {
    const data = separableTwoClass(6);
    const { checkpoint } = await train(data, { epochs: 0, seed: 0 });
    const other = makeFlatColorSet(
      [
        { id: 11, base: [200, 0, 0] },
        { id: 12, base: [0, 0, 200] },
      ],
      2,
      10,
      1,
    );
    expect(() => evaluate(checkpoint, other)).toThrow(/label-space mismatch/);
  });
});

describe('transfer', { timeout: 120_000 }, () => {
  const newTask = (seed: number) =>
    makeFlatColorSet(
      [
        { id: 31, base: [40, 220, 40] },
        { id: 32, base: [220, 220, 40] },
        { id: 33, base: [220, 40, 220] },
      ],
      6,
      20,
      seed,
    );

  it('frozen transfer leaves every backbone weight bit-identical', async () => {
    const { checkpoint } = await train(separableTwoClass(7), { epochs: 8, seed: 11 });
    const before = backboneBytes(checkpoint.model);
    const result = await transfer(checkpoint, newTask(1), {
      newHeadClasses: [31, 32, 33],
      epochs: 10,
      seed: 11,
    });
    expect(backboneBytes(result.checkpoint.model).equals(before)).toBe(true);
    expect(result.checkpoint.classIds).toEqual([31, 32, 33]);
    expect(result.metrics.mAP).toBeGreaterThan(0);
    console.log('PASS frozen-backbone transfer kept backbone bytes identical');
  });

  it('unfrozen transfer changes backbone weights', async () => {
    const { checkpoint } = await train(separableTwoClass(8), { epochs: 8, seed: 13 });
    const before = backboneBytes(checkpoint.model);
    await transfer(checkpoint, newTask(2), {
      frozen: false,
      newHeadClasses: [31, 32, 33],
      epochs: 10,
      seed: 13,
    });
    expect(backboneBytes(checkpoint.model).equals(before)).toBe(false);
  });

  it('rejects a dataset that does not match the requested head classes', async () => {
    const { checkpoint } = await train(separableTwoClass(9), { epochs: 0, seed: 0 });
    await expect(
      transfer(checkpoint, newTask(3), { newHeadClasses: [1, 2], epochs: 1, seed: 0 }),
    ).rejects.toThrow(/do not match spec/);
  });
});
