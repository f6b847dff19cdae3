/**
 * Multi-label evaluation metrics: per-class average precision (all-points
 * precision-recall area), mAP, and per-label binary accuracy at 0.5.
 */

export interface EvalMetrics {
  mAP: number;
  accuracy: number;
  // keyed by category id; only classes with at least one positive appear
  per_class_AP: Record<string, number>;
}

/**
 * Average precision of one class: area under the exact precision-recall
 * step curve. The curve has one point per distinct score threshold, so
 * tied scores form a single point and sample order never matters.
 *
 * Returns NaN when the class has no positive sample (AP is undefined).
 */
export function averagePrecision(scores: ArrayLike<number>, targets: ArrayLike<number>): number {
  if (scores.length !== targets.length) {
    throw new Error(`scores (${scores.length}) and targets (${targets.length}) differ in length`);
  }
  const order = Array.from({ length: scores.length }, (_, i) => i);
  order.sort((a, b) => scores[b] - scores[a]);

  let positives = 0;
  for (let i = 0; i < targets.length; i++) positives += targets[i] ? 1 : 0;
  if (positives === 0) return NaN;

  let tp = 0;
  let area = 0;
  let lastRecall = 0;
  for (let rank = 0; rank < order.length; rank++) {
    if (targets[order[rank]]) tp += 1;
    const isLast = rank === order.length - 1;
    if (!isLast && scores[order[rank + 1]] === scores[order[rank]]) continue; // same threshold
    const precision = tp / (rank + 1);
    const recall = tp / positives;
    area += (recall - lastRecall) * precision;
    lastRecall = recall;
  }
  return area;
}

/**
 * Fraction of (sample, label) cells where thresholding the score at 0.5
 * reproduces the target. Scores of exactly 0.5 count as positive.
 */
export function perLabelAccuracy(scores: number[][], targets: number[][]): number {
  let correct = 0;
  let total = 0;
  for (let i = 0; i < scores.length; i++) {
    for (let j = 0; j < scores[i].length; j++) {
      const predicted = scores[i][j] >= 0.5 ? 1 : 0;
      const want = targets[i][j] ? 1 : 0;
      if (predicted === want) correct += 1;
      total += 1;
    }
  }
  if (total === 0) throw new Error('cannot score an empty prediction matrix');
  return correct / total;
}

/**
 * Assemble EvalMetrics from per-sample score/target matrices (one column per
 * class, in classIds order). mAP averages the APs of classes that have at
 * least one positive; classes without positives are skipped entirely.
 */
export function computeMetrics(
  scores: number[][],
  targets: number[][],
  classIds: number[],
): EvalMetrics {
  const perClass: Record<string, number> = {};
  const aps: number[] = [];
  for (let j = 0; j < classIds.length; j++) {
    const ap = averagePrecision(
      scores.map(row => row[j]),
      targets.map(row => row[j]),
    );
    if (!Number.isNaN(ap)) {
      perClass[String(classIds[j])] = ap;
      aps.push(ap);
    }
  }
  if (aps.length === 0) throw new Error('no class has a positive sample; mAP undefined');
  return {
    mAP: aps.reduce((a, b) => a + b, 0) / aps.length,
    accuracy: perLabelAccuracy(scores, targets),
    per_class_AP: perClass,
  };
}
