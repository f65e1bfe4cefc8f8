/**
 * Training of one evaluation request.
 *
 * Backend-owned choices (the engine does not dictate them, so they are
 * reported back in the diagnostics field of every response):
 *   optimizer Adam, learning rate 0.001, batch size 32, categorical
 *   cross-entropy loss, validation = last 10% of the training subset.
 *
 * Determinism: weight init and dropout are seeded per layer from the
 * request seed, the training order is a single seeded shuffle with
 * fit(shuffle: false), and the pure-JS CPU backend computes identically
 * across runs. Same request in, same report out.
 */

import * as tf from "@tensorflow/tfjs";
import { ArchitectureDoc } from "./arch";
import { buildModel, countTrainableParams, mixSeed } from "./model";
import { Dataset, loadDataset, mulberry32, selectAndSplit } from "./data";

const LEARNING_RATE = 0.001;
const BATCH_SIZE = 32;
export const VAL_SPLIT_NOTE = "last 10% of the training subset, fixed order before shuffling";

export interface EvalResult {
  val_accuracy: number;
  val_loss: number;
  wall_seconds: number;
  param_count: number;
  diagnostics: {
    optimizer: string;
    learning_rate: number;
    batch_size: number;
    val_split: string;
  };
}

function checkShapes(doc: ArchitectureDoc, ds: Dataset, name: string): void {
  const [h, w, c] = doc.input_shape;
  if (h !== ds.h || w !== ds.w || c !== ds.c) {
    throw new Error(
      `architecture input_shape [${h},${w},${c}] does not match dataset ${name} [${ds.h},${ds.w},${ds.c}]`
    );
  }
  if (doc.num_classes !== ds.numClasses) {
    throw new Error(
      `architecture num_classes ${doc.num_classes} does not match dataset ${name} (${ds.numClasses})`
    );
  }
}

function toTensors(
  images: Float32Array,
  labels: Uint8Array,
  count: number,
  ds: Dataset,
  order?: Uint32Array
): [tf.Tensor4D, tf.Tensor2D] {
  const px = ds.h * ds.w * ds.c;
  let imgArr = images;
  let labArr = labels;
  if (order) {
    imgArr = new Float32Array(count * px);
    labArr = new Uint8Array(count);
    for (let i = 0; i < count; i++) {
      imgArr.set(images.subarray(order[i] * px, (order[i] + 1) * px), i * px);
      labArr[i] = labels[order[i]];
    }
  }
  const x = tf.tensor4d(imgArr, [count, ds.h, ds.w, ds.c]);
  const y = tf.oneHot(tf.tensor1d(labArr, "int32"), ds.numClasses).toFloat() as tf.Tensor2D;
  return [x, y];
}

export async function runEvaluate(
  doc: ArchitectureDoc,
  epochs: number,
  dataset: string,
  subsetSize: number | null | undefined,
  seed: number
): Promise<EvalResult> {
  const started = process.hrtime.bigint();
  const ds = loadDataset(dataset);
  checkShapes(doc, ds, dataset);
  const split = selectAndSplit(ds, subsetSize);
  if (split.trainCount < 1) {
    throw new Error(`subset of ${subsetSize} leaves no training samples after the validation holdout`);
  }

  // one seeded shuffle of the training slice; fit() then keeps that order
  const rand = mulberry32(mixSeed(seed, 0x7a1e));
  const order = new Uint32Array(split.trainCount);
  for (let i = 0; i < order.length; i++) order[i] = i;
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    const t = order[i];
    order[i] = order[j];
    order[j] = t;
  }

  const [xTrain, yTrain] = toTensors(split.trainImages, split.trainLabels, split.trainCount, ds, order);
  const [xVal, yVal] = toTensors(split.valImages, split.valLabels, split.valCount, ds);
  const model = buildModel(doc, seed);
  model.compile({
    optimizer: tf.train.adam(LEARNING_RATE),
    loss: "categoricalCrossentropy",
    metrics: ["accuracy"],
  });
  const params = countTrainableParams(model);

  try {
    await model.fit(xTrain, yTrain, {
      epochs,
      batchSize: BATCH_SIZE,
      shuffle: false,
      verbose: 0,
    });
    const evaluated = model.evaluate(xVal, yVal, { batchSize: BATCH_SIZE }) as tf.Scalar[];
    const valLoss = (await evaluated[0].data())[0];
    const valAcc = (await evaluated[1].data())[0];
    evaluated.forEach((t) => t.dispose());
    const wall = Number(process.hrtime.bigint() - started) / 1e9;
    return {
      val_accuracy: valAcc,
      val_loss: valLoss,
      wall_seconds: wall,
      param_count: params,
      diagnostics: {
        optimizer: "adam",
        learning_rate: LEARNING_RATE,
        batch_size: BATCH_SIZE,
        val_split: VAL_SPLIT_NOTE,
      },
    };
  } finally {
    xTrain.dispose();
    yTrain.dispose();
    xVal.dispose();
    yVal.dispose();
    const optimizer = model.optimizer as tf.Optimizer | undefined;
    if (optimizer) optimizer.dispose();
    model.dispose();
  }
}
