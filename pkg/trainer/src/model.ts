/**
 * Materializes an architecture document into a trainable tfjs model.
 *
 * Conventions fixed by the engine contract:
 * - Conv is size-preserving (padding "same", stride 1), ReLU activation.
 * - Pooling is 2x2 stride 2, valid padding (spatial dims floor-halve).
 * - A flatten + softmax dense head is appended after the listed layers.
 * - Trainable parameter count must equal the engine's param_count for the
 *   same document: conv (k*k*c_in+1)*c_out, dense (in+1)*units,
 *   batchnorm 2*c (gamma+beta only), pool/dropout/flatten free.
 */

import * as tf from "@tensorflow/tfjs";
import { ArchitectureDoc } from "./arch";

/** splitmix32: one seed per layer so weight init never aliases across depth. */
export function mixSeed(seed: number, salt: number): number {
  let z = (Math.imul(seed | 0, 0x9e3779b9) ^ Math.imul(salt + 1, 0x85ebca6b)) >>> 0;
  z = Math.imul(z ^ (z >>> 16), 0x21f0aaad) >>> 0;
  z = Math.imul(z ^ (z >>> 15), 0x735a2d97) >>> 0;
  z = (z ^ (z >>> 15)) >>> 0;
  return z % 0x7fffffff; // tfjs initializer seeds want a plain positive int
}

export function buildModel(doc: ArchitectureDoc, seed: number): tf.Sequential {
  const model = tf.sequential();
  let [h, w] = doc.input_shape;
  let flat = false;
  let first = true;

  const init = (salt: number) => tf.initializers.glorotUniform({ seed: mixSeed(seed, salt) });

  doc.layers.forEach((layer, i) => {
    const inputShape = first ? (doc.input_shape as number[]) : undefined;
    switch (layer.kind) {
      case "conv":
        if (flat) throw new Error(`layer ${i}: conv after flatten`);
        model.add(
          tf.layers.conv2d({
            filters: layer.out_channels,
            kernelSize: layer.kernel,
            padding: "same",
            activation: "relu",
            kernelInitializer: init(i),
            inputShape,
          })
        );
        break;
      case "maxpool":
      case "avgpool": {
        if (flat) throw new Error(`layer ${i}: pooling after flatten`);
        if (h < 2 || w < 2) throw new Error(`layer ${i}: pooling underflow at ${h}x${w}`);
        const opts = { poolSize: 2 as const, strides: 2 as const, inputShape };
        model.add(layer.kind === "maxpool" ? tf.layers.maxPooling2d(opts) : tf.layers.avgPooling2d(opts));
        h = Math.floor(h / 2);
        w = Math.floor(w / 2);
        break;
      }
      case "batchnorm":
        model.add(tf.layers.batchNormalization({ inputShape }));
        break;
      case "dropout":
        model.add(tf.layers.dropout({ rate: layer.rate, seed: mixSeed(seed, 1000 + i), inputShape }));
        break;
      case "fc":
        if (!flat) {
          model.add(tf.layers.flatten({ inputShape }));
          flat = true;
        }
        model.add(tf.layers.dense({ units: layer.units, activation: "relu", kernelInitializer: init(i) }));
        break;
    }
    first = false;
  });

  // implicit head
  if (!flat) {
    model.add(tf.layers.flatten({ inputShape: first ? (doc.input_shape as number[]) : undefined }));
  }
  model.add(
    tf.layers.dense({
      units: doc.num_classes,
      activation: "softmax",
      kernelInitializer: init(doc.layers.length),
    })
  );
  return model;
}

/** Trainable parameters only; countParams() would also count BN moving stats. */
export function countTrainableParams(model: tf.LayersModel): number {
  let total = 0;
  for (const weight of model.trainableWeights) {
    // weight shapes are concrete; the null-able batch dim never appears here
    total += weight.shape.reduce((a: number, b) => a * (b ?? 1), 1);
  }
  return total;
}

/** Build, count, dispose. Used by the param_count probe op. */
export function paramCount(doc: ArchitectureDoc, seed = 0): number {
  const model = buildModel(doc, seed);
  try {
    return countTrainableParams(model);
  } finally {
    model.dispose();
  }
}
