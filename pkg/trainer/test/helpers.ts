/** Shared test utilities: an independent parameter-count formula and a
 * validity-respecting random document generator for fuzzing the builder. */

import { ArchitectureDoc, Layer } from "../src/arch";
import { mulberry32 } from "../src/data";

/** Closed-form trainable parameter count, computed without building a model. */
export function paramFormula(doc: ArchitectureDoc): number {
  let [h, w, c] = doc.input_shape;
  let flat: number | null = null;
  let total = 0;
  for (const layer of doc.layers) {
    switch (layer.kind) {
      case "conv":
        total += (layer.kernel * layer.kernel * c + 1) * layer.out_channels;
        c = layer.out_channels;
        break;
      case "maxpool":
      case "avgpool":
        h = Math.floor(h / 2);
        w = Math.floor(w / 2);
        break;
      case "batchnorm":
        total += 2 * (flat === null ? c : flat);
        break;
      case "dropout":
        break;
      case "fc":
        if (flat === null) flat = h * w * c;
        total += (flat + 1) * layer.units;
        flat = layer.units;
        break;
    }
  }
  if (flat === null) flat = h * w * c;
  total += (flat + 1) * doc.num_classes;
  return total;
}

export function randomDoc(rand: () => number): ArchitectureDoc {
  const channels = [3, 8, 16, 32, 64];
  const kernels = [1, 3, 5, 7];
  const units = [16, 64, 128, 300];
  const rates = [0.1, 0.3, 0.5];
  const pick = <T>(xs: T[]) => xs[Math.floor(rand() * xs.length)];

  let h = 16 + 2 * Math.floor(rand() * 9); // 16..32
  let w = h;
  const c = pick([1, 3]);
  const doc: ArchitectureDoc = {
    input_shape: [h, w, c],
    num_classes: 2 + Math.floor(rand() * 9),
    layers: [],
  };
  const depth = Math.floor(rand() * 9); // 0..8
  let sawFc = false;
  for (let i = 0; i < depth; i++) {
    // first layer must be conv; no conv/pool once an fc appeared
    let kind: Layer["kind"];
    if (i === 0) {
      kind = "conv";
    } else if (sawFc) {
      kind = pick(["fc", "dropout"] as const);
    } else {
      kind = pick(["conv", "conv", "maxpool", "avgpool", "batchnorm", "dropout", "fc"] as const);
    }
    if ((kind === "maxpool" || kind === "avgpool") && (h < 2 || w < 2)) {
      kind = "conv";
    }
    switch (kind) {
      case "conv":
        doc.layers.push({ kind, out_channels: pick(channels), kernel: pick(kernels) });
        break;
      case "maxpool":
      case "avgpool":
        doc.layers.push({ kind });
        h = Math.floor(h / 2);
        w = Math.floor(w / 2);
        break;
      case "batchnorm":
        doc.layers.push({ kind });
        break;
      case "dropout":
        doc.layers.push({ kind, rate: pick(rates) });
        break;
      case "fc":
        doc.layers.push({ kind, units: pick(units) });
        sawFc = true;
        break;
    }
  }
  return doc;
}

export function seededDocs(seed: number, count: number): ArchitectureDoc[] {
  const rand = mulberry32(seed);
  return Array.from({ length: count }, () => randomDoc(rand));
}
