/**
 * Architecture document handling.
 *
 * The engine sends architectures as plain JSON documents:
 *   {"input_shape":[H,W,C],"num_classes":K,"layers":[{"kind":...},...]}
 *
 * Layer kinds: conv (out_channels, kernel), maxpool, avgpool,
 * fc (units), dropout (rate), batchnorm. The flatten + softmax head is
 * implicit and added by the model builder, never listed in the document.
 */

export interface ConvLayer {
  kind: "conv";
  out_channels: number;
  kernel: number;
}
export interface PoolLayer {
  kind: "maxpool" | "avgpool";
}
export interface FcLayer {
  kind: "fc";
  units: number;
}
export interface DropoutLayer {
  kind: "dropout";
  rate: number;
}
export interface BatchnormLayer {
  kind: "batchnorm";
}

export type Layer = ConvLayer | PoolLayer | FcLayer | DropoutLayer | BatchnormLayer;

export interface ArchitectureDoc {
  input_shape: [number, number, number];
  num_classes: number;
  layers: Layer[];
}

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

/** Parse and validate a document object. Throws Error with a readable message. */
export function parseDocument(obj: unknown): ArchitectureDoc {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("architecture must be an object");
  }
  const doc = obj as Record<string, unknown>;
  const shape = doc.input_shape;
  if (!Array.isArray(shape) || shape.length !== 3 || !shape.every((d) => isInt(d) && d >= 1)) {
    throw new Error("input_shape must be three positive integers [H,W,C]");
  }
  if (!isInt(doc.num_classes) || (doc.num_classes as number) < 2) {
    throw new Error("num_classes must be an integer >= 2");
  }
  if (!Array.isArray(doc.layers)) {
    throw new Error("layers must be an array");
  }
  const layers: Layer[] = [];
  doc.layers.forEach((raw, i) => {
    if (typeof raw !== "object" || raw === null) {
      throw new Error(`layer ${i}: not an object`);
    }
    const l = raw as Record<string, unknown>;
    switch (l.kind) {
      case "conv":
        if (!isInt(l.out_channels) || (l.out_channels as number) < 1) {
          throw new Error(`layer ${i}: conv out_channels must be a positive integer`);
        }
        if (!isInt(l.kernel) || (l.kernel as number) < 1 || (l.kernel as number) % 2 === 0) {
          throw new Error(`layer ${i}: conv kernel must be a positive odd integer`);
        }
        layers.push({ kind: "conv", out_channels: l.out_channels as number, kernel: l.kernel as number });
        break;
      case "maxpool":
      case "avgpool":
        layers.push({ kind: l.kind });
        break;
      case "fc":
        if (!isInt(l.units) || (l.units as number) < 1) {
          throw new Error(`layer ${i}: fc units must be a positive integer`);
        }
        layers.push({ kind: "fc", units: l.units as number });
        break;
      case "dropout": {
        const rate = l.rate;
        if (typeof rate !== "number" || !(rate > 0 && rate < 1)) {
          throw new Error(`layer ${i}: dropout rate must be in (0,1)`);
        }
        layers.push({ kind: "dropout", rate });
        break;
      }
      case "batchnorm":
        layers.push({ kind: "batchnorm" });
        break;
      default:
        throw new Error(`layer ${i}: unknown kind ${JSON.stringify(l.kind)}`);
    }
  });
  return {
    input_shape: [shape[0], shape[1], shape[2]] as [number, number, number],
    num_classes: doc.num_classes as number,
    layers,
  };
}
