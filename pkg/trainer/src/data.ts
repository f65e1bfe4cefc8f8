/**
 * Dataset loading.
 *
 * Three dataset refs are recognized, matching the engine's registry:
 *   fashion_mnist  28x28x1, 10 classes, IDX files under $OPENNAS_DATA_DIR/fashion_mnist
 *   cifar10        32x32x3, 10 classes, binary batches under $OPENNAS_DATA_DIR/cifar10
 *   synthetic      16x16x3,  4 classes, procedural (always available, no files)
 *
 * The synthetic set is deterministic: class-dependent oriented gratings plus
 * seeded noise, separable enough that a small CNN beats chance within a
 * couple of epochs. It exists so the full pipeline can be exercised without
 * dataset downloads.
 */

import * as fs from "fs";
import * as path from "path";

export interface Dataset {
  images: Float32Array; // count * h * w * c, row-major HWC, values in [0,1]
  labels: Uint8Array;
  count: number;
  h: number;
  w: number;
  c: number;
  numClasses: number;
}

export interface Split {
  trainImages: Float32Array;
  trainLabels: Uint8Array;
  trainCount: number;
  valImages: Float32Array;
  valLabels: Uint8Array;
  valCount: number;
}

const SYNTHETIC_COUNT = 4096;
const SYNTHETIC_SEED = 0x5eed;

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function makeSynthetic(): Dataset {
  const h = 16, w = 16, c = 3, numClasses = 4;
  const images = new Float32Array(SYNTHETIC_COUNT * h * w * c);
  const labels = new Uint8Array(SYNTHETIC_COUNT);
  const rand = mulberry32(SYNTHETIC_SEED);
  // class k: grating along one of four orientations, frequency rises with k
  const angles = [0, Math.PI / 2, Math.PI / 4, -Math.PI / 4];
  for (let n = 0; n < SYNTHETIC_COUNT; n++) {
    const k = n % numClasses;
    labels[n] = k;
    const angle = angles[k];
    const freq = (2 * Math.PI * (k + 2)) / w;
    const phase = rand() * 2 * Math.PI;
    const base = n * h * w * c;
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const u = x * Math.cos(angle) + y * Math.sin(angle);
        const signal = 0.5 + 0.35 * Math.sin(freq * u + phase);
        for (let ch = 0; ch < c; ch++) {
          const noise = (rand() - 0.5) * 0.3;
          let v = signal + noise;
          if (v < 0) v = 0;
          if (v > 1) v = 1;
          images[base + (y * w + x) * c + ch] = v;
        }
      }
    }
  }
  return { images, labels, count: SYNTHETIC_COUNT, h, w, c, numClasses };
}

function dataDir(): string {
  const dir = process.env.OPENNAS_DATA_DIR;
  if (!dir) {
    throw new Error("OPENNAS_DATA_DIR is not set; file-backed datasets are unavailable");
  }
  return dir;
}

function readIdxImages(file: string): { data: Uint8Array; count: number; rows: number; cols: number } {
  const buf = fs.readFileSync(file);
  if (buf.readUInt32BE(0) !== 2051) throw new Error(`${file}: not an IDX image file`);
  const count = buf.readUInt32BE(4);
  const rows = buf.readUInt32BE(8);
  const cols = buf.readUInt32BE(12);
  return { data: new Uint8Array(buf.buffer, buf.byteOffset + 16, count * rows * cols), count, rows, cols };
}

function readIdxLabels(file: string): Uint8Array {
  const buf = fs.readFileSync(file);
  if (buf.readUInt32BE(0) !== 2049) throw new Error(`${file}: not an IDX label file`);
  const count = buf.readUInt32BE(4);
  return new Uint8Array(buf.buffer, buf.byteOffset + 8, count);
}

function loadFashionMnist(): Dataset {
  const dir = path.join(dataDir(), "fashion_mnist");
  const img = readIdxImages(path.join(dir, "train-images-idx3-ubyte"));
  const labels = readIdxLabels(path.join(dir, "train-labels-idx1-ubyte"));
  const images = new Float32Array(img.data.length);
  for (let i = 0; i < img.data.length; i++) images[i] = img.data[i] / 255;
  return { images, labels, count: img.count, h: img.rows, w: img.cols, c: 1, numClasses: 10 };
}

function loadCifar10(): Dataset {
  const dir = path.join(dataDir(), "cifar10");
  const h = 32, w = 32, c = 3;
  const record = 1 + h * w * c; // label byte + three channel planes
  const chunks: Buffer[] = [];
  for (let b = 1; b <= 5; b++) {
    const file = path.join(dir, `data_batch_${b}.bin`);
    if (b > 1 && !fs.existsSync(file)) break; // partial copies are usable
    chunks.push(fs.readFileSync(file));
  }
  const raw = Buffer.concat(chunks);
  const count = Math.floor(raw.length / record);
  const images = new Float32Array(count * h * w * c);
  const labels = new Uint8Array(count);
  for (let n = 0; n < count; n++) {
    const base = n * record;
    labels[n] = raw[base];
    for (let ch = 0; ch < c; ch++) {
      const plane = base + 1 + ch * h * w;
      for (let p = 0; p < h * w; p++) {
        images[n * h * w * c + p * c + ch] = raw[plane + p] / 255;
      }
    }
  }
  return { images, labels, count, h, w, c, numClasses: 10 };
}

const cache = new Map<string, Dataset>();

export function loadDataset(name: string): Dataset {
  const hit = cache.get(name);
  if (hit) return hit;
  let ds: Dataset;
  switch (name) {
    case "synthetic":
      ds = makeSynthetic();
      break;
    case "fashion_mnist":
      ds = loadFashionMnist();
      break;
    case "cifar10":
      ds = loadCifar10();
      break;
    default:
      throw new Error(`unknown dataset ${JSON.stringify(name)}`);
  }
  cache.set(name, ds);
  return ds;
}

/**
 * Take the first subsetSize samples (all when omitted), then hold out the
 * last 10% as validation. The split is positional and happens before any
 * shuffling, so identical requests always see identical splits.
 */
export function selectAndSplit(ds: Dataset, subsetSize?: number | null): Split {
  let n = ds.count;
  if (subsetSize != null) {
    if (!Number.isInteger(subsetSize) || subsetSize < 2) {
      throw new Error("subset_size must be an integer >= 2");
    }
    n = Math.min(subsetSize, ds.count);
  }
  const valCount = Math.max(1, Math.floor(n / 10));
  const trainCount = n - valCount;
  const px = ds.h * ds.w * ds.c;
  return {
    trainImages: ds.images.subarray(0, trainCount * px),
    trainLabels: ds.labels.subarray(0, trainCount),
    trainCount,
    valImages: ds.images.subarray(trainCount * px, n * px),
    valLabels: ds.labels.subarray(trainCount, n),
    valCount,
  };
}
