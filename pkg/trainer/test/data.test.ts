import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, describe, expect, it } from "vitest";
import { loadDataset, selectAndSplit } from "../src/data";

const savedEnv = process.env.OPENNAS_DATA_DIR;
afterEach(() => {
  if (savedEnv === undefined) delete process.env.OPENNAS_DATA_DIR;
  else process.env.OPENNAS_DATA_DIR = savedEnv;
});

describe("synthetic dataset", () => {
  it("has the declared geometry", () => {
    const ds = loadDataset("synthetic");
    expect([ds.h, ds.w, ds.c, ds.numClasses]).toEqual([16, 16, 3, 4]);
    expect(ds.count).toBe(4096);
    expect(ds.images.length).toBe(4096 * 16 * 16 * 3);
    expect(ds.labels.length).toBe(4096);
  });

  it("keeps pixels in [0,1] and labels in range", () => {
    const ds = loadDataset("synthetic");
    for (let i = 0; i < ds.images.length; i += 997) {
      expect(ds.images[i]).toBeGreaterThanOrEqual(0);
      expect(ds.images[i]).toBeLessThanOrEqual(1);
    }
    for (const label of ds.labels) {
      expect(label).toBeGreaterThanOrEqual(0);
      expect(label).toBeLessThan(4);
    }
  });

  it("balances classes exactly", () => {
    const ds = loadDataset("synthetic");
    const counts = [0, 0, 0, 0];
    for (const label of ds.labels) counts[label]++;
    expect(counts).toEqual([1024, 1024, 1024, 1024]);
  });
});

describe("selectAndSplit", () => {
  it("holds out the last tenth", () => {
    const ds = loadDataset("synthetic");
    const split = selectAndSplit(ds, 6000); // clamps to the 4096 available
    expect(split.trainCount + split.valCount).toBe(4096);
    expect(split.valCount).toBe(409);
    const split2 = selectAndSplit(ds, 1000);
    expect(split2.trainCount).toBe(900);
    expect(split2.valCount).toBe(100);
  });

  it("takes the validation slice positionally from the tail", () => {
    const ds = loadDataset("synthetic");
    const split = selectAndSplit(ds, 40);
    expect(Array.from(split.valLabels)).toEqual(Array.from(ds.labels.subarray(36, 40)));
    const px = ds.h * ds.w * ds.c;
    expect(split.valImages[0]).toBe(ds.images[36 * px]);
  });

  it("keeps at least one validation sample", () => {
    const split = selectAndSplit(loadDataset("synthetic"), 5);
    expect(split.valCount).toBe(1);
    expect(split.trainCount).toBe(4);
  });

  it("rejects unusable subset sizes", () => {
    const ds = loadDataset("synthetic");
    expect(() => selectAndSplit(ds, 0)).toThrow("subset_size");
    expect(() => selectAndSplit(ds, 3.5)).toThrow("subset_size");
  });
});

describe("file-backed datasets", () => {
  it("rejects unknown names", () => {
    expect(() => loadDataset("imagenet")).toThrow("unknown dataset");
  });

  it("demands OPENNAS_DATA_DIR for cifar10", () => {
    delete process.env.OPENNAS_DATA_DIR;
    expect(() => loadDataset("cifar10")).toThrow("OPENNAS_DATA_DIR");
  });

  it("parses IDX files", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "opennas-data-"));
    const sub = path.join(dir, "fashion_mnist");
    fs.mkdirSync(sub);
    // two 28x28 images: first all zeros, second all 255s
    const px = 28 * 28;
    const images = Buffer.alloc(16 + 2 * px);
    images.writeUInt32BE(2051, 0);
    images.writeUInt32BE(2, 4);
    images.writeUInt32BE(28, 8);
    images.writeUInt32BE(28, 12);
    images.fill(255, 16 + px);
    fs.writeFileSync(path.join(sub, "train-images-idx3-ubyte"), images);
    const labels = Buffer.alloc(8 + 2);
    labels.writeUInt32BE(2049, 0);
    labels.writeUInt32BE(2, 4);
    labels[8] = 3;
    labels[9] = 7;
    fs.writeFileSync(path.join(sub, "train-labels-idx1-ubyte"), labels);

    process.env.OPENNAS_DATA_DIR = dir;
    const ds = loadDataset("fashion_mnist");
    expect([ds.count, ds.h, ds.w, ds.c, ds.numClasses]).toEqual([2, 28, 28, 1, 10]);
    expect(ds.images[0]).toBe(0);
    expect(ds.images[px]).toBe(1);
    expect(Array.from(ds.labels)).toEqual([3, 7]);
  });

  it("parses cifar10 binary batches into HWC order", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "opennas-data-"));
    const sub = path.join(dir, "cifar10");
    fs.mkdirSync(sub);
    const record = 1 + 3 * 32 * 32;
    const batch = Buffer.alloc(2 * record);
    batch[0] = 5; // first label
    batch[1] = 255; // R plane, pixel (0,0)
    batch[1 + 32 * 32] = 128; // G plane, pixel (0,0)
    batch[record] = 9; // second label
    fs.writeFileSync(path.join(sub, "data_batch_1.bin"), batch);

    process.env.OPENNAS_DATA_DIR = dir;
    const ds = loadDataset("cifar10");
    expect([ds.count, ds.h, ds.w, ds.c]).toEqual([2, 32, 32, 3]);
    expect(Array.from(ds.labels)).toEqual([5, 9]);
    expect(ds.images[0]).toBeCloseTo(1, 6); // R channel interleaved first
    expect(ds.images[1]).toBeCloseTo(128 / 255, 6);
    expect(ds.images[2]).toBe(0);
  });
});
