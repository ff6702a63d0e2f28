// Writer and reader for the labeled-embedding container consumed by the
// benchmark harness. Layout: ASCII magic "EMB1", then three little-endian
// u32 fields (dimension, record count, class count hint, 0 if unknown),
// then per record one u32 label followed by dimension float32 values.

import { writeFileSync, readFileSync } from "node:fs";

export class EmbError extends Error {}

const MAGIC = "EMB1";
const HEADER_SIZE = 16;

export interface EmbBatch {
  dim: number;
  labels: number[];
  vectors: Float32Array[]; // labels.length entries of width dim
}

export function encodeEmb(batch: EmbBatch, classHint = 0): Buffer {
  const { dim, labels, vectors } = batch;
  if (labels.length !== vectors.length) {
    throw new EmbError(`${labels.length} labels but ${vectors.length} vectors`);
  }
  const count = labels.length;
  const buf = Buffer.alloc(HEADER_SIZE + count * (4 + 4 * dim));
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(dim, 4);
  buf.writeUInt32LE(count, 8);
  buf.writeUInt32LE(classHint, 12);
  let off = HEADER_SIZE;
  for (let i = 0; i < count; i++) {
    const label = labels[i]!;
    const vec = vectors[i]!;
    if (!Number.isInteger(label) || label < 0) {
      throw new EmbError(`record ${i}: bad label ${label}`);
    }
    if (classHint > 0 && label >= classHint) {
      throw new EmbError(`record ${i}: label ${label} >= class hint ${classHint}`);
    }
    if (vec.length !== dim) {
      throw new EmbError(`record ${i}: vector width ${vec.length}, expected ${dim}`);
    }
    buf.writeUInt32LE(label, off);
    off += 4;
    for (let k = 0; k < dim; k++) {
      const v = vec[k]!;
      if (!Number.isFinite(v)) throw new EmbError(`record ${i}: non-finite value`);
      buf.writeFloatLE(v, off);
      off += 4;
    }
  }
  return buf;
}

export function writeEmb(path: string, batch: EmbBatch, classHint = 0): void {
  writeFileSync(path, encodeEmb(batch, classHint));
}

export function readEmb(path: string): EmbBatch {
  const buf = readFileSync(path);
  if (buf.length < HEADER_SIZE || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new EmbError(`${path}: bad magic`);
  }
  const dim = buf.readUInt32LE(4);
  const count = buf.readUInt32LE(8);
  const hint = buf.readUInt32LE(12);
  const expected = HEADER_SIZE + count * (4 + 4 * dim);
  if (buf.length !== expected) {
    throw new EmbError(`${path}: ${buf.length} bytes, expected ${expected}`);
  }
  const labels: number[] = [];
  const vectors: Float32Array[] = [];
  let off = HEADER_SIZE;
  for (let i = 0; i < count; i++) {
    const label = buf.readUInt32LE(off);
    off += 4;
    if (hint > 0 && label >= hint) {
      throw new EmbError(`${path}: record ${i} label ${label} >= hint ${hint}`);
    }
    const vec = new Float32Array(dim);
    for (let k = 0; k < dim; k++) {
      vec[k] = buf.readFloatLE(off);
      off += 4;
    }
    labels.push(label);
    vectors.push(vec);
  }
  return { dim, labels, vectors };
}
