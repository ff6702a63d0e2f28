import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { encodeEmb, readEmb, writeEmb, EmbError, type EmbBatch } from "../src/emb.js";

function sampleBatch(): EmbBatch {
  return {
    dim: 3,
    labels: [0, 2, 1],
    vectors: [
      new Float32Array([1, 2, 3]),
      new Float32Array([-1, 0.5, 0]),
      new Float32Array([9, 8, 7]),
    ],
  };
}

describe("embedding container", () => {
  it("writes the documented byte layout", () => {
    const buf = encodeEmb(sampleBatch(), 4);
    expect(buf.toString("ascii", 0, 4)).toBe("EMB1");
    expect(buf.readUInt32LE(4)).toBe(3); // dim
    expect(buf.readUInt32LE(8)).toBe(3); // count
    expect(buf.readUInt32LE(12)).toBe(4); // hint
    expect(buf.length).toBe(16 + 3 * (4 + 4 * 3));
    expect(buf.readUInt32LE(16)).toBe(0); // first label
    expect(buf.readFloatLE(20)).toBeCloseTo(1);
  });

  it("round-trips through a file", () => {
    const dir = mkdtempSync(join(tmpdir(), "emb-"));
    const path = join(dir, "x.emb");
    writeEmb(path, sampleBatch(), 4);
    const back = readEmb(path);
    expect(back.dim).toBe(3);
    expect(back.labels).toEqual([0, 2, 1]);
    expect(Array.from(back.vectors[1]!)).toEqual([-1, 0.5, 0]);
  });

  it("rejects labels at or above a nonzero hint", () => {
    const batch = sampleBatch();
    expect(() => encodeEmb(batch, 2)).toThrow(EmbError);
    expect(() => encodeEmb(batch, 0)).not.toThrow(); // hint 0 disables the gate
  });

  it("rejects non-finite values and width mismatches", () => {
    const nan = sampleBatch();
    nan.vectors[0]![1] = NaN;
    expect(() => encodeEmb(nan)).toThrow(/non-finite/);
    const ragged = sampleBatch();
    ragged.vectors[2] = new Float32Array([1, 2]);
    expect(() => encodeEmb(ragged)).toThrow(/width/);
  });

  it("rejects truncated and oversized files on read", () => {
    const dir = mkdtempSync(join(tmpdir(), "emb-"));
    const good = encodeEmb(sampleBatch(), 4);
    const short = join(dir, "short.emb");
    writeFileSync(short, good.subarray(0, good.length - 2));
    expect(() => readEmb(short)).toThrow(/expected/);
    const long = join(dir, "long.emb");
    writeFileSync(long, Buffer.concat([good, Buffer.from([0])]));
    expect(() => readEmb(long)).toThrow(/expected/);
  });

  it("rejects a forged class hint on read", () => {
    const dir = mkdtempSync(join(tmpdir(), "emb-"));
    const raw = encodeEmb(sampleBatch(), 0);
    raw.writeUInt32LE(2, 12); // claim 2 classes over labels reaching 2
    const path = join(dir, "forged.emb");
    writeFileSync(path, raw);
    expect(() => readEmb(path)).toThrow(/hint/);
  });
});
