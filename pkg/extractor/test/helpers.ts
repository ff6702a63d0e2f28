// Shared fixture builders: in-memory WAV encoding and miniature dataset
// trees with the real directory layouts but very short clips.

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { TAU_CITIES, TAU_SCENES } from "../src/tau2019.js";

export interface WavSpec {
  rate?: number;
  channels?: number;
  bits?: 16 | 24 | 32;
  float?: boolean;
}

export function makeWav(samples: number[][] | Float64Array, spec: WavSpec = {}): Buffer {
  const rate = spec.rate ?? 16000;
  const float = spec.float ?? false;
  const bits = float ? 32 : (spec.bits ?? 16);
  // accept either per-channel arrays or one mono array
  const chans: number[][] = Array.isArray(samples)
    ? (samples as number[][])
    : [Array.from(samples as Float64Array)];
  const channels = chans.length;
  const frames = chans[0]!.length;
  const bytesPer = bits / 8;
  const dataSize = frames * channels * bytesPer;

  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(float ? 3 : 1, 20);
  buf.writeUInt16LE(channels, 22);
  buf.writeUInt32LE(rate, 24);
  buf.writeUInt32LE(rate * channels * bytesPer, 28);
  buf.writeUInt16LE(channels * bytesPer, 32);
  buf.writeUInt16LE(bits, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);

  let off = 44;
  for (let i = 0; i < frames; i++) {
    for (let c = 0; c < channels; c++) {
      const v = Math.max(-1, Math.min(1, chans[c]![i]!));
      if (float) {
        buf.writeFloatLE(v, off);
      } else if (bits === 16) {
        buf.writeInt16LE(Math.round(v * 32767), off);
      } else if (bits === 24) {
        let q = Math.round(v * 8388607);
        if (q < 0) q += 0x1000000;
        buf[off] = q & 0xff;
        buf[off + 1] = (q >> 8) & 0xff;
        buf[off + 2] = (q >> 16) & 0xff;
      } else {
        buf.writeInt32LE(Math.round(v * 2147483647), off);
      }
      off += bytesPer;
    }
  }
  return buf;
}

// deterministic short clip, distinct per (tag, variant)
export function toneClip(tag: number, variant: number, length = 400, rate = 8000): Buffer {
  const samples = new Float64Array(length);
  const freq = 200 + 37 * (tag % 50) + 11 * (variant % 8);
  let noise = (tag * 2654435761 + variant * 40503) >>> 0;
  for (let i = 0; i < length; i++) {
    noise = (noise * 1664525 + 1013904223) >>> 0;
    const n = (noise / 0xffffffff - 0.5) * 0.05;
    samples[i] = 0.4 * Math.sin((2 * Math.PI * freq * i) / rate) + n;
  }
  return makeWav(samples, { rate });
}

// complete miniature tree: 50 classes x 5 folds x 8 clips, correct names
export function writeEsc50Tree(dir: string): void {
  const audio = join(dir, "audio");
  mkdirSync(audio, { recursive: true });
  let clipId = 100000;
  for (let fold = 1; fold <= 5; fold++) {
    for (let target = 0; target < 50; target++) {
      for (let take = 0; take < 8; take++) {
        const name = `${fold}-${clipId}-A-${target}.wav`;
        writeFileSync(join(audio, name), toneClip(target, fold * 8 + take));
        clipId++;
      }
    }
  }
}

export interface TauTreeOptions {
  trainPerCell?: number;
  testPerCell?: number;
  cities?: readonly string[];
}

// official layout in miniature: audio/ plus evaluation_setup lists
export function writeTauTree(dir: string, opts: TauTreeOptions = {}): void {
  const trainPerCell = opts.trainPerCell ?? 3;
  const testPerCell = opts.testPerCell ?? 1;
  const cities = opts.cities ?? TAU_CITIES;
  const audio = join(dir, "audio");
  const setup = join(dir, "evaluation_setup");
  mkdirSync(audio, { recursive: true });
  mkdirSync(setup, { recursive: true });

  const trainRows = ["filename\tscene_label"];
  const testRows = ["filename\tscene_label"];
  let seg = 0;
  for (const city of cities) {
    for (let s = 0; s < TAU_SCENES.length; s++) {
      const scene = TAU_SCENES[s]!;
      for (let i = 0; i < trainPerCell + testPerCell; i++) {
        const name = `${scene}-${city}-${100 + seg}-${i}-a.wav`;
        writeFileSync(join(audio, name), toneClip(s, seg + i));
        const row = `audio/${name}\t${scene}`;
        (i < trainPerCell ? trainRows : testRows).push(row);
      }
      seg++;
    }
  }
  writeFileSync(join(setup, "fold1_train.csv"), trainRows.join("\n") + "\n");
  writeFileSync(join(setup, "fold1_evaluate.csv"), testRows.join("\n") + "\n");
}
