// Embedding backends. The pre-trained network is consumed strictly as a
// black box: the default backend pipes log-mel patches to an external
// runner process (any language, wrapping the real checkpoint) over a tiny
// binary protocol, and a deterministic mock backend exists so the whole
// pipeline can be exercised without the model.
//
// Request:  u32 frames, u32 bins, u8 mode (0 = clip level, 1 = frame
//           mean), then frames*bins float32, all little endian.
// Response: u32 dim, then dim float32.

import { spawn, type ChildProcessByStdio } from "node:child_process";
import type { Readable, Writable } from "node:stream";
import type { MelPatch } from "./mel.js";

export class BackendError extends Error {}

export interface EmbeddingBackend {
  name: string;
  embed(patch: MelPatch, frameMean: boolean): Promise<Float32Array>;
  close(): Promise<void>;
}

export const DEFAULT_DIM = 2048;

// xorshift-ish integer hash, good enough for frozen pseudo-weights
function hashToUnit(a: number, b: number, c: number): number {
  let h = (a * 0x9e3779b1) ^ (b * 0x85ebca77) ^ (c * 0xc2b2ae3d);
  h = Math.imul(h ^ (h >>> 15), 0x27d4eb2f);
  h ^= h >>> 13;
  return ((h >>> 0) / 0xffffffff) * 2 - 1;
}

export class MockBackend implements EmbeddingBackend {
  name = "mock";
  readonly dim: number;

  constructor(dim = DEFAULT_DIM) {
    if (dim < 1) throw new BackendError(`mock dim must be >= 1, got ${dim}`);
    this.dim = dim;
  }

  embed(patch: MelPatch, frameMean: boolean): Promise<Float32Array> {
    const { frames, bins, data } = patch;
    // summarize each band: mean level, spread, temporal movement
    const mean = new Float64Array(bins);
    const spread = new Float64Array(bins);
    const motion = new Float64Array(bins);
    for (let b = 0; b < bins; b++) {
      let acc = 0;
      for (let t = 0; t < frames; t++) acc += data[t * bins + b]!;
      mean[b] = acc / frames;
    }
    for (let b = 0; b < bins; b++) {
      let acc = 0;
      let mov = 0;
      for (let t = 0; t < frames; t++) {
        const d = data[t * bins + b]! - mean[b]!;
        acc += d * d;
        if (t > 0) mov += Math.abs(data[t * bins + b]! - data[(t - 1) * bins + b]!);
      }
      spread[b] = Math.sqrt(acc / frames);
      motion[b] = frames > 1 ? mov / (frames - 1) : 0;
    }
    const out = new Float32Array(this.dim);
    const scale = 1 / Math.sqrt(bins);
    for (let k = 0; k < this.dim; k++) {
      let acc = 0;
      for (let b = 0; b < bins; b++) {
        acc += hashToUnit(k, b, 1) * mean[b]!;
        acc += hashToUnit(k, b, 2) * spread[b]!;
        if (!frameMean) acc += hashToUnit(k, b, 3) * motion[b]!;
      }
      out[k] = acc * scale;
    }
    return Promise.resolve(out);
  }

  close(): Promise<void> {
    return Promise.resolve();
  }
}

type RunnerProcess = ChildProcessByStdio<Writable, Readable, Readable>;

export class CmdBackend implements EmbeddingBackend {
  name: string;
  private child: RunnerProcess | null = null;
  private readonly command: string;
  private pending = Buffer.alloc(0);
  private waiters: Array<() => void> = [];
  private stderrTail = "";
  private exited: { code: number | null } | null = null;
  private queue: Promise<unknown> = Promise.resolve();

  constructor(command: string) {
    this.command = command;
    this.name = `cmd(${command})`;
  }

  private start(): RunnerProcess {
    if (this.child) return this.child;
    const child = spawn(this.command, {
      shell: true,
      stdio: ["pipe", "pipe", "pipe"],
    }) as RunnerProcess;
    child.stdout.on("data", (chunk: Buffer) => {
      this.pending = Buffer.concat([this.pending, chunk]);
      for (const w of this.waiters.splice(0)) w();
    });
    child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString()).slice(-2000);
    });
    child.on("exit", (code) => {
      this.exited = { code };
      for (const w of this.waiters.splice(0)) w();
    });
    child.on("error", () => {
      this.exited = { code: -1 };
      for (const w of this.waiters.splice(0)) w();
    });
    this.child = child;
    return child;
  }

  private async readBytes(n: number): Promise<Buffer> {
    while (this.pending.length < n) {
      if (this.exited) {
        const why = this.stderrTail.trim() || `exit code ${this.exited.code}`;
        throw new BackendError(`embedding runner failed: ${why}`);
      }
      await new Promise<void>((resolve) => this.waiters.push(resolve));
    }
    const out = this.pending.subarray(0, n);
    this.pending = this.pending.subarray(n);
    return out;
  }

  embed(patch: MelPatch, frameMean: boolean): Promise<Float32Array> {
    // serialize requests; the protocol has no framing for interleaving
    const run = this.queue.then(() => this.embedNow(patch, frameMean));
    this.queue = run.catch(() => undefined);
    return run;
  }

  private async embedNow(patch: MelPatch, frameMean: boolean): Promise<Float32Array> {
    const child = this.start();
    const header = Buffer.alloc(9);
    header.writeUInt32LE(patch.frames, 0);
    header.writeUInt32LE(patch.bins, 4);
    header.writeUInt8(frameMean ? 1 : 0, 8);
    const body = Buffer.from(patch.data.buffer, patch.data.byteOffset, patch.data.byteLength);
    if (this.exited) {
      const why = this.stderrTail.trim() || `exit code ${this.exited.code}`;
      throw new BackendError(`embedding runner failed: ${why}`);
    }
    child.stdin.write(Buffer.concat([header, body]));
    const dimBuf = await this.readBytes(4);
    const dim = dimBuf.readUInt32LE(0);
    if (dim < 1 || dim > 1 << 20) {
      throw new BackendError(`embedding runner returned absurd dim ${dim}`);
    }
    const data = await this.readBytes(dim * 4);
    const out = new Float32Array(dim);
    for (let k = 0; k < dim; k++) out[k] = data.readFloatLE(k * 4);
    return out;
  }

  async close(): Promise<void> {
    if (this.child) {
      this.child.stdin.end();
      const child = this.child;
      await new Promise<void>((resolve) => {
        if (this.exited) return resolve();
        child.on("exit", () => resolve());
        setTimeout(() => {
          child.kill();
          resolve();
        }, 2000).unref();
      });
      this.child = null;
    }
  }
}

export function loadBackend(kind: string, modelCmd?: string, mockDim?: number): EmbeddingBackend {
  if (kind === "mock") return new MockBackend(mockDim ?? DEFAULT_DIM);
  if (kind === "cmd") {
    if (!modelCmd) {
      throw new BackendError(
        "no embedding backend configured: pass --model-cmd with a runner " +
          "wrapping the pre-trained checkpoint, or --backend mock to " +
          "exercise the pipeline without it",
      );
    }
    return new CmdBackend(modelCmd);
  }
  throw new BackendError(`unknown backend kind '${kind}'`);
}
