import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, describe, expect, it } from "vitest";
import {
  BackendError,
  CmdBackend,
  MockBackend,
  loadBackend,
  DEFAULT_DIM,
} from "../src/backend.js";
import type { MelPatch } from "../src/mel.js";

const here = dirname(fileURLToPath(import.meta.url));

function patch(frames: number, bins: number, fill: (t: number, b: number) => number): MelPatch {
  const data = new Float32Array(frames * bins);
  for (let t = 0; t < frames; t++) {
    for (let b = 0; b < bins; b++) data[t * bins + b] = fill(t, b);
  }
  return { frames, bins, data };
}

describe("mock backend", () => {
  it("defaults to the published embedding width", async () => {
    const vec = await new MockBackend().embed(patch(3, 8, (t, b) => t + b), false);
    expect(vec.length).toBe(DEFAULT_DIM);
  });

  it("is deterministic and content-sensitive", async () => {
    const backend = new MockBackend(64);
    const a1 = await backend.embed(patch(4, 8, (t, b) => Math.sin(t * b + 1)), false);
    const a2 = await backend.embed(patch(4, 8, (t, b) => Math.sin(t * b + 1)), false);
    const c = await backend.embed(patch(4, 8, (t, b) => Math.cos(t + b)), false);
    expect(Array.from(a1)).toEqual(Array.from(a2));
    let diff = 0;
    for (let k = 0; k < 64; k++) diff += Math.abs(a1[k]! - c[k]!);
    expect(diff).toBeGreaterThan(1e-3);
  });

  it("distinguishes clip-level from frame-mean mode", async () => {
    const backend = new MockBackend(32);
    const moving = patch(6, 8, (t, b) => (t % 2 === 0 ? b : -b));
    const clip = await backend.embed(moving, false);
    const meaned = await backend.embed(moving, true);
    let diff = 0;
    for (let k = 0; k < 32; k++) diff += Math.abs(clip[k]! - meaned[k]!);
    expect(diff).toBeGreaterThan(1e-3);
  });
});

describe("command backend", () => {
  const stub = new CmdBackend(`node ${join(here, "stub-runner.mjs")}`);
  afterAll(() => stub.close());

  it("round-trips patches through an external process", async () => {
    const vec = await stub.embed(patch(4, 16, (t, b) => (b === 2 ? 1 : 0)), false);
    expect(vec.length).toBe(16);
    expect(vec[2]).toBeCloseTo(1, 5);
    expect(vec[3]).toBeCloseTo(0, 5);
  });

  it("passes the frame-mean flag through", async () => {
    const p = patch(2, 16, (t, b) => (b === 5 ? 2 : 0));
    const clip = await stub.embed(p, false);
    const meaned = await stub.embed(p, true);
    expect(clip[5]).toBeCloseTo(2, 5);
    expect(meaned[5]).toBeCloseTo(-2, 5); // stub negates in mode 1
  });

  it("serializes concurrent requests correctly", async () => {
    const jobs = [0, 1, 2, 3, 4].map((b) =>
      stub.embed(patch(2, 16, (_, bb) => (bb === b ? b + 1 : 0)), false),
    );
    const got = await Promise.all(jobs);
    for (let b = 0; b < 5; b++) expect(got[b]![b]).toBeCloseTo(b + 1, 5);
  });

  it("surfaces a runner that dies while loading its checkpoint", async () => {
    const dying = new CmdBackend(`node ${join(here, "failing-runner.mjs")}`);
    await expect(dying.embed(patch(1, 4, () => 0), false)).rejects.toThrow(
      /checkpoint load failure/,
    );
    await dying.close();
  });

  it("surfaces a nonexistent command", async () => {
    const ghost = new CmdBackend("definitely-not-a-real-binary-name");
    await expect(ghost.embed(patch(1, 4, () => 0), false)).rejects.toThrow(BackendError);
    await ghost.close();
  });
});

describe("backend selection", () => {
  it("builds the mock on request", () => {
    expect(loadBackend("mock").name).toBe("mock");
  });

  it("demands a model command for the default backend", () => {
    expect(() => loadBackend("cmd")).toThrow(/no embedding backend configured/);
    expect(loadBackend("cmd", "node runner.mjs").name).toContain("runner.mjs");
  });

  it("rejects unknown kinds", () => {
    expect(() => loadBackend("gpu")).toThrow(/unknown backend/);
  });
});
