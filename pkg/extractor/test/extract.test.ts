import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";
import { extract } from "../src/extract.js";
import { MockBackend } from "../src/backend.js";
import { readEmb } from "../src/emb.js";
import { run } from "../src/cli.js";
import { esc50TaskClasses } from "../src/esc50.js";
import { TAU_CITIES, TAU_SCENES } from "../src/tau2019.js";
import { writeEsc50Tree, writeTauTree } from "./helpers.js";

const here = dirname(fileURLToPath(import.meta.url));
const MOCK_DIM = 48; // keep the full-corpus runs cheap

let escTree: string;
let escOut: string;

beforeAll(async () => {
  escTree = mkdtempSync(join(tmpdir(), "esc50-full-"));
  writeEsc50Tree(escTree);
  escOut = mkdtempSync(join(tmpdir(), "esc50-out-"));
  await extract({
    datasetKind: "esc50",
    root: escTree,
    out: escOut,
    strict: true,
    backend: new MockBackend(MOCK_DIM),
    frameMean: false,
  });
}, 120000);

describe("esc50 extraction", () => {
  it("writes 5 tasks x 5 fold rotations x 3 roles plus the manifest", () => {
    const files = readdirSync(escOut).sort();
    expect(files).toContain("manifest.json");
    expect(files.filter((f) => f.endsWith(".emb"))).toHaveLength(75);
    expect(files).toContain("task1.f1.train.emb");
    expect(files).toContain("task5.f5.test.emb");
  });

  it("emits a cross-validated class-incremental manifest", () => {
    const payload = JSON.parse(readFileSync(join(escOut, "manifest.json"), "utf8"));
    expect(payload.format_version).toBe(1);
    expect(payload.protocol).toBe("CIL");
    expect(payload.total_classes).toBe(50);
    expect(payload.embedding_dim).toBe(MOCK_DIM);
    expect(payload.fold_count).toBe(5);
    expect(payload.tasks).toHaveLength(5);
    expect(payload.tasks[2].class_subset).toEqual(esc50TaskClasses(3));
    expect(payload.tasks[0].folds).toHaveLength(5);
  });

  it("honors the 24:8:8 per-class split in every rotation", () => {
    for (const f of [1, 4]) {
      const train = readEmb(join(escOut, `task2.f${f}.train.emb`));
      const val = readEmb(join(escOut, `task2.f${f}.val.emb`));
      const test = readEmb(join(escOut, `task2.f${f}.test.emb`));
      const countBy = (labels: number[]) => {
        const m = new Map<number, number>();
        for (const l of labels) m.set(l, (m.get(l) ?? 0) + 1);
        return m;
      };
      for (const target of esc50TaskClasses(2)) {
        expect(countBy(train.labels).get(target)).toBe(24);
        expect(countBy(val.labels).get(target)).toBe(8);
        expect(countBy(test.labels).get(target)).toBe(8);
      }
      // only this task's classes appear
      expect(new Set(train.labels).size).toBe(10);
    }
  });

  it("keeps each rotation's splits disjoint by construction", () => {
    // distinct folds hold distinct clips, so no embedding row repeats
    const train = readEmb(join(escOut, "task1.f2.train.emb"));
    const test = readEmb(join(escOut, "task1.f2.test.emb"));
    const key = (v: Float32Array) => Array.from(v.subarray(0, 4)).join(",");
    const seen = new Set(train.vectors.map(key));
    for (const vec of test.vectors) expect(seen.has(key(vec))).toBe(false);
  });

  it("is deterministic end to end", async () => {
    const out2 = mkdtempSync(join(tmpdir(), "esc50-out2-"));
    await extract({
      datasetKind: "esc50",
      root: escTree,
      out: out2,
      strict: true,
      backend: new MockBackend(MOCK_DIM),
      frameMean: false,
    });
    expect(readFileSync(join(out2, "manifest.json"), "utf8")).toBe(
      readFileSync(join(escOut, "manifest.json"), "utf8"),
    );
    for (const name of ["task1.f1.train.emb", "task5.f3.test.emb"]) {
      expect(readFileSync(join(out2, name)).equals(readFileSync(join(escOut, name)))).toBe(
        true,
      );
    }
  }, 120000);
});

describe("tau extraction", () => {
  it("emits one domain task per city over the scene classes", async () => {
    const tree = mkdtempSync(join(tmpdir(), "tau-full-"));
    writeTauTree(tree);
    const out = mkdtempSync(join(tmpdir(), "tau-out-"));
    await extract({
      datasetKind: "tau2019",
      root: tree,
      out,
      strict: true,
      backend: new MockBackend(MOCK_DIM),
      frameMean: false,
    });
    const payload = JSON.parse(readFileSync(join(out, "manifest.json"), "utf8"));
    expect(payload.protocol).toBe("DIL");
    expect(payload.total_classes).toBe(10);
    expect(payload.fold_count).toBeUndefined();
    expect(payload.tasks.map((t: any) => t.domain_tag)).toEqual([...TAU_CITIES]);
    expect(payload.tasks[0].train).toBe("barcelona.train.emb");

    const train = readEmb(join(out, "vienna.train.emb"));
    expect(new Set(train.labels).size).toBe(TAU_SCENES.length);
    expect(train.dim).toBe(MOCK_DIM);
  }, 60000);
});

describe("corrupt clips", () => {
  it("aborts under --strict and skips with a warning otherwise", async () => {
    const tree = mkdtempSync(join(tmpdir(), "tau-corrupt-"));
    writeTauTree(tree);
    // clobber one referenced clip with garbage
    const csv = readFileSync(join(tree, "evaluation_setup", "fold1_train.csv"), "utf8");
    const victim = csv.split("\n")[1]!.split("\t")[0]!;
    writeFileSync(join(tree, victim), Buffer.from("ruined"));

    const strictOut = mkdtempSync(join(tmpdir(), "tau-strict-"));
    await expect(
      extract({
        datasetKind: "tau2019",
        root: tree,
        out: strictOut,
        strict: true,
        backend: new MockBackend(MOCK_DIM),
        frameMean: false,
      }),
    ).rejects.toThrow(/corrupt clip/);

    const laxOut = mkdtempSync(join(tmpdir(), "tau-lax-"));
    const warnings: string[] = [];
    const result = await extract({
      datasetKind: "tau2019",
      root: tree,
      out: laxOut,
      strict: false,
      backend: new MockBackend(MOCK_DIM),
      frameMean: false,
      log: (line) => warnings.push(line),
    });
    expect(result.skipped).toBe(1);
    expect(warnings.some((w) => w.startsWith("warning: skipping"))).toBe(true);
  }, 60000);
});

describe("command line", () => {
  it("runs the mock pipeline end to end", async () => {
    const tree = mkdtempSync(join(tmpdir(), "tau-cli-"));
    writeTauTree(tree);
    const out = join(mkdtempSync(join(tmpdir(), "tau-cli-out-")), "emb");
    const code = await run([
      "--dataset-kind", "tau2019",
      "--root", tree,
      "--out", out,
      "--strict",
      "--backend", "mock",
      "--mock-dim", String(MOCK_DIM),
    ]);
    expect(code).toBe(0);
    const payload = JSON.parse(readFileSync(join(out, "manifest.json"), "utf8"));
    expect(payload.tasks).toHaveLength(9);
  }, 60000);

  it("drives an external runner process", async () => {
    const tree = mkdtempSync(join(tmpdir(), "tau-cmd-"));
    writeTauTree(tree, { cities: TAU_CITIES.slice() });
    const out = mkdtempSync(join(tmpdir(), "tau-cmd-out-"));
    const code = await run([
      "--dataset-kind", "tau2019",
      "--root", tree,
      "--out", out,
      "--model-cmd", `node ${join(here, "stub-runner.mjs")}`,
    ]);
    expect(code).toBe(0);
    const payload = JSON.parse(readFileSync(join(out, "manifest.json"), "utf8"));
    expect(payload.embedding_dim).toBe(16); // stub runner width
  }, 60000);

  it("maps usage problems to exit 2", async () => {
    expect(await run([])).toBe(2);
    expect(await run(["--dataset-kind", "esc49", "--root", "/x", "--out", "/y"])).toBe(2);
    expect(await run(["--dataset-kind", "esc50", "--root", "/x"])).toBe(2);
    expect(await run(["--dataset-kind", "esc50", "--root", "/x", "--out", "/y", "--wat"])).toBe(2);
  });

  it("maps a missing backend and a bad root to failure exits", async () => {
    const out = mkdtempSync(join(tmpdir(), "cli-fail-"));
    // default backend demands a model command
    expect(
      await run(["--dataset-kind", "tau2019", "--root", "/nope", "--out", out]),
    ).toBe(1);
    expect(
      await run([
        "--dataset-kind", "tau2019",
        "--root", "/definitely/not/a/dataset",
        "--out", out,
        "--backend", "mock",
      ]),
    ).toBe(1);
  });

  it("reports a runner that cannot load its checkpoint", async () => {
    const tree = mkdtempSync(join(tmpdir(), "tau-dead-"));
    writeTauTree(tree);
    const out = mkdtempSync(join(tmpdir(), "tau-dead-out-"));
    const code = await run([
      "--dataset-kind", "tau2019",
      "--root", tree,
      "--out", out,
      "--model-cmd", `node ${join(here, "failing-runner.mjs")}`,
    ]);
    expect(code).toBe(1);
  }, 60000);

  it("prints usage on --help", async () => {
    expect(await run(["--help"])).toBe(0);
  });
});
