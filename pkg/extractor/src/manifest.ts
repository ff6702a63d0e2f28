// Benchmark manifest emitter. The JSON shape mirrors what the harness
// loader expects: format_version 1, CIL tasks carry class_subset and DIL
// tasks carry domain_tag, split paths are relative to the manifest file,
// and cross-validated sequences list per-fold path triples under "folds"
// with a top-level fold_count.

import { writeFileSync } from "node:fs";

export interface SplitFiles {
  train: string;
  val: string;
  test: string;
}

export interface ManifestTask {
  classSubset?: number[];
  domainTag?: string;
  folds: SplitFiles[]; // length 1 for a plain split
}

export interface ManifestSpec {
  protocol: "CIL" | "DIL";
  totalClasses: number;
  embeddingDim: number;
  tasks: ManifestTask[];
  runSeeds?: number[];
}

export function manifestPayload(spec: ManifestSpec): Record<string, unknown> {
  const widths = new Set(spec.tasks.map((t) => t.folds.length));
  if (widths.size !== 1) {
    throw new Error(`tasks disagree on fold count: ${[...widths].sort()}`);
  }
  const foldCount = spec.tasks[0]!.folds.length;

  const tasks = spec.tasks.map((t, i) => {
    const entry: Record<string, unknown> = { task_id: i + 1 };
    if (t.classSubset) entry.class_subset = t.classSubset;
    if (t.domainTag) entry.domain_tag = t.domainTag;
    if (foldCount > 1) {
      entry.folds = t.folds.map((f) => ({ train: f.train, val: f.val, test: f.test }));
    } else {
      const f = t.folds[0]!;
      entry.train = f.train;
      entry.val = f.val;
      entry.test = f.test;
    }
    return entry;
  });

  const payload: Record<string, unknown> = {
    format_version: 1,
    protocol: spec.protocol,
    total_classes: spec.totalClasses,
    embedding_dim: spec.embeddingDim,
    run_seeds: spec.runSeeds ?? [0, 1, 2, 3, 4],
    tasks,
  };
  if (foldCount > 1) payload.fold_count = foldCount;
  return payload;
}

export function writeManifest(path: string, spec: ManifestSpec): void {
  writeFileSync(path, JSON.stringify(manifestPayload(spec), null, 2) + "\n");
}
