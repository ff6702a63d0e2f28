// Orchestration: scan a dataset layout, run every clip through the audio
// front end and the embedding backend, and write one labeled container
// per (task, split) plus the manifest that sequences them.

import { mkdirSync, readFileSync } from "node:fs";
import { join } from "node:path";
import { decodeWav, WavError } from "./wav.js";
import { resampleTo } from "./resample.js";
import { logMel, TARGET_RATE } from "./mel.js";
import type { EmbeddingBackend } from "./backend.js";
import { BackendError } from "./backend.js";
import { writeEmb, type EmbBatch } from "./emb.js";
import { writeManifest, type ManifestTask } from "./manifest.js";
import {
  scanEsc50,
  esc50TaskClasses,
  foldRotations,
  LayoutError,
  ESC50_CLASSES,
  ESC50_TASKS,
  type Esc50Clip,
} from "./esc50.js";
import { scanTau2019, TAU_SCENES, TAU_CITIES, type TauClip } from "./tau2019.js";

export type DatasetKind = "esc50" | "tau2019";

export interface ExtractOptions {
  datasetKind: DatasetKind;
  root: string;
  out: string;
  strict: boolean;
  backend: EmbeddingBackend;
  frameMean: boolean;
  log?: (line: string) => void;
}

export interface ExtractResult {
  manifestPath: string;
  clipCount: number;
  skipped: number;
  embeddingDim: number;
}

export async function extract(opts: ExtractOptions): Promise<ExtractResult> {
  const log = opts.log ?? (() => undefined);
  mkdirSync(opts.out, { recursive: true });
  if (opts.datasetKind === "esc50") return extractEsc50(opts, log);
  return extractTau(opts, log);
}

type Embeddings = Map<string, Float32Array>;

async function embedClips(
  paths: string[],
  opts: ExtractOptions,
  log: (line: string) => void,
): Promise<{ embeddings: Embeddings; skipped: Set<string>; dim: number }> {
  const embeddings: Embeddings = new Map();
  const skipped = new Set<string>();
  let dim = -1;
  let done = 0;
  for (const path of paths) {
    try {
      const raw = readFileSync(path);
      const audio = decodeWav(raw, path);
      const mono = resampleTo(audio.samples, audio.sampleRate, TARGET_RATE);
      const vec = await opts.backend.embed(logMel(mono), opts.frameMean);
      if (dim < 0) dim = vec.length;
      else if (vec.length !== dim) {
        throw new BackendError(
          `backend dim drifted: ${vec.length} after ${dim} for ${path}`,
        );
      }
      embeddings.set(path, vec);
    } catch (err) {
      if (err instanceof BackendError) throw err;
      const why = err instanceof WavError ? err.message : `unreadable: ${path}`;
      if (opts.strict) throw new LayoutError(`corrupt clip (strict): ${why}`);
      log(`warning: skipping ${why}`);
      skipped.add(path);
    }
    done++;
    if (done % 250 === 0) log(`embedded ${done}/${paths.length} clips`);
  }
  if (dim < 0) throw new LayoutError("no clip survived decoding");
  return { embeddings, skipped, dim };
}

function toBatch(
  clips: { path: string; label: number }[],
  embeddings: Embeddings,
  skipped: Set<string>,
  dim: number,
): EmbBatch {
  const labels: number[] = [];
  const vectors: Float32Array[] = [];
  for (const clip of clips) {
    if (skipped.has(clip.path)) continue;
    labels.push(clip.label);
    vectors.push(embeddings.get(clip.path)!);
  }
  return { dim, labels, vectors };
}

async function extractEsc50(
  opts: ExtractOptions,
  log: (line: string) => void,
): Promise<ExtractResult> {
  const scan = scanEsc50(opts.root, opts.strict);
  for (const w of scan.warnings) log(`warning: ${w}`);
  log(`scanned ${scan.clips.length} clips`);

  const { embeddings, skipped, dim } = await embedClips(
    scan.clips.map((c) => c.path),
    opts,
    log,
  );

  const byFold = new Map<number, Esc50Clip[]>();
  for (const clip of scan.clips) {
    let bucket = byFold.get(clip.fold);
    if (!bucket) byFold.set(clip.fold, (bucket = []));
    bucket.push(clip);
  }

  const tasks: ManifestTask[] = [];
  for (let t = 1; t <= ESC50_TASKS; t++) {
    const classes = new Set(esc50TaskClasses(t));
    const folds = foldRotations().map((rot) => {
      const pick = (foldIds: number[]) =>
        foldIds
          .flatMap((f) => byFold.get(f) ?? [])
          .filter((c) => classes.has(c.target))
          .map((c) => ({ path: c.path, label: c.target }));
      const name = (role: string) => `task${t}.f${rot.testFold}.${role}.emb`;
      writeEmb(
        join(opts.out, name("train")),
        toBatch(pick(rot.trainFolds), embeddings, skipped, dim),
        ESC50_CLASSES,
      );
      writeEmb(
        join(opts.out, name("val")),
        toBatch(pick([rot.valFold]), embeddings, skipped, dim),
        ESC50_CLASSES,
      );
      writeEmb(
        join(opts.out, name("test")),
        toBatch(pick([rot.testFold]), embeddings, skipped, dim),
        ESC50_CLASSES,
      );
      return { train: name("train"), val: name("val"), test: name("test") };
    });
    tasks.push({ classSubset: esc50TaskClasses(t), folds });
  }

  const manifestPath = join(opts.out, "manifest.json");
  writeManifest(manifestPath, {
    protocol: "CIL",
    totalClasses: ESC50_CLASSES,
    embeddingDim: dim,
    tasks,
  });
  log(`wrote ${manifestPath}`);
  log(`protocol=CIL tasks=${ESC50_TASKS} classes=${ESC50_CLASSES} dim=${dim}`);
  return {
    manifestPath,
    clipCount: scan.clips.length - skipped.size,
    skipped: skipped.size,
    embeddingDim: dim,
  };
}

async function extractTau(
  opts: ExtractOptions,
  log: (line: string) => void,
): Promise<ExtractResult> {
  const scan = scanTau2019(opts.root, opts.strict);
  for (const w of scan.warnings) log(`warning: ${w}`);

  const allPaths: string[] = [];
  for (const split of scan.byCity.values()) {
    for (const part of [split.train, split.val, split.test]) {
      for (const clip of part) allPaths.push(clip.path);
    }
  }
  allPaths.sort();
  log(`scanned ${allPaths.length} clips across ${scan.byCity.size} cities`);

  const { embeddings, skipped, dim } = await embedClips(allPaths, opts, log);

  const asLabeled = (clips: TauClip[]) =>
    clips.map((c) => ({ path: c.path, label: c.scene }));

  const tasks: ManifestTask[] = [];
  for (const city of TAU_CITIES) {
    const split = scan.byCity.get(city)!;
    const name = (role: string) => `${city}.${role}.emb`;
    writeEmb(
      join(opts.out, name("train")),
      toBatch(asLabeled(split.train), embeddings, skipped, dim),
      TAU_SCENES.length,
    );
    writeEmb(
      join(opts.out, name("val")),
      toBatch(asLabeled(split.val), embeddings, skipped, dim),
      TAU_SCENES.length,
    );
    writeEmb(
      join(opts.out, name("test")),
      toBatch(asLabeled(split.test), embeddings, skipped, dim),
      TAU_SCENES.length,
    );
    tasks.push({
      domainTag: city,
      folds: [{ train: name("train"), val: name("val"), test: name("test") }],
    });
  }

  const manifestPath = join(opts.out, "manifest.json");
  writeManifest(manifestPath, {
    protocol: "DIL",
    totalClasses: TAU_SCENES.length,
    embeddingDim: dim,
    tasks,
  });
  log(`wrote ${manifestPath}`);
  log(`protocol=DIL tasks=${TAU_CITIES.length} classes=${TAU_SCENES.length} dim=${dim}`);
  return {
    manifestPath,
    clipCount: allPaths.length - skipped.size,
    skipped: skipped.size,
    embeddingDim: dim,
  };
}
