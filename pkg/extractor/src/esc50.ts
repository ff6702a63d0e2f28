// ESC-50 directory layout: 2000 five-second clips named
// {FOLD}-{CLIP_ID}-{TAKE}-{TARGET}.wav, folds 1..5, targets 0..49,
// 40 clips per class (8 per class in each fold), living in audio/ or at
// the dataset root. The incremental sequence is 5 tasks of 10 classes in
// target order, and evaluation is cross-validated: each of the 5 folds
// serves once as the test set, with the next fold as validation and the
// remaining three as training (a 24:8:8 per-class split).

import { readdirSync, statSync } from "node:fs";
import { join } from "node:path";

export class LayoutError extends Error {}

export const ESC50_CLASSES = 50;
export const ESC50_FOLDS = 5;
export const ESC50_CLIPS_PER_CLASS = 40;
export const ESC50_TASKS = 5;
export const ESC50_CLASSES_PER_TASK = 10;

const NAME_RE = /^([1-5])-(\d+)-([A-Za-z]\d*)-(\d+)\.wav$/;

export interface Esc50Clip {
  path: string;
  fold: number; // 1..5
  target: number; // 0..49
}

export interface Esc50Scan {
  clips: Esc50Clip[];
  warnings: string[];
}

export function scanEsc50(root: string, strict: boolean): Esc50Scan {
  let dir = root;
  try {
    const audio = join(root, "audio");
    if (statSync(audio).isDirectory()) dir = audio;
  } catch {
    // no audio/ subdirectory; clips live at the root
  }

  let names: string[];
  try {
    names = readdirSync(dir);
  } catch {
    throw new LayoutError(`dataset root not readable: ${dir}`);
  }

  const warnings: string[] = [];
  const clips: Esc50Clip[] = [];
  for (const name of names) {
    if (!name.toLowerCase().endsWith(".wav")) continue;
    const m = NAME_RE.exec(name);
    if (!m) {
      const note = `unrecognized clip name: ${name}`;
      if (strict) throw new LayoutError(note);
      warnings.push(note);
      continue;
    }
    const target = parseInt(m[4]!, 10);
    if (target >= ESC50_CLASSES) {
      throw new LayoutError(`${name}: target ${target} outside 0..${ESC50_CLASSES - 1}`);
    }
    clips.push({ path: join(dir, name), fold: parseInt(m[1]!, 10), target });
  }
  if (clips.length === 0) throw new LayoutError(`no clips found under ${dir}`);
  clips.sort((a, b) => (a.path < b.path ? -1 : a.path > b.path ? 1 : 0));

  // per-class and per-(class, fold) counts against the published statistics
  const perClass = new Array<number>(ESC50_CLASSES).fill(0);
  const perCell = new Map<string, number>();
  for (const c of clips) {
    perClass[c.target]!++;
    const key = `${c.target}:${c.fold}`;
    perCell.set(key, (perCell.get(key) ?? 0) + 1);
  }
  const perFoldExpected = ESC50_CLIPS_PER_CLASS / ESC50_FOLDS;
  for (let t = 0; t < ESC50_CLASSES; t++) {
    if (perClass[t] !== ESC50_CLIPS_PER_CLASS) {
      const note = `class ${t}: ${perClass[t]} clips, expected ${ESC50_CLIPS_PER_CLASS}`;
      if (strict) throw new LayoutError(note);
      warnings.push(note);
    }
    for (let f = 1; f <= ESC50_FOLDS; f++) {
      const n = perCell.get(`${t}:${f}`) ?? 0;
      if (n !== perFoldExpected) {
        const note = `class ${t} fold ${f}: ${n} clips, expected ${perFoldExpected}`;
        if (strict) throw new LayoutError(note);
        warnings.push(note);
      }
    }
  }
  return { clips, warnings };
}

export function esc50TaskClasses(task: number): number[] {
  // task 1 covers targets 0..9, task 2 covers 10..19, and so on
  const base = (task - 1) * ESC50_CLASSES_PER_TASK;
  return Array.from({ length: ESC50_CLASSES_PER_TASK }, (_, i) => base + i);
}

export interface FoldRotation {
  testFold: number;
  valFold: number;
  trainFolds: number[];
}

export function foldRotations(): FoldRotation[] {
  const out: FoldRotation[] = [];
  for (let f = 1; f <= ESC50_FOLDS; f++) {
    const valFold = (f % ESC50_FOLDS) + 1;
    const trainFolds = [];
    for (let g = 1; g <= ESC50_FOLDS; g++) {
      if (g !== f && g !== valFold) trainFolds.push(g);
    }
    out.push({ testFold: f, valFold, trainFolds });
  }
  return out;
}
