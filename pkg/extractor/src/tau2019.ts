// TAU Urban Acoustic Scenes 2019 development layout: clips named
// {scene}-{city}-{location}-{segment}-{device}.wav listed in
// evaluation_setup/fold1_train.csv and fold1_evaluate.csv (tab separated,
// with a header row). The incremental sequence has one task per city over
// the same 10 scene classes; a fifth of each city's training clips is
// held out as validation, and the official evaluate list is the test set.

import { readFileSync } from "node:fs";
import { basename, join } from "node:path";
import { LayoutError } from "./esc50.js";

export const TAU_SCENES = [
  "airport",
  "bus",
  "metro",
  "metro_station",
  "park",
  "public_square",
  "shopping_mall",
  "street_pedestrian",
  "street_traffic",
  "tram",
] as const;

// the nine cities that form the task sequence, in manifest order
export const TAU_CITIES = [
  "barcelona",
  "helsinki",
  "lisbon",
  "london",
  "lyon",
  "paris",
  "prague",
  "stockholm",
  "vienna",
] as const;

export const VAL_EVERY = 5; // every 5th training clip per (city, scene)

export interface TauClip {
  path: string;
  scene: number; // index into TAU_SCENES
  city: string;
}

export interface TauSplit {
  train: TauClip[];
  val: TauClip[];
  test: TauClip[];
}

export interface TauScan {
  byCity: Map<string, TauSplit>;
  warnings: string[];
}

function parseCsv(path: string, root: string, warnings: string[], strict: boolean): TauClip[] {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch {
    throw new LayoutError(`missing split list: ${path}`);
  }
  const clips: TauClip[] = [];
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (!line) continue;
    const cols = line.split(/[\t ]+/);
    const file = cols[0]!;
    if (file === "filename") continue; // header
    const name = basename(file);
    const stem = name.replace(/\.wav$/i, "");
    const parts = stem.split("-");
    if (parts.length !== 5) {
      const note = `${path}: clip name not scene-city-location-segment-device: ${name}`;
      if (strict) throw new LayoutError(note);
      warnings.push(note);
      continue;
    }
    const sceneName = cols.length > 1 ? cols[1]! : parts[0]!;
    const scene = (TAU_SCENES as readonly string[]).indexOf(sceneName);
    if (scene < 0) {
      throw new LayoutError(`${path}: unknown scene label '${sceneName}' for ${name}`);
    }
    clips.push({ path: join(root, file), scene, city: parts[1]! });
  }
  return clips;
}

export function scanTau2019(root: string, strict: boolean): TauScan {
  const setup = join(root, "evaluation_setup");
  const warnings: string[] = [];
  const trainAll = parseCsv(join(setup, "fold1_train.csv"), root, warnings, strict);
  const testAll = parseCsv(join(setup, "fold1_evaluate.csv"), root, warnings, strict);

  const wanted = new Set<string>(TAU_CITIES);
  const byCity = new Map<string, TauSplit>();
  for (const city of TAU_CITIES) {
    byCity.set(city, { train: [], val: [], test: [] });
  }

  // per (city, scene) training lists, split 80/20 deterministically
  const cells = new Map<string, TauClip[]>();
  for (const clip of trainAll) {
    if (!wanted.has(clip.city)) continue; // cities outside the task sequence
    const key = `${clip.city}:${clip.scene}`;
    let cell = cells.get(key);
    if (!cell) cells.set(key, (cell = []));
    cell.push(clip);
  }
  for (const [key, cell] of cells) {
    cell.sort((a, b) => (a.path < b.path ? -1 : 1));
    const split = byCity.get(key.split(":")[0]!)!;
    cell.forEach((clip, i) => {
      (i % VAL_EVERY === 0 ? split.val : split.train).push(clip);
    });
  }
  for (const clip of testAll) {
    if (!wanted.has(clip.city)) continue;
    byCity.get(clip.city)!.test.push(clip);
  }

  for (const city of TAU_CITIES) {
    const split = byCity.get(city)!;
    if (split.train.length === 0 && split.val.length === 0) {
      throw new LayoutError(`city '${city}' has no training clips in the split lists`);
    }
    if (split.test.length === 0) {
      throw new LayoutError(`city '${city}' has no test clips in the evaluate list`);
    }
    const trainScenes = new Set(split.train.map((c) => c.scene));
    if (trainScenes.size !== TAU_SCENES.length) {
      const missing = TAU_SCENES.filter((_, i) => !trainScenes.has(i));
      throw new LayoutError(
        `city '${city}' training split misses scene(s): ${missing.join(", ")}`,
      );
    }
  }
  return { byCity, warnings };
}
