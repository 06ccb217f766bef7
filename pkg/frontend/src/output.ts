/**
 * Output files in the parsing toolkit's dataset layout: clip_sim.csv with a
 * category-name header and a manifest stub.  Writes are temp-file plus
 * rename, so a failure never leaves a partial artifact behind.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export function atomicWrite(filePath: string, text: string): void {
  const tmp = `${filePath}.tmp`;
  fs.writeFileSync(tmp, text, "utf-8");
  fs.renameSync(tmp, filePath);
}

export function writeSimilarityCsv(filePath: string, categories: string[], rows: number[][]): void {
  for (const row of rows) {
    if (row.length !== categories.length) {
      throw new Error(`row has ${row.length} entries for ${categories.length} categories`);
    }
    const sum = row.reduce((a, b) => a + b, 0);
    if (Math.abs(sum - 1.0) > 1e-6) {
      throw new Error(`similarity row sums to ${sum}, expected 1 within 1e-6`);
    }
  }
  const lines = [categories.join(",")];
  for (const row of rows) {
    lines.push(row.map((x) => String(x)).join(","));
  }
  atomicWrite(filePath, lines.join("\n") + "\n");
}

/**
 * Manifest stub: the adapter only knows the vocabulary and segment count.
 * The weak video label is not its to decide, so every category is marked
 * present; downstream stages overwrite the manifest when real labels exist.
 */
export function writeManifestStub(
  videoDir: string,
  videoId: string,
  segments: number,
  categories: string[],
): void {
  const doc = {
    schema_version: 1,
    video_id: videoId,
    T: segments,
    categories,
    video_label: categories.map(() => 1),
  };
  atomicWrite(path.join(videoDir, "manifest.json"), JSON.stringify(doc, null, 1) + "\n");
}

export function writeVideoOutputs(
  outRoot: string,
  videoId: string,
  categories: string[],
  rows: number[][],
): string {
  const videoDir = path.join(outRoot, videoId);
  fs.mkdirSync(videoDir, { recursive: true });
  writeManifestStub(videoDir, videoId, rows.length, categories);
  writeSimilarityCsv(path.join(videoDir, "clip_sim.csv"), categories, rows);
  return videoDir;
}
