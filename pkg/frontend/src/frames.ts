/**
 * Frame sampling: one frame per equal-length segment, taken at the segment's
 * middle timestamp.  Decoding shells out to ffmpeg/ffprobe; environments
 * without them can feed pre-extracted frame images to the CLI instead.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { decodePng, RgbImage } from "./png";

export function probeDuration(videoPath: string): number {
  if (!fs.existsSync(videoPath)) {
    throw new Error(`missing video file: ${videoPath}`);
  }
  const out = spawnSync("ffprobe", [
    "-v", "error",
    "-show_entries", "format=duration",
    "-of", "csv=p=0",
    videoPath,
  ], { encoding: "utf-8" });
  if (out.error || out.status !== 0) {
    throw new Error(`cannot decode ${videoPath}: ${out.error?.message ?? out.stderr}`);
  }
  const duration = parseFloat(out.stdout.trim());
  if (!Number.isFinite(duration) || duration <= 0) {
    throw new Error(`cannot decode ${videoPath}: no duration reported`);
  }
  return duration;
}

export function middleTimestamps(duration: number, segments: number): number[] {
  const length = duration / segments;
  return Array.from({ length: segments }, (_, i) => (i + 0.5) * length);
}

export function extractFrames(videoPath: string, segments: number): RgbImage[] {
  if (segments < 1) throw new Error("segment count must be >= 1");
  const duration = probeDuration(videoPath);
  if (duration < segments) {
    throw new Error(
      `video ${videoPath} is ${duration.toFixed(2)}s long, too short for ${segments} segments`,
    );
  }
  const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "clip-adapter-"));
  try {
    const frames: RgbImage[] = [];
    for (const [i, ts] of middleTimestamps(duration, segments).entries()) {
      const framePath = path.join(tmp, `frame_${i}.png`);
      const out = spawnSync("ffmpeg", [
        "-v", "error",
        "-ss", ts.toFixed(4),
        "-i", videoPath,
        "-frames:v", "1",
        "-y", framePath,
      ], { encoding: "utf-8" });
      if (out.error || out.status !== 0 || !fs.existsSync(framePath)) {
        throw new Error(`cannot decode ${videoPath} at ${ts.toFixed(2)}s: ${out.error?.message ?? out.stderr}`);
      }
      frames.push(decodePng(fs.readFileSync(framePath)));
    }
    return frames;
  } finally {
    fs.rmSync(tmp, { recursive: true, force: true });
  }
}

export function loadFrameDir(dir: string): RgbImage[] {
  if (!fs.existsSync(dir)) throw new Error(`missing frames directory: ${dir}`);
  const files = fs.readdirSync(dir).filter((f) => f.toLowerCase().endsWith(".png")).sort();
  if (files.length === 0) throw new Error(`no .png frames under ${dir}`);
  return files.map((f) => decodePng(fs.readFileSync(path.join(dir, f))));
}
