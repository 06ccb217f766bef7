import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import { test } from "node:test";

import { middleTimestamps, probeDuration } from "../src/frames";

const hasFfmpeg = spawnSync("ffprobe", ["-version"]).status === 0;

test("middle timestamps split the duration evenly", () => {
  const ts = middleTimestamps(10.0, 10);
  assert.equal(ts.length, 10);
  assert.ok(Math.abs(ts[0] - 0.5) < 1e-12);
  assert.ok(Math.abs(ts[9] - 9.5) < 1e-12);
  assert.deepEqual(middleTimestamps(6.0, 1), [3.0]);
});

test("missing video file is reported by name", () => {
  assert.throws(() => probeDuration("/nowhere/clip.mp4"), /missing video file: \/nowhere\/clip.mp4/);
});

test("decoding is exercised when ffmpeg is present", { skip: !hasFfmpeg }, () => {
  // environments with ffmpeg extract real frames; covered by extractFrames
  // on a generated clip
  const gen = spawnSync("ffmpeg", [
    "-v", "error", "-f", "lavfi", "-i", "color=red:s=32x32:d=3", "-y", "/tmp/adapter_clip.mp4",
  ]);
  assert.equal(gen.status, 0);
  const { extractFrames } = require("../src/frames");
  const frames = extractFrames("/tmp/adapter_clip.mp4", 3);
  assert.equal(frames.length, 3);
});
