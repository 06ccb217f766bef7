import assert from "node:assert/strict";
import { test } from "node:test";

import { decodePng, encodePng, solidColor } from "../src/png";

test("encode/decode round trip preserves every pixel", () => {
  const width = 5;
  const height = 4;
  const pixels = new Uint8Array(width * height * 3);
  for (let i = 0; i < pixels.length; i++) pixels[i] = (i * 37 + 11) % 256;
  const decoded = decodePng(encodePng({ width, height, pixels }));
  assert.equal(decoded.width, width);
  assert.equal(decoded.height, height);
  assert.deepEqual(Array.from(decoded.pixels), Array.from(pixels));
});

test("solid color helper fills uniformly", () => {
  const img = solidColor(3, 2, [200, 10, 30]);
  assert.equal(img.pixels.length, 18);
  assert.equal(img.pixels[0], 200);
  assert.equal(img.pixels[16], 10);
  assert.equal(img.pixels[17], 30);
});

test("garbage input is rejected", () => {
  assert.throws(() => decodePng(Buffer.from("definitely not a png")), /not a PNG/);
});

test("encoder validates the buffer size", () => {
  assert.throws(
    () => encodePng({ width: 2, height: 2, pixels: new Uint8Array(5) }),
    /expected 12/,
  );
});
