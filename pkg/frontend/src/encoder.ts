/**
 * Embedding backends.
 *
 * `PigmentEncoder` is a deterministic, dependency-free stand-in: images embed
 * by color statistics and texts by matching color words against the same
 * feature space, so a category naming a color genuinely wins the similarity
 * argmax on a probe image of that color.  `ClipEncoder` drives a real
 * vision-language model through @xenova/transformers when that package and
 * its weights are available locally.
 */

import { createHash } from "node:crypto";

import { RgbImage } from "./png";

export interface EmbeddingModel {
  readonly id: string;
  embedImage(image: RgbImage): Promise<Float64Array>;
  embedText(text: string): Promise<Float64Array>;
}

const COLOR_WORDS: Record<string, [number, number, number]> = {
  red: [255, 0, 0],
  green: [0, 255, 0],
  blue: [0, 0, 255],
  yellow: [255, 255, 0],
  cyan: [0, 255, 255],
  magenta: [255, 0, 255],
  white: [255, 255, 255],
  black: [0, 0, 0],
  gray: [128, 128, 128],
  grey: [128, 128, 128],
  orange: [255, 128, 0],
  purple: [128, 0, 128],
};

function normalize(v: Float64Array): Float64Array {
  let norm = 0;
  for (const x of v) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm === 0) throw new Error("zero-norm embedding");
  return v.map((x) => x / norm);
}

/** Shared 7-dim color feature; the constant tail keeps the norm positive. */
function colorFeature(r: number, g: number, b: number): Float64Array {
  const lum = (r + g + b) / 3;
  return normalize(
    Float64Array.from([r, g, b, r - g, (r + g) / 2 - b, lum, 0.25]),
  );
}

export class PigmentEncoder implements EmbeddingModel {
  readonly id = "pigment";

  async embedImage(image: RgbImage): Promise<Float64Array> {
    const n = image.width * image.height;
    let r = 0;
    let g = 0;
    let b = 0;
    for (let i = 0; i < n; i++) {
      r += image.pixels[i * 3];
      g += image.pixels[i * 3 + 1];
      b += image.pixels[i * 3 + 2];
    }
    return colorFeature(r / (n * 255), g / (n * 255), b / (n * 255));
  }

  async embedText(text: string): Promise<Float64Array> {
    const words = text.toLowerCase().split(/[^a-z]+/);
    const hits = words.filter((w) => w in COLOR_WORDS);
    if (hits.length > 0) {
      let r = 0;
      let g = 0;
      let b = 0;
      for (const w of hits) {
        const [cr, cg, cb] = COLOR_WORDS[w];
        r += cr / 255;
        g += cg / 255;
        b += cb / 255;
      }
      return colorFeature(r / hits.length, g / hits.length, b / hits.length);
    }
    // colorless text: a stable direction derived from the text alone, far
    // from every color prototype so it never wins a probe argmax
    const digest = createHash("sha256").update(text).digest();
    const v = new Float64Array(7);
    for (let i = 0; i < 7; i++) v[i] = (digest[i] / 255 - 0.5) * 0.05;
    v[6] = 1.0;
    return normalize(v);
  }
}

export class ClipEncoder implements EmbeddingModel {
  private extractor: { image: any; text: any } | null = null;

  constructor(readonly id: string) {}

  private async load() {
    if (this.extractor) return this.extractor;
    const moduleName = "@xenova/transformers";
    let mod: any;
    try {
      mod = await import(moduleName);
    } catch (err) {
      throw new Error(
        `cannot load vision-language model ${JSON.stringify(this.id)}: ` +
          `${moduleName} is not installed (${(err as Error).message})`,
      );
    }
    const image = await mod.pipeline("image-feature-extraction", this.id);
    const text = await mod.pipeline("feature-extraction", this.id);
    this.extractor = { image, text };
    return this.extractor;
  }

  async embedImage(image: RgbImage): Promise<Float64Array> {
    const { image: extractor } = await this.load();
    const out = await extractor(image);
    return normalize(Float64Array.from(out.data as number[]));
  }

  async embedText(text: string): Promise<Float64Array> {
    const { text: extractor } = await this.load();
    const out = await extractor(text, { pooling: "mean" });
    return normalize(Float64Array.from(out.data as number[]));
  }
}

export function makeEncoder(spec: string): EmbeddingModel {
  if (spec === "pigment") return new PigmentEncoder();
  if (spec.startsWith("clip:")) return new ClipEncoder(spec.slice("clip:".length));
  throw new Error(`unknown model spec ${JSON.stringify(spec)}; use "pigment" or "clip:<model id>"`);
}
