/** Cosine scoring of frames against filled category prompts, softmax per frame. */

import { AdapterConfig, fillPrompt, validateConfig } from "./config";
import { EmbeddingModel } from "./encoder";
import { RgbImage } from "./png";

export function cosine(a: Float64Array, b: Float64Array): number {
  if (a.length !== b.length) {
    throw new Error(`embedding dimensions differ: ${a.length} vs ${b.length}`);
  }
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na === 0 || nb === 0) throw new Error("zero-norm embedding");
  return dot / Math.sqrt(na * nb);
}

export function softmaxRow(logits: number[]): number[] {
  const max = Math.max(...logits);
  const exps = logits.map((x) => Math.exp(x - max));
  const sum = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / sum);
}

/** One row-stochastic similarity row per image, columns in category order. */
export async function computeSimilarities(
  images: RgbImage[],
  cfg: AdapterConfig,
  model: EmbeddingModel,
): Promise<number[][]> {
  validateConfig(cfg);
  if (images.length === 0) throw new Error("no frames to score");
  const textEmb = [];
  for (const category of cfg.categories) {
    textEmb.push(await model.embedText(fillPrompt(cfg.promptTemplate, category)));
  }
  const rows: number[][] = [];
  for (const image of images) {
    const imgEmb = await model.embedImage(image);
    rows.push(softmaxRow(textEmb.map((t) => cosine(imgEmb, t))));
  }
  return rows;
}
