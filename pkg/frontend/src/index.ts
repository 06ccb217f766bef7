export { AdapterConfig, DEFAULT_PROMPT, fillPrompt, validateConfig } from "./config";
export { EmbeddingModel, PigmentEncoder, ClipEncoder, makeEncoder } from "./encoder";
export { extractFrames, loadFrameDir, middleTimestamps, probeDuration } from "./frames";
export { decodePng, encodePng, solidColor, RgbImage } from "./png";
export { computeSimilarities, cosine, softmaxRow } from "./similarity";
export { writeSimilarityCsv, writeManifestStub, writeVideoOutputs } from "./output";
