#!/usr/bin/env node
/**
 * Command line: score videos or pre-extracted frame images against a
 * category vocabulary and write clip_sim.csv plus a manifest stub per video.
 *
 *   clip-adapter --frames-dir DIR --categories FILE --out ROOT [--video-id ID]
 *   clip-adapter --video FILE --segments T --categories FILE --out ROOT
 *
 * Options: --prompt TEMPLATE (default "This photo contains the [CLS]"),
 * --model pigment|clip:<model id> (default pigment).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { AdapterConfig, DEFAULT_PROMPT, validateConfig } from "./config";
import { makeEncoder } from "./encoder";
import { extractFrames, loadFrameDir } from "./frames";
import { writeVideoOutputs } from "./output";
import { computeSimilarities } from "./similarity";

interface Args {
  framesDir?: string;
  video?: string;
  segments?: number;
  categories?: string;
  out?: string;
  prompt: string;
  model: string;
  videoId?: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { prompt: DEFAULT_PROMPT, model: "pigment" };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--frames-dir": args.framesDir = next(); break;
      case "--video": args.video = next(); break;
      case "--segments": args.segments = parseInt(next(), 10); break;
      case "--categories": args.categories = next(); break;
      case "--out": args.out = next(); break;
      case "--prompt": args.prompt = next(); break;
      case "--model": args.model = next(); break;
      case "--video-id": args.videoId = next(); break;
      case "--help":
      case "-h":
        console.log((module.exports?.__doc__ as string) ?? "see source header for usage");
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

export async function run(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  if (!args.categories) throw new Error("--categories FILE is required");
  if (!args.out) throw new Error("--out ROOT is required");
  if (!args.framesDir && !args.video) throw new Error("give --frames-dir or --video");
  if (args.framesDir && args.video) throw new Error("--frames-dir and --video are exclusive");

  const categories = fs
    .readFileSync(args.categories, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  const cfg: AdapterConfig = {
    promptTemplate: args.prompt,
    categories,
    model: args.model,
    outDir: args.out,
  };
  validateConfig(cfg);
  const encoder = makeEncoder(cfg.model);

  let frames;
  let videoId;
  if (args.framesDir) {
    frames = loadFrameDir(args.framesDir);
    videoId = args.videoId ?? path.basename(path.resolve(args.framesDir));
  } else {
    if (!args.segments || args.segments < 1) {
      throw new Error("--video needs --segments T");
    }
    frames = extractFrames(args.video!, args.segments);
    videoId = args.videoId ?? path.basename(args.video!).replace(/\.[^.]+$/, "");
  }
  const rows = await computeSimilarities(frames, cfg, encoder);
  const videoDir = writeVideoOutputs(cfg.outDir, videoId, categories, rows);
  console.log(`wrote ${rows.length} x ${categories.length} similarities under ${videoDir}`);
  return 0;
}

if (require.main === module) {
  run(process.argv.slice(2))
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(`error: ${err.message}`);
      process.exit(2);
    });
}
