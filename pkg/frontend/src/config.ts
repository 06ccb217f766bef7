/** Adapter configuration and prompt handling. */

export const DEFAULT_PROMPT = "This photo contains the [CLS]";
export const CLS_TOKEN = "[CLS]";

export interface AdapterConfig {
  /** Prompt template holding the [CLS] placeholder exactly once. */
  promptTemplate: string;
  /** Category vocabulary, order defines the CSV column order. */
  categories: string[];
  /** Encoder selector: "pigment" or "clip:<model id>". */
  model: string;
  /** Output dataset root; one directory per video is created below it. */
  outDir: string;
}

export function validateConfig(cfg: AdapterConfig): void {
  const hits = cfg.promptTemplate.split(CLS_TOKEN).length - 1;
  if (hits !== 1) {
    throw new Error(
      `prompt template must contain ${CLS_TOKEN} exactly once, found ${hits}: ${JSON.stringify(cfg.promptTemplate)}`,
    );
  }
  if (cfg.categories.length < 1) {
    throw new Error("at least one category is required");
  }
  const seen = new Set<string>();
  for (const name of cfg.categories) {
    if (!name) throw new Error("category names must be non-empty");
    if (name.includes(",") || name.includes("\n")) {
      throw new Error(`category name ${JSON.stringify(name)} cannot appear in a CSV header`);
    }
    if (seen.has(name)) throw new Error(`duplicate category ${JSON.stringify(name)}`);
    seen.add(name);
  }
}

export function fillPrompt(template: string, category: string): string {
  return template.replace(CLS_TOKEN, category);
}
