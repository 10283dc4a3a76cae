#!/usr/bin/env node
// export-embeddings --corpus DIR [--model ID] [--layer N]

import { CONTEXT_LAYERS } from "./encoder";
import { DEFAULT_MODEL, exportEmbeddings } from "./export";

function usage(): never {
  console.error("usage: export-embeddings --corpus DIR [--model ID] [--layer N]");
  process.exit(2);
}

function main(): void {
  const argv = process.argv.slice(2);
  let corpus: string | undefined;
  let model = DEFAULT_MODEL;
  let layer = CONTEXT_LAYERS;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const value = argv[i + 1];
    if (arg === "--corpus" && value !== undefined) {
      corpus = value;
      i++;
    } else if (arg === "--model" && value !== undefined) {
      model = value;
      i++;
    } else if (arg === "--layer" && value !== undefined) {
      layer = parseInt(value, 10);
      i++;
    } else {
      usage();
    }
  }
  if (corpus === undefined || Number.isNaN(layer)) usage();
  try {
    const summary = exportEmbeddings(corpus, model, layer);
    console.log(JSON.stringify(summary, null, 2));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    process.exit(1);
  }
}

main();
