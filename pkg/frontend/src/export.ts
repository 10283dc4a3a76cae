// Corpus embedding exporter: tokenizes each utterance text, runs the
// stand-in contextual encoder, writes embeds/<id>.ktns into the corpus and
// records what produced them in config.json.  Re-running with the same
// model id and layer rewrites every file with identical bytes.

import * as fs from "fs";
import * as path from "path";

import { CONTEXT_LAYERS, DEFAULT_MODEL, encode, modelDim } from "./encoder";
import { writeKtns } from "./ktns";
import { tokenize, vocabHash } from "./wordpiece";

export { DEFAULT_MODEL };

export interface ExportSummary {
  utterances: number;
  model: string;
  dim: number;
  layer: number;
  vocab_hash: string;
}

// Python-style JSON: sorted keys, ", " and ": " separators, ASCII escapes.
// The corpus loader takes any valid JSON; one canonical form just keeps
// repeated exports byte-identical.
export function canonJson(value: unknown): string {
  if (value === null || value === undefined) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isFinite(value)) throw new Error("non-finite number in metadata");
    return JSON.stringify(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value).replace(/[-￿]/g,
      ch => "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0"));
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonJson).join(", ") + "]";
  }
  const obj = value as Record<string, unknown>;
  const parts = Object.keys(obj).sort().map(k => `${canonJson(k)}: ${canonJson(obj[k])}`);
  return "{" + parts.join(", ") + "}";
}

export function exportEmbeddings(
  corpusDir: string,
  modelId: string = DEFAULT_MODEL,
  layer: number = CONTEXT_LAYERS,
): ExportSummary {
  const configPath = path.join(corpusDir, "config.json");
  const metaPath = path.join(corpusDir, "meta.jsonl");
  if (!fs.existsSync(metaPath) || !fs.existsSync(configPath)) {
    throw new Error(`${corpusDir}: not a corpus directory (need config.json and meta.jsonl)`);
  }
  const config = JSON.parse(fs.readFileSync(configPath, "utf8"));
  const corpusDim = config.embedding_dim;
  if (typeof corpusDim !== "number") {
    throw new Error(`${configPath}: missing embedding_dim`);
  }
  const dim = modelDim(modelId);
  if (dim !== corpusDim) {
    throw new Error(`model ${modelId} writes ${dim}-dim embeddings, corpus wants ${corpusDim}`);
  }
  if (!Number.isInteger(layer) || layer < 0 || layer > CONTEXT_LAYERS) {
    throw new Error(`layer must be an integer in 0..${CONTEXT_LAYERS}, got ${layer}`);
  }

  fs.mkdirSync(path.join(corpusDir, "embeds"), { recursive: true });

  const lines = fs.readFileSync(metaPath, "utf8").split("\n").filter(l => l.trim().length > 0);
  const rewritten: string[] = [];
  for (const line of lines) {
    const row = JSON.parse(line);
    const pieces = tokenize(row.text ?? "");
    if (pieces.length === 0) {
      throw new Error(`utterance ${row.id}: tokenization produced no word-pieces`);
    }
    const vectors = encode(pieces, modelId, layer);
    const rel = `embeds/${row.id}.ktns`;
    writeKtns(path.join(corpusDir, rel), vectors, dim);
    row.embeddings = rel;
    row.wordpieces = pieces;
    rewritten.push(canonJson(row));
  }
  fs.writeFileSync(metaPath, rewritten.join("\n") + "\n");

  config.export = { model: modelId, dim, layer, vocab_hash: vocabHash() };
  fs.writeFileSync(configPath, JSON.stringify(config, null, 2) + "\n");

  return {
    utterances: lines.length,
    model: modelId,
    dim,
    layer,
    vocab_hash: config.export.vocab_hash,
  };
}
