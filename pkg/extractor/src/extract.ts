/** Dump per-token hidden states from the (frozen) encoder into LSE1 files.
 *
 * The input corpus is raw text, one sentence per line; the extractor
 * re-tokenizes it and rewrites the corpus so its surfaces match the emitted
 * subword rows one to one. Lines that tokenize to nothing are dropped.
 */

import { EmbeddingStore, writeCorpus, writeEmbeddings } from "./formats.js";
import { ToyMaskedLM } from "./model.js";
import { CLS, SEP } from "./tokenizer.js";
import * as fs from "node:fs";

export interface ExtractJob {
  corpusPath: string;
  modelId: string;
  layer: number | "last";
  outEmbeddings: string;
  outCorpus: string;
  keepSpecial?: boolean;
  batchSize?: number; // accepted for interface parity; encoding is per sentence
}

export interface ExtractResult {
  sentences: string[][];
  dim: number;
  layer: number;
}

export function extract(job: ExtractJob): ExtractResult {
  const model = new ToyMaskedLM(job.modelId);
  const layer = job.layer === "last" ? model.layerCount : job.layer;
  if (layer < 0 || layer > model.layerCount) {
    throw new Error(`layer ${layer} out of range [0, ${model.layerCount}]`);
  }
  const raw = fs.readFileSync(job.corpusPath, "utf-8");
  const sentences: string[][] = [];
  for (const line of raw.split("\n")) {
    const pieces = model.tokenizer.tokenize(line);
    if (pieces.length > 0) sentences.push(pieces);
  }
  if (sentences.length === 0) throw new Error(`${job.corpusPath}: no usable sentences`);

  const keep = Boolean(job.keepSpecial);
  const outSentences: string[][] = [];
  const sequences: Float32Array[] = [];
  for (const pieces of sentences) {
    const rows = model.encode(pieces, layer, keep);
    const surfaces = keep ? [CLS, ...pieces, SEP] : pieces;
    const flat = new Float32Array(rows.length * model.spec.dim);
    rows.forEach((row, t) => flat.set(Float32Array.from(row), t * model.spec.dim));
    outSentences.push(surfaces);
    sequences.push(flat);
  }
  writeCorpus(outSentences, job.outCorpus);
  const store: EmbeddingStore = { dim: model.spec.dim, sequences };
  writeEmbeddings(store, job.outEmbeddings);
  return { sentences: outSentences, dim: model.spec.dim, layer };
}
