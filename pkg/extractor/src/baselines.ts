/** Baseline embedding stores: type-level random vectors and pure positions. */

import { readCorpus, readEmbeddings, writeEmbeddings } from "./formats.js";
import { ToyMaskedLM } from "./model.js";
import { Rng } from "./prng.js";

/** One Gaussian vector per vocabulary type, moments matched per dimension to
 * the reference store; the same word gets the same row everywhere. */
export function baselineRandom(
  corpusPath: string,
  referencePath: string,
  seed: number,
  outPath: string,
): void {
  const corpus = readCorpus(corpusPath);
  const ref = readEmbeddings(referencePath);
  const dim = ref.dim;

  const mean = new Float64Array(dim);
  const sq = new Float64Array(dim);
  let n = 0;
  for (const seq of ref.sequences) {
    const rows = seq.length / dim;
    for (let t = 0; t < rows; t++) {
      for (let i = 0; i < dim; i++) {
        mean[i] += seq[t * dim + i];
        sq[i] += seq[t * dim + i] * seq[t * dim + i];
      }
      n++;
    }
  }
  const sd = new Float64Array(dim);
  for (let i = 0; i < dim; i++) {
    mean[i] /= n;
    sd[i] = Math.sqrt(Math.max(sq[i] / n - mean[i] * mean[i], 0));
  }

  const rng = new Rng(seed);
  const byType = new Map<string, Float64Array>();
  for (const sent of corpus) {
    for (const surface of sent) {
      if (!byType.has(surface)) {
        const row = new Float64Array(dim);
        for (let i = 0; i < dim; i++) row[i] = mean[i] + sd[i] * rng.gaussian();
        byType.set(surface, row);
      }
    }
  }

  const sequences = corpus.map((sent) => {
    const flat = new Float32Array(sent.length * dim);
    sent.forEach((surface, t) => flat.set(Float32Array.from(byType.get(surface)!), t * dim));
    return flat;
  });
  writeEmbeddings({ dim, sequences }, outPath);
}

/** The model's positional table as the embedding: position t everywhere. */
export function baselinePositional(corpusPath: string, modelId: string, outPath: string): void {
  const corpus = readCorpus(corpusPath);
  const model = new ToyMaskedLM(modelId);
  const dim = model.spec.dim;
  const sequences = corpus.map((sent, si) => {
    if (sent.length > model.positions.length) {
      throw new Error(`sentence ${si} longer than the positional table (${model.positions.length})`);
    }
    const flat = new Float32Array(sent.length * dim);
    sent.forEach((_, t) => flat.set(Float32Array.from(model.positions[t]), t * dim));
    return flat;
  });
  writeEmbeddings({ dim, sequences }, outPath);
}
