/** Deterministic toy masked-LM encoder with per-layer hidden states.
 *
 * A small pre-norm transformer whose weights derive from a seeded PRNG, so a
 * model identifier fully determines every output bit. Layer 0 is the static
 * token embedding table (one vector per vocabulary type, no position mixed
 * in); layers 1..L are contextual. Weights are never updated.
 *
 * Identifier grammar: `toy-mlm-{dim}x{layers}` with an optional `-seed{n}`
 * suffix, e.g. `toy-mlm-32x2` or `toy-mlm-16x1-seed7`.
 */

import { Rng, hashString } from "./prng.js";
import { CLS, SEP, Tokenizer } from "./tokenizer.js";

const MAX_POSITIONS = 512;

export interface ModelSpec {
  dim: number;
  layers: number;
  seed: number;
}

export function parseModelId(id: string): ModelSpec {
  const m = /^toy-mlm-(\d+)x(\d+)(?:-seed(\d+))?$/.exec(id);
  if (!m) throw new Error(`unknown model identifier: ${id}`);
  const dim = Number(m[1]);
  const layers = Number(m[2]);
  if (dim < 4 || dim % 2 !== 0) throw new Error(`model dim must be even and >= 4, got ${dim}`);
  if (layers < 1) throw new Error(`model needs at least one layer, got ${layers}`);
  const seed = m[3] !== undefined ? Number(m[3]) : hashString(id);
  return { dim, layers, seed };
}

type Mat = Float64Array[]; // rows

function randMatrix(rng: Rng, rows: number, cols: number, scale: number): Mat {
  const out: Mat = [];
  for (let r = 0; r < rows; r++) {
    const row = new Float64Array(cols);
    for (let c = 0; c < cols; c++) row[c] = scale * rng.gaussian();
    out.push(row);
  }
  return out;
}

function matVec(m: Mat, v: Float64Array): Float64Array {
  const out = new Float64Array(m.length);
  for (let r = 0; r < m.length; r++) {
    let acc = 0;
    const row = m[r];
    for (let c = 0; c < row.length; c++) acc += row[c] * v[c];
    out[r] = acc;
  }
  return out;
}

function layerNorm(v: Float64Array): Float64Array {
  let mean = 0;
  for (const x of v) mean += x;
  mean /= v.length;
  let varsum = 0;
  for (const x of v) varsum += (x - mean) * (x - mean);
  const inv = 1 / Math.sqrt(varsum / v.length + 1e-5);
  const out = new Float64Array(v.length);
  for (let i = 0; i < v.length; i++) out[i] = (v[i] - mean) * inv;
  return out;
}

function softmaxInPlace(v: Float64Array): void {
  let max = -Infinity;
  for (const x of v) if (x > max) max = x;
  let sum = 0;
  for (let i = 0; i < v.length; i++) {
    v[i] = Math.exp(v[i] - max);
    sum += v[i];
  }
  for (let i = 0; i < v.length; i++) v[i] /= sum;
}

interface Layer {
  wq: Mat;
  wk: Mat;
  wv: Mat;
  wo: Mat;
  ff1: Mat;
  ff2: Mat;
}

export class ToyMaskedLM {
  readonly spec: ModelSpec;
  readonly tokenizer: Tokenizer;
  readonly embeddings: Mat; // (vocab, dim): the layer-0 table
  readonly positions: Mat; // (MAX_POSITIONS, dim), sinusoidal
  private layers: Layer[];

  constructor(id: string) {
    this.spec = parseModelId(id);
    this.tokenizer = new Tokenizer();
    const { dim, layers, seed } = this.spec;
    const rng = new Rng(seed);
    const vocabSize = this.tokenizer.vocab.length;
    this.embeddings = randMatrix(rng, vocabSize, dim, 1.0);
    this.positions = [];
    for (let p = 0; p < MAX_POSITIONS; p++) {
      const row = new Float64Array(dim);
      for (let i = 0; i < dim / 2; i++) {
        const angle = p / Math.pow(10000, (2 * i) / dim);
        row[2 * i] = Math.sin(angle);
        row[2 * i + 1] = Math.cos(angle);
      }
      this.positions.push(row);
    }
    const scale = 1 / Math.sqrt(dim);
    this.layers = [];
    for (let l = 0; l < layers; l++) {
      this.layers.push({
        wq: randMatrix(rng, dim, dim, scale),
        wk: randMatrix(rng, dim, dim, scale),
        wv: randMatrix(rng, dim, dim, scale),
        wo: randMatrix(rng, dim, dim, scale),
        ff1: randMatrix(rng, 2 * dim, dim, scale),
        ff2: randMatrix(rng, dim, 2 * dim, scale),
      });
    }
  }

  get layerCount(): number {
    return this.spec.layers;
  }

  /** Hidden states of one subword sentence at the requested layer.
   *
   * `withSpecial` surrounds the sentence with [CLS]/[SEP] during encoding;
   * their rows are kept only when `keepSpecial` is also set.
   */
  encode(pieces: string[], layer: number, keepSpecial = false): Float64Array[] {
    if (layer < 0 || layer > this.spec.layers) {
      throw new Error(`layer ${layer} out of range [0, ${this.spec.layers}]`);
    }
    const padded = [CLS, ...pieces, SEP];
    if (padded.length > MAX_POSITIONS) {
      throw new Error(`sentence of ${pieces.length} pieces exceeds the position table`);
    }
    const ids = padded.map((p) => this.tokenizer.pieceId(p));
    if (layer === 0) {
      // static per-type embeddings, no positions: the "before context" view
      const rows = ids.map((id) => Float64Array.from(this.embeddings[id]));
      return keepSpecial ? rows : rows.slice(1, rows.length - 1);
    }
    let states: Float64Array[] = ids.map((id, t) => {
      const row = new Float64Array(this.spec.dim);
      for (let i = 0; i < row.length; i++) row[i] = this.embeddings[id][i] + this.positions[t][i];
      return row;
    });
    for (let l = 0; l < layer; l++) {
      states = this.applyLayer(this.layers[l], states);
    }
    return keepSpecial ? states : states.slice(1, states.length - 1);
  }

  private applyLayer(layer: Layer, states: Float64Array[]): Float64Array[] {
    const T = states.length;
    const dim = this.spec.dim;
    const normed = states.map(layerNorm);
    const qs = normed.map((s) => matVec(layer.wq, s));
    const ks = normed.map((s) => matVec(layer.wk, s));
    const vs = normed.map((s) => matVec(layer.wv, s));
    const attended: Float64Array[] = [];
    const invSqrt = 1 / Math.sqrt(dim);
    for (let t = 0; t < T; t++) {
      const scores = new Float64Array(T);
      for (let u = 0; u < T; u++) {
        let acc = 0;
        for (let i = 0; i < dim; i++) acc += qs[t][i] * ks[u][i];
        scores[u] = acc * invSqrt;
      }
      softmaxInPlace(scores);
      const mix = new Float64Array(dim);
      for (let u = 0; u < T; u++) {
        for (let i = 0; i < dim; i++) mix[i] += scores[u] * vs[u][i];
      }
      attended.push(matVec(layer.wo, mix));
    }
    const afterAttn = states.map((s, t) => {
      const out = new Float64Array(dim);
      for (let i = 0; i < dim; i++) out[i] = s[i] + attended[t][i];
      return out;
    });
    return afterAttn.map((s) => {
      const hidden = matVec(layer.ff1, layerNorm(s));
      for (let i = 0; i < hidden.length; i++) hidden[i] = Math.tanh(hidden[i]);
      const ff = matVec(layer.ff2, hidden);
      const out = new Float64Array(dim);
      for (let i = 0; i < dim; i++) out[i] = s[i] + ff[i];
      return out;
    });
  }
}
