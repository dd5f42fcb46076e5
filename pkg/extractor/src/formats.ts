/** Readers and writers for the statenet on-disk formats.
 *
 * These must stay byte-compatible with the Python side: corpus files are
 * LF-terminated lines of space-joined surfaces; embedding files carry the
 * `LSE1` header (u32 version, u32 dim, u64 sentence count, little-endian)
 * with float32 payloads; tag files are 4-column TSV rows in corpus order.
 */

import * as fs from "node:fs";

export const EMBEDDING_MAGIC = "LSE1";
export const UNTAGGED = "—";
export const SUBWORD_PREFIX = "##";

export type Corpus = string[][]; // sentences of token surfaces

export interface EmbeddingStore {
  dim: number;
  sequences: Float32Array[]; // row-major (length * dim) per sentence
}

export function readCorpus(path: string): Corpus {
  const text = fs.readFileSync(path, "utf-8");
  if (text === "") throw new Error(`${path}: empty corpus file`);
  const lines = text.split("\n");
  if (lines.length && lines[lines.length - 1] === "") lines.pop();
  return lines.map((line, i) => {
    if (line === "" || line !== line.trim() || line.includes("  ")) {
      throw new Error(`${path}: malformed line ${i + 1}`);
    }
    return line.split(" ");
  });
}

export function writeCorpus(corpus: Corpus, path: string): void {
  const body = corpus.map((s) => s.join(" ")).join("\n") + "\n";
  fs.writeFileSync(path, body, "utf-8");
}

export function writeEmbeddings(store: EmbeddingStore, path: string): void {
  const headers = Buffer.alloc(4 + 4 + 4 + 8);
  headers.write(EMBEDDING_MAGIC, 0, "ascii");
  headers.writeUInt32LE(1, 4);
  headers.writeUInt32LE(store.dim, 8);
  headers.writeBigUInt64LE(BigInt(store.sequences.length), 12);
  const parts: Buffer[] = [headers];
  for (const seq of store.sequences) {
    const length = seq.length / store.dim;
    if (!Number.isInteger(length)) {
      throw new Error(`sequence size ${seq.length} is not a multiple of dim ${store.dim}`);
    }
    const head = Buffer.alloc(4);
    head.writeUInt32LE(length, 0);
    parts.push(head);
    const payload = Buffer.alloc(4 * seq.length);
    for (let i = 0; i < seq.length; i++) payload.writeFloatLE(seq[i], 4 * i);
    parts.push(payload);
  }
  fs.writeFileSync(path, Buffer.concat(parts));
}

export function readEmbeddings(path: string): EmbeddingStore {
  const raw = fs.readFileSync(path);
  if (raw.subarray(0, 4).toString("ascii") !== EMBEDDING_MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = raw.readUInt32LE(4);
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const dim = raw.readUInt32LE(8);
  const count = Number(raw.readBigUInt64LE(12));
  let offset = 20;
  const sequences: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    if (offset + 4 > raw.length) throw new Error(`${path}: truncated payload at sentence ${i}`);
    const length = raw.readUInt32LE(offset);
    offset += 4;
    const values = new Float32Array(length * dim);
    if (offset + 4 * values.length > raw.length) {
      throw new Error(`${path}: truncated payload at sentence ${i}`);
    }
    for (let j = 0; j < values.length; j++) values[j] = raw.readFloatLE(offset + 4 * j);
    offset += 4 * values.length;
    sequences.push(values);
  }
  if (offset !== raw.length) throw new Error(`${path}: trailing bytes`);
  return { dim, sequences };
}

export type TagRows = string[][]; // mirrors the corpus shape

export function writeTags(corpus: Corpus, tags: TagRows, path: string): void {
  if (tags.length !== corpus.length) throw new Error("tag shape does not match corpus");
  const lines: string[] = [];
  corpus.forEach((sent, si) => {
    if (tags[si].length !== sent.length) {
      throw new Error(`tag sentence ${si} length mismatch`);
    }
    sent.forEach((surface, ti) => {
      lines.push(`${si}\t${ti}\t${surface}\t${tags[si][ti]}`);
    });
  });
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function readTags(corpus: Corpus, path: string): TagRows {
  const text = fs.readFileSync(path, "utf-8");
  const lines = text.split("\n");
  if (lines.length && lines[lines.length - 1] === "") lines.pop();
  const out: TagRows = corpus.map((s) => s.map(() => ""));
  const expected: Array<[number, number]> = [];
  corpus.forEach((sent, si) => sent.forEach((_, ti) => expected.push([si, ti])));
  if (lines.length !== expected.length) {
    throw new Error(`${path}: ${lines.length} rows for ${expected.length} tokens`);
  }
  lines.forEach((line, k) => {
    const parts = line.split("\t");
    if (parts.length !== 4) throw new Error(`${path}: row ${k + 1}: expected 4 fields`);
    const [esi, eti] = expected[k];
    if (Number(parts[0]) !== esi || Number(parts[1]) !== eti) {
      throw new Error(`${path}: row ${k + 1}: out of order`);
    }
    if (parts[2] !== corpus[esi][eti]) {
      throw new Error(`${path}: row ${k + 1}: surface mismatch`);
    }
    out[esi][eti] = parts[3];
  });
  return out;
}
