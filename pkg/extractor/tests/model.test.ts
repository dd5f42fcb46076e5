import { describe, expect, it } from "vitest";

import { ToyMaskedLM, parseModelId } from "../src/model.js";
import { Tokenizer, wordSpans, spanWord } from "../src/tokenizer.js";

describe("tokenizer", () => {
  const tok = new Tokenizer();

  it("keeps known words whole and lowercases", () => {
    expect(tok.tokenize("The cat sat")).toEqual(["the", "cat", "sat"]);
  });

  it("decomposes unknown words with continuation pieces", () => {
    const pieces = tok.tokenize("jumped");
    expect(pieces.length).toBeGreaterThan(1);
    expect(pieces[0].startsWith("##")).toBe(false);
    for (const p of pieces.slice(1)) expect(p.startsWith("##")).toBe(true);
  });

  it("splits punctuation into separate tokens", () => {
    expect(tok.tokenize("cat, dog")).toEqual(["cat", ",", "dog"]);
  });

  it("word spans reassemble the original word", () => {
    const pieces = tok.tokenize("the jumped fox");
    const spans = wordSpans(pieces);
    const words = spans.map((s) => spanWord(pieces, s));
    expect(words).toEqual(["the", "jumped", "fox"]);
  });
});

describe("toy masked LM", () => {
  it("parses model identifiers", () => {
    const spec = parseModelId("toy-mlm-16x2-seed7");
    expect(spec).toMatchObject({ dim: 16, layers: 2, seed: 7 });
    expect(() => parseModelId("bert-base-uncased")).toThrow(/unknown model/);
  });

  it("is deterministic for the same identifier", () => {
    const a = new ToyMaskedLM("toy-mlm-16x2");
    const b = new ToyMaskedLM("toy-mlm-16x2");
    const ra = a.encode(["the", "cat"], 2);
    const rb = b.encode(["the", "cat"], 2);
    expect(ra.map((r) => Array.from(r))).toEqual(rb.map((r) => Array.from(r)));
  });

  it("layer 0 is static per type, later layers are contextual", () => {
    const m = new ToyMaskedLM("toy-mlm-16x2");
    const s1 = m.encode(["the", "cat", "the"], 0);
    // identical type, different positions: identical rows at layer 0
    expect(Array.from(s1[0])).toEqual(Array.from(s1[2]));
    const c1 = m.encode(["the", "cat", "the"], 2);
    const diff = c1[0].some((x, i) => Math.abs(x - c1[2][i]) > 1e-9);
    expect(diff).toBe(true);
    // and context changes the vector of the same type
    const c2 = m.encode(["the", "dog", "the"], 2);
    expect(c1[0].some((x, i) => Math.abs(x - c2[0][i]) > 1e-9)).toBe(true);
  });

  it("rejects out-of-range layers", () => {
    const m = new ToyMaskedLM("toy-mlm-16x2");
    expect(() => m.encode(["the"], 3)).toThrow(/out of range/);
  });

  it("keep-special retains the boundary rows", () => {
    const m = new ToyMaskedLM("toy-mlm-16x1");
    expect(m.encode(["the", "cat"], 1).length).toBe(2);
    expect(m.encode(["the", "cat"], 1, true).length).toBe(4);
  });
});
