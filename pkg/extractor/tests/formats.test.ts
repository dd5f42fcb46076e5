import { describe, expect, it } from "vitest";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import {
  readCorpus,
  readEmbeddings,
  readTags,
  writeCorpus,
  writeEmbeddings,
  writeTags,
  UNTAGGED,
} from "../src/formats.js";

function tmp(name: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "extractor-"));
  return path.join(dir, name);
}

describe("corpus format", () => {
  it("round-trips and keeps byte-identical rewrites", () => {
    const corpus = [["the", "cat"], ["a", "##s", "dog"]];
    const p1 = tmp("c1.txt");
    const p2 = tmp("c2.txt");
    writeCorpus(corpus, p1);
    writeCorpus(readCorpus(p1), p2);
    expect(fs.readFileSync(p1)).toEqual(fs.readFileSync(p2));
    expect(readCorpus(p1)).toEqual(corpus);
  });

  it("rejects malformed lines", () => {
    const p = tmp("bad.txt");
    fs.writeFileSync(p, "a b\n\nc\n");
    expect(() => readCorpus(p)).toThrow(/line 2/);
  });
});

describe("embedding format", () => {
  it("round-trips header and payload", () => {
    const store = {
      dim: 3,
      sequences: [Float32Array.from([1, 2, 3, 4, 5, 6]), Float32Array.from([7, 8, 9])],
    };
    const p = tmp("e.lse");
    writeEmbeddings(store, p);
    const back = readEmbeddings(p);
    expect(back.dim).toBe(3);
    expect(Array.from(back.sequences[0])).toEqual([1, 2, 3, 4, 5, 6]);
    expect(Array.from(back.sequences[1])).toEqual([7, 8, 9]);
  });

  it("has the documented header layout", () => {
    const p = tmp("e.lse");
    writeEmbeddings({ dim: 2, sequences: [Float32Array.from([1, 2])] }, p);
    const raw = fs.readFileSync(p);
    expect(raw.subarray(0, 4).toString("ascii")).toBe("LSE1");
    expect(raw.readUInt32LE(4)).toBe(1); // version
    expect(raw.readUInt32LE(8)).toBe(2); // dim
    expect(Number(raw.readBigUInt64LE(12))).toBe(1); // sentences
    expect(raw.readUInt32LE(20)).toBe(1); // first length
    expect(raw.length).toBe(20 + 4 + 8);
  });

  it("detects truncation", () => {
    const p = tmp("e.lse");
    writeEmbeddings({ dim: 2, sequences: [Float32Array.from([1, 2, 3, 4])] }, p);
    fs.writeFileSync(p, fs.readFileSync(p).subarray(0, 25));
    expect(() => readEmbeddings(p)).toThrow(/truncated/);
  });
});

describe("tag format", () => {
  it("round-trips with the untagged sentinel", () => {
    const corpus = [["the", "cat"], ["dog"]];
    const tags = [["DET", "NOUN"], [UNTAGGED]];
    const p = tmp("t.tsv");
    writeTags(corpus, tags, p);
    expect(readTags(corpus, p)).toEqual(tags);
    const text = fs.readFileSync(p, "utf-8");
    expect(text).toBe(`0\t0\tthe\tDET\n0\t1\tcat\tNOUN\n1\t0\tdog\t${UNTAGGED}\n`);
  });

  it("rejects surface mismatches", () => {
    const corpus = [["the"]];
    const p = tmp("t.tsv");
    fs.writeFileSync(p, "0\t0\twrong\tDET\n");
    expect(() => readTags(corpus, p)).toThrow(/surface/);
  });
});
