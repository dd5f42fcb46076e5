/** Extractor command line: extract, baseline-random, baseline-positional,
 * annotate. Every output is one of the statenet file formats. */

import { parseArgs } from "node:util";
import * as path from "node:path";

import { annotate, Kind, KINDS } from "./annotate.js";
import { baselinePositional, baselineRandom } from "./baselines.js";
import { extract } from "./extract.js";
import { readCorpus, writeTags } from "./formats.js";

function usage(): never {
  console.error(
    [
      "usage:",
      "  extract             --corpus raw.txt --model toy-mlm-32x2 --layer last",
      "                      --out-embeddings e.lse --out-corpus c.txt [--keep-special]",
      "  baseline-random     --corpus c.txt --reference e.lse --seed 0 --out r.lse",
      "  baseline-positional --corpus c.txt --model toy-mlm-32x2 --out p.lse",
      "  annotate            --corpus c.txt --kinds POS,ENT,DEP --out-dir tags/",
    ].join("\n"),
  );
  process.exit(1);
}

function need(value: string | undefined, flag: string): string {
  if (value === undefined) {
    console.error(`missing required flag ${flag}`);
    usage();
  }
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command) usage();
  const { values } = parseArgs({
    args: rest,
    options: {
      corpus: { type: "string" },
      model: { type: "string" },
      layer: { type: "string", default: "last" },
      reference: { type: "string" },
      seed: { type: "string", default: "0" },
      kinds: { type: "string", default: "POS,ENT,DEP" },
      "out-embeddings": { type: "string" },
      "out-corpus": { type: "string" },
      "out-dir": { type: "string" },
      out: { type: "string" },
      "keep-special": { type: "boolean", default: false },
      "batch-size": { type: "string", default: "16" },
    },
  });

  switch (command) {
    case "extract": {
      const layerRaw = values.layer as string;
      const result = extract({
        corpusPath: need(values.corpus, "--corpus"),
        modelId: need(values.model, "--model"),
        layer: layerRaw === "last" ? "last" : Number(layerRaw),
        outEmbeddings: need(values["out-embeddings"], "--out-embeddings"),
        outCorpus: need(values["out-corpus"], "--out-corpus"),
        keepSpecial: values["keep-special"] as boolean,
        batchSize: Number(values["batch-size"]),
      });
      console.log(
        `extracted layer ${result.layer}: ${result.sentences.length} sentences, dim ${result.dim}`,
      );
      return 0;
    }
    case "baseline-random": {
      baselineRandom(
        need(values.corpus, "--corpus"),
        need(values.reference, "--reference"),
        Number(values.seed),
        need(values.out, "--out"),
      );
      console.log("baseline-random written");
      return 0;
    }
    case "baseline-positional": {
      baselinePositional(
        need(values.corpus, "--corpus"),
        need(values.model, "--model"),
        need(values.out, "--out"),
      );
      console.log("baseline-positional written");
      return 0;
    }
    case "annotate": {
      const corpusPath = need(values.corpus, "--corpus");
      const outDir = need(values["out-dir"], "--out-dir");
      const kinds = (values.kinds as string).split(",").map((k) => k.trim().toUpperCase()) as Kind[];
      for (const k of kinds) {
        if (!KINDS.includes(k)) {
          console.error(`unknown annotation kind ${k}`);
          return 1;
        }
      }
      const corpus = readCorpus(corpusPath);
      const layers = annotate(corpus, kinds);
      for (const [kind, rows] of layers) {
        writeTags(corpus, rows, path.join(outDir, `${kind.toLowerCase()}.tsv`));
      }
      console.log(`annotated ${kinds.join(", ")}`);
      return 0;
    }
    default:
      usage();
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(path.basename(process.argv[1]));
if (isMain) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(String(err));
    process.exit(2);
  }
}
