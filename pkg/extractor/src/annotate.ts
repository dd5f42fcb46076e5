/** Rule-based per-token POS/ENT/DEP annotation in the tag-file format.
 *
 * Tags are decided at the word level, then copied to every subword piece of
 * the word. The rules are deterministic and deliberately simple; they exist
 * to produce well-formed, plausibly distributed tag layers, not to rival a
 * real parser.
 */

import { TagRows, UNTAGGED } from "./formats.js";
import { spanWord, wordSpans } from "./tokenizer.js";

export const KINDS = ["POS", "ENT", "DEP"] as const;
export type Kind = (typeof KINDS)[number];

const DET = new Set(["the", "a", "an", "this", "that", "these", "those", "each", "every", "some", "any", "no"]);
const PRON = new Set([
  "i", "me", "my", "myself", "we", "our", "ours", "you", "your", "he", "him", "his",
  "she", "her", "hers", "it", "its", "they", "them", "their", "who", "whom", "what", "which",
]);
const ADP = new Set([
  "of", "at", "by", "for", "with", "about", "against", "between", "into", "through",
  "during", "before", "after", "above", "below", "to", "from", "up", "down", "in",
  "out", "on", "off", "over", "under",
]);
const CCONJ = new Set(["and", "or", "but", "nor"]);
const SCONJ = new Set(["if", "because", "while", "as", "until", "when", "where", "since"]);
const AUX = new Set([
  "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had",
  "do", "does", "did", "can", "will", "should", "would", "could", "may", "might", "must",
]);
const ADV = new Set([
  "again", "further", "then", "once", "here", "there", "why", "how", "too", "very",
  "now", "never", "always", "often", "sometimes", "usually", "almost", "together", "alone",
  "not", "just", "early", "late",
]);
const VERB = new Set([
  "go", "goes", "went", "gone", "make", "made", "take", "took", "taken", "come", "came",
  "see", "saw", "seen", "know", "knew", "known", "get", "got", "find", "found", "think",
  "thought", "tell", "told", "become", "became", "show", "showed", "leave", "left",
  "feel", "felt", "put", "bring", "brought", "begin", "began", "keep", "kept", "hold",
  "held", "write", "wrote", "stand", "stood", "hear", "heard", "let", "mean", "meant",
  "set", "meet", "met", "run", "ran", "pay", "paid", "sit", "sat", "speak", "spoke",
  "lie", "lay", "lead", "led", "read", "grow", "grew", "lose", "lost", "fall", "fell",
  "send", "sent", "build", "built", "break", "broke", "spend", "spent", "cut", "rise",
  "rose", "drive", "drove", "buy", "bought", "wear", "wore", "choose", "chose", "sell",
  "sold", "eat", "ate", "say", "said", "want", "use", "work", "call", "try", "ask",
  "need", "seem", "help", "talk", "turn", "start", "play", "move", "like", "live",
  "believe", "happen", "look", "walk", "walks", "sleep", "sleeps", "jumps", "jump",
]);
const ADJ = new Set([
  "good", "new", "first", "last", "long", "great", "little", "old", "big", "high",
  "small", "large", "next", "young", "important", "public", "bad", "same", "able",
  "happy", "sad", "blue", "red", "green", "black", "white", "quick", "brown", "lazy",
  "bright", "dark", "warm", "cold", "fast", "slow", "strong", "weak", "full", "empty",
  "easy", "hard", "soft", "loud", "quiet", "clean", "dirty", "rich", "poor",
]);

const PER = new Set(["john", "mary", "david", "sarah", "michael", "anna", "peter", "emma", "james", "alice"]);
const LOC = new Set(["london", "paris", "berlin", "tokyo", "madrid"]);
const ORG = new Set(["google", "nasa", "ibm"]);

function posOf(word: string): string {
  if (/^\d+$/.test(word)) return "NUM";
  if (word.length === 1 && !/[a-z0-9]/.test(word)) return "PUNCT";
  if (DET.has(word)) return "DET";
  if (PRON.has(word)) return "PRON";
  if (AUX.has(word)) return "AUX";
  if (ADP.has(word)) return "ADP";
  if (CCONJ.has(word)) return "CCONJ";
  if (SCONJ.has(word)) return "SCONJ";
  if (ADV.has(word)) return "ADV";
  if (VERB.has(word)) return "VERB";
  if (ADJ.has(word)) return "ADJ";
  if (word.endsWith("ly")) return "ADV";
  if (word.endsWith("ing") || word.endsWith("ed")) return "VERB";
  if (word.endsWith("ous") || word.endsWith("ful") || word.endsWith("ive") || word.endsWith("able")) return "ADJ";
  return "NOUN";
}

function entOf(word: string): string {
  if (PER.has(word)) return "PER";
  if (LOC.has(word)) return "LOC";
  if (ORG.has(word)) return "ORG";
  return UNTAGGED;
}

function depOf(pos: string[], k: number, rootIndex: number): string {
  const p = pos[k];
  if (k === rootIndex) return "ROOT";
  switch (p) {
    case "DET":
      return "det";
    case "ADJ":
      return "amod";
    case "ADP":
      return "case";
    case "ADV":
      return "advmod";
    case "PUNCT":
      return "punct";
    case "NUM":
      return "nummod";
    case "CCONJ":
      return "cc";
    case "SCONJ":
      return "mark";
    case "AUX":
      return "aux";
    case "VERB":
      return "xcomp";
    case "PRON":
    case "NOUN":
      return rootIndex >= 0 && k < rootIndex ? "nsubj" : "obj";
    default:
      return "dep";
  }
}

/** Tag one subword sentence for one annotation kind. */
export function tagSentence(surfaces: string[], kind: Kind): string[] {
  const spans = wordSpans(surfaces);
  const words = spans.map((s) => spanWord(surfaces, s));
  const pos = words.map(posOf);
  let wordTags: string[];
  if (kind === "POS") {
    wordTags = pos;
  } else if (kind === "ENT") {
    wordTags = words.map(entOf);
  } else {
    const rootIndex = pos.findIndex((p) => p === "VERB" || p === "AUX");
    wordTags = words.map((_, k) => depOf(pos, k, rootIndex));
  }
  const out = new Array<string>(surfaces.length);
  spans.forEach(([start, end], wi) => {
    for (let k = start; k < end; k++) out[k] = wordTags[wi];
  });
  return out;
}

export function annotate(corpus: string[][], kinds: Kind[]): Map<Kind, TagRows> {
  const out = new Map<Kind, TagRows>();
  for (const kind of kinds) {
    if (!KINDS.includes(kind)) throw new Error(`unknown annotation kind: ${kind}`);
    out.set(
      kind,
      corpus.map((sent) => tagSentence(sent, kind)),
    );
  }
  return out;
}
