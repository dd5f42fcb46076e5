/** Greedy longest-match subword tokenizer with `##` continuations.
 *
 * Lowercases, splits punctuation into separate tokens, then decomposes each
 * word against a fixed wordpiece vocabulary. Single characters are always in
 * the vocabulary, so every word tokenizes. The model's embedding table is
 * indexed by this same vocabulary.
 */

export const CLS = "[CLS]";
export const SEP = "[SEP]";

const WHOLE_WORDS = `
the a an and or but if because as of at by for with about against between into
through during before after above below to from up down in out on off over
under again then once here there when where why how all any both each few more
most other some such no nor not only own same so than too very can will just
should now i me my we our you your he him his she her it its they them their
this that these those am is are was were be been being have has had having do
does did doing
time year day man woman child world life hand part eye place work week case
point company number group problem fact money water story month lot right
study book word business issue side kind head house service friend father
power hour game line end member law car city community name president team
minute idea body information back parent face others level office door health
person art war history party result change morning reason research girl boy
guy moment air teacher force education cat dog bird fish horse tree river
mountain road computer system program question government night home room
mother school state family student country president
go goes went gone make made take took taken come came see saw seen know knew
known get got given find found think thought tell told become became show
showed leave left feel felt put bring brought begin began keep kept hold held
write wrote stand stood hear heard let mean meant set meet met run ran pay
paid sit sat speak spoke lie lay lead led read grow grew lose lost fall fell
send sent build built understand understood draw drew break broke spend spent
cut rise rose drive drove buy bought wear wore choose chose sell sold eat ate
say said want wanted use used work worked call called try tried ask asked need
needed seem seemed help helped talk talked turn turned start started play
played move moved like liked live lived believe believed happen happened
look looked walk walked walks sleeps sleep
good new first last long great little old big high small large next early
young important public bad same able happy sad blue red green black white
quick brown lazy bright dark warm cold fast slow strong weak full empty easy
hard soft loud quiet clean dirty rich poor
quickly slowly loudly quietly easily early late often never always sometimes
usually really almost together alone
john mary david sarah michael anna peter emma james alice london paris berlin
tokyo madrid google nasa ibm
agreed apples arms arrived asked barn bed bird blue boat bought box boxes
bread bridge brother brought built cake castle chair cleaned clock color cook
cooked corn counted crossed dance date daughter dawn dinner doctor dog dress
drew driver drove end evening every eyes factory fans farm farmer fell field
fields finished fisher fixed flew flowers followed food forest found fox
fresh friends garden gate girl glass great green guard guests hall harbor hat
heavy helped hills hired hour hunter interest island keys king kitchen lake
land letter letters light listened loaded locked long looked lost loved made
man manager many market marks men midnight minute money moon morning mountain
moved music net news night noon north nurse office old opened over painted
paper papers park party passed passes people photos piano picked picture plan
planted plates played police post praised pulled put quiet rain ran reached
readers river roof room rose ruled runs safe sailed sang sat sea sent served
set sewed shelf ship shop showed sister sisters small sold son song soup
spoke spring station stayed stopped story streets strong students summer sun
table talked taught teacher team ten test thanked threw told took tool tower
three town towns train tree truck valley visitors wait waited waiter walked wall
warm watched water watered week went white wife wind window winter wisdom
woman won wore worked workers writer wrote yard years
`
  .trim()
  .split(/\s+/);

const SUFFIX_PIECES = [
  "##s", "##es", "##ed", "##ing", "##ly", "##er", "##est", "##tion", "##ment",
  "##ness", "##ful", "##less", "##able", "##ous", "##ive", "##al", "##ic",
  "##y", "##en", "##ation", "##ist", "##ism", "##ity", "##ers", "##ings",
];

const CHARS = "abcdefghijklmnopqrstuvwxyz0123456789.,;:!?'\"()-$@#%&/+*=";

export function buildVocabulary(): string[] {
  const vocab: string[] = [CLS, SEP];
  const seen = new Set(vocab);
  const push = (piece: string) => {
    if (!seen.has(piece)) {
      seen.add(piece);
      vocab.push(piece);
    }
  };
  for (const c of CHARS) {
    push(c);
    push("##" + c);
  }
  for (const p of SUFFIX_PIECES) push(p);
  for (const w of WHOLE_WORDS) push(w);
  return vocab;
}

export class Tokenizer {
  readonly vocab: string[];
  private index: Map<string, number>;

  constructor() {
    this.vocab = buildVocabulary();
    this.index = new Map(this.vocab.map((p, i) => [p, i]));
  }

  pieceId(piece: string): number {
    const id = this.index.get(piece);
    if (id === undefined) throw new Error(`piece not in vocabulary: ${piece}`);
    return id;
  }

  /** Split raw text into word-level units (punctuation separated). */
  words(text: string): string[] {
    const out: string[] = [];
    for (const chunk of text.toLowerCase().split(/\s+/)) {
      if (!chunk) continue;
      let current = "";
      for (const ch of chunk) {
        if (CHARS.includes(ch) && !/[a-z0-9]/.test(ch)) {
          if (current) out.push(current);
          out.push(ch);
          current = "";
        } else if (/[a-z0-9]/.test(ch)) {
          current += ch;
        }
        // anything else (unknown unicode) is dropped
      }
      if (current) out.push(current);
    }
    return out;
  }

  /** Greedy longest-match decomposition into vocabulary pieces. */
  wordToPieces(word: string): string[] {
    if (this.index.has(word)) return [word];
    const pieces: string[] = [];
    let start = 0;
    while (start < word.length) {
      let end = word.length;
      let found = "";
      while (end > start) {
        const sub = word.slice(start, end);
        const candidate = start === 0 ? sub : "##" + sub;
        if (this.index.has(candidate)) {
          found = candidate;
          break;
        }
        end--;
      }
      if (!found) throw new Error(`cannot tokenize ${JSON.stringify(word)}`);
      pieces.push(found);
      start = end;
    }
    return pieces;
  }

  /** Tokenize a sentence into subword surfaces. */
  tokenize(text: string): string[] {
    return this.words(text).flatMap((w) => this.wordToPieces(w));
  }
}

/** Merge subword pieces back into word spans: [start, end) piece ranges. */
export function wordSpans(surfaces: string[]): Array<[number, number]> {
  const spans: Array<[number, number]> = [];
  let i = 0;
  while (i < surfaces.length) {
    let j = i + 1;
    while (j < surfaces.length && surfaces[j].startsWith("##")) j++;
    spans.push([i, j]);
    i = j;
  }
  return spans;
}

/** The word a span spells, continuations unprefixed. */
export function spanWord(surfaces: string[], span: [number, number]): string {
  let out = surfaces[span[0]];
  for (let k = span[0] + 1; k < span[1]; k++) out += surfaces[k].slice(2);
  return out;
}
