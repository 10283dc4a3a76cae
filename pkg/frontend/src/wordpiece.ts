// Greedy longest-match-first word-piece tokenizer over a fixed vocabulary.
// Continuation pieces carry the usual "##" prefix.  Single letters are in
// the vocabulary, so any purely alphabetic word segments; a word that still
// cannot be segmented (apostrophes, symbols) becomes one [UNK].

export const UNK = "[UNK]";

const LETTERS = "abcdefghijklmnopqrstuvwxyz".split("");

// Stems and suffixes sized so that longer corpus words split into two
// pieces while the short ones stay whole.
const STEMS = [
  "da", "tho", "ru", "mib", "zan", "lu", "bra", "sil",
  "tor", "pex", "ga", "plim", "vo", "dren", "nul", "bem",
];
const SUFFIXES = ["do", "mo", "fa", "ru", "sk"];
const PUNCT = [".", "?", "!", ","];

export function vocabulary(): string[] {
  const vocab: string[] = [UNK, ...PUNCT];
  const seen = new Set(vocab);
  const add = (piece: string) => {
    if (!seen.has(piece)) {
      seen.add(piece);
      vocab.push(piece);
    }
  };
  for (const s of STEMS) add(s);
  for (const l of LETTERS) add(l);
  for (const s of SUFFIXES) add("##" + s);
  for (const l of LETTERS) add("##" + l);
  return vocab;
}

const VOCAB = new Set(vocabulary());

function splitWord(word: string): string[] | null {
  const pieces: string[] = [];
  let pos = 0;
  while (pos < word.length) {
    let end = word.length;
    let found: string | null = null;
    while (end > pos) {
      const cand = (pos > 0 ? "##" : "") + word.slice(pos, end);
      if (VOCAB.has(cand)) {
        found = cand;
        break;
      }
      end--;
    }
    if (found === null) return null; // whole word falls back to [UNK]
    pieces.push(found);
    pos = end;
  }
  return pieces;
}

export function tokenize(text: string): string[] {
  const out: string[] = [];
  for (const m of text.toLowerCase().matchAll(/[a-z']+|[^\sa-z']/g)) {
    const token = m[0];
    if (/^[a-z']+$/.test(token)) {
      out.push(...(splitWord(token) ?? [UNK]));
    } else {
      out.push(VOCAB.has(token) ? token : UNK);
    }
  }
  return out;
}

// FNV-1a over the vocabulary, enough to notice a change in the manifest
export function vocabHash(): string {
  let h = 0x811c9dc5;
  for (const ch of vocabulary().join("\n")) {
    h ^= ch.charCodeAt(0);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}
