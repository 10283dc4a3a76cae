// Deterministic stand-in for a pretrained contextual encoder.  Every weight
// is derived from a hash of the model id, so a given id always produces the
// same embeddings, with nothing to download and nothing trained here.  Each
// layer mixes a position with its immediate neighbours, so from layer 1 on
// a piece's vector depends on its context.

export const CONTEXT_LAYERS = 4;
export const DEFAULT_MODEL = "hashlm-16";

function fnv1a(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function drawVector(tag: string, n: number, scale: number): Float64Array {
  const rand = mulberry32(fnv1a(tag));
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) out[i] = (2 * rand() - 1) * scale;
  return out;
}

// The trailing integer of the id is the embedding width it emits.
export function modelDim(modelId: string): number {
  const m = /-(\d+)$/.exec(modelId);
  if (!m) {
    throw new Error(`model id "${modelId}" must end in "-<dim>", e.g. ${DEFAULT_MODEL}`);
  }
  const dim = parseInt(m[1], 10);
  if (dim < 1) throw new Error(`model id "${modelId}" has dim ${dim}`);
  return dim;
}

function pieceVector(modelId: string, piece: string, dim: number): Float64Array {
  // sqrt(3) scale puts uniform draws at unit variance
  return drawVector(`${modelId}|piece|${piece}`, dim, Math.sqrt(3));
}

export function encode(pieces: string[], modelId: string, layer: number): Float64Array[] {
  const dim = modelDim(modelId);
  if (!Number.isInteger(layer) || layer < 0 || layer > CONTEXT_LAYERS) {
    throw new Error(`layer must be an integer in 0..${CONTEXT_LAYERS}, got ${layer}`);
  }
  let h = pieces.map(p => pieceVector(modelId, p, dim));
  const scale = 1 / Math.sqrt(dim);
  for (let l = 0; l < layer; l++) {
    const wPrev = drawVector(`${modelId}|l${l}|prev`, dim * dim, scale);
    const wSelf = drawVector(`${modelId}|l${l}|self`, dim * dim, scale);
    const wNext = drawVector(`${modelId}|l${l}|next`, dim * dim, scale);
    const bias = drawVector(`${modelId}|l${l}|bias`, dim, 0.1);
    const zero = new Float64Array(dim);
    const next: Float64Array[] = [];
    for (let i = 0; i < h.length; i++) {
      const prev = i > 0 ? h[i - 1] : zero;
      const self = h[i];
      const nxt = i + 1 < h.length ? h[i + 1] : zero;
      const v = new Float64Array(dim);
      for (let r = 0; r < dim; r++) {
        let acc = bias[r];
        const row = r * dim;
        for (let c = 0; c < dim; c++) {
          acc += wPrev[row + c] * prev[c] + wSelf[row + c] * self[c] + wNext[row + c] * nxt[c];
        }
        v[r] = Math.tanh(acc);
      }
      next.push(v);
    }
    h = next;
  }
  return h;
}
