/**
 * Layer addressing for wav2vec 2.0 large models: the convolutional encoder
 * output (E), the quantizer output (Q), and the 24 Transformer layers
 * (T01..T24), for either the English (ls960) or multilingual (xlsr53)
 * checkpoint.
 */

export type ModelKey = "ls960" | "xlsr53";

export const MODELS: ModelKey[] = ["ls960", "xlsr53"];

export const TRANSFORMER_LAYERS = 24;

/** Output dimensionality per layer kind (large architecture). */
export const ENCODER_DIM = 512;
export const QUANTIZER_DIM = 768;
export const TRANSFORMER_DIM = 1024;

/** Frame geometry of the convolutional feature encoder at 16 kHz. */
export const FRAME_SHIFT_MS = 20.0;
export const FRAME_LENGTH_MS = 25.0;
export const FRAME_STRIDE_SAMPLES = 320;
export const FRAME_RECEPTIVE_SAMPLES = 400;
export const REQUIRED_SAMPLE_RATE = 16000;

export interface LayerSpec {
  model: ModelKey;
  /** "E", "Q", or "T01".."T24" */
  layer: string;
}

export function parseLayer(raw: string): string {
  const upper = raw.toUpperCase();
  if (upper === "E" || upper === "Q") return upper;
  const match = /^T(\d{1,2})$/.exec(upper);
  if (match) {
    const index = Number(match[1]);
    if (index >= 1 && index <= TRANSFORMER_LAYERS) {
      return `T${String(index).padStart(2, "0")}`;
    }
  }
  throw new Error(
    `unknown layer ${JSON.stringify(raw)}; expected E, Q, or T01..T${TRANSFORMER_LAYERS}`,
  );
}

export function parseModel(raw: string): ModelKey {
  const lower = raw.toLowerCase();
  if (lower === "ls960" || lower === "xlsr53") return lower;
  throw new Error(`unknown model ${JSON.stringify(raw)}; expected ls960 or xlsr53`);
}

/** Rendered tag, e.g. "ls960-t11" or "xlsr53-q". */
export function specTag(spec: LayerSpec): string {
  return `${spec.model}-${spec.layer.toLowerCase()}`;
}

export function layerDims(layer: string): number {
  if (layer === "E") return ENCODER_DIM;
  if (layer === "Q") return QUANTIZER_DIM;
  return TRANSFORMER_DIM;
}

/** All 26 layer specs for one model: E, Q, T01..T24. */
export function allLayerSpecs(model: ModelKey): LayerSpec[] {
  const specs: LayerSpec[] = [
    { model, layer: "E" },
    { model, layer: "Q" },
  ];
  for (let index = 1; index <= TRANSFORMER_LAYERS; index++) {
    specs.push({ model, layer: `T${String(index).padStart(2, "0")}` });
  }
  return specs;
}

/** Frames produced by the conv encoder for a sample count at 16 kHz. */
export function frameCount(numSamples: number): number {
  if (numSamples < FRAME_RECEPTIVE_SAMPLES) return 0;
  return (
    Math.floor((numSamples - FRAME_RECEPTIVE_SAMPLES) / FRAME_STRIDE_SAMPLES) + 1
  );
}
