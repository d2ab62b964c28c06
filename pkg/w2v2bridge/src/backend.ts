/**
 * Model backend contract: given 16 kHz audio, produce the per-frame
 * representation of one addressed layer. Implementations must be
 * deterministic (inference only, no dropout).
 */

import type { LayerSpec } from "./layerspec.js";

export interface LayerOutput {
  /** row-major frames x dims */
  data: Float32Array;
  numFrames: number;
  numDims: number;
}

export interface ModelBackend {
  readonly name: string;
  extract(samples: Float32Array, spec: LayerSpec): Promise<LayerOutput>;
}
