/**
 * Deterministic stand-in backend with the real model's frame geometry and
 * layer dimensionalities. Features are smooth functions of per-frame signal
 * statistics under a per-(model, layer) random projection, so different
 * audio yields different features, identical audio identical ones.
 *
 * Exists so the pipeline integration (shapes, file formats, manifests) can
 * be exercised hermetically; it does not approximate checkpoint outputs.
 */

import type { LayerOutput, ModelBackend } from "./backend.js";
import {
  FRAME_RECEPTIVE_SAMPLES,
  FRAME_STRIDE_SAMPLES,
  frameCount,
  layerDims,
  specTag,
  type LayerSpec,
} from "./layerspec.js";

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let mixed = Math.imul(state ^ (state >>> 15), 1 | state);
    mixed = (mixed + Math.imul(mixed ^ (mixed >>> 7), 61 | mixed)) ^ mixed;
    return ((mixed ^ (mixed >>> 14)) >>> 0) / 4294967296;
  };
}

const STAT_COUNT = 4; // mean, rms, min, max per frame window

export class StubBackend implements ModelBackend {
  readonly name = "stub";

  private projections = new Map<string, Float32Array>();

  private projection(spec: LayerSpec, dims: number): Float32Array {
    const key = specTag(spec);
    let weights = this.projections.get(key);
    if (!weights) {
      const next = mulberry32(fnv1a(key));
      weights = new Float32Array(dims * (STAT_COUNT + 1));
      for (let i = 0; i < weights.length; i++) {
        weights[i] = (next() - 0.5) * 4.0;
      }
      this.projections.set(key, weights);
    }
    return weights;
  }

  async extract(samples: Float32Array, spec: LayerSpec): Promise<LayerOutput> {
    const numFrames = frameCount(samples.length);
    if (numFrames < 1) {
      throw new Error(
        `audio too short: ${samples.length} samples < one ` +
          `${FRAME_RECEPTIVE_SAMPLES}-sample receptive field`,
      );
    }
    const numDims = layerDims(spec.layer);
    const weights = this.projection(spec, numDims);
    const data = new Float32Array(numFrames * numDims);

    for (let f = 0; f < numFrames; f++) {
      const begin = f * FRAME_STRIDE_SAMPLES;
      const end = begin + FRAME_RECEPTIVE_SAMPLES;
      let sum = 0;
      let sumSq = 0;
      let min = Infinity;
      let max = -Infinity;
      for (let i = begin; i < end; i++) {
        const v = samples[i];
        sum += v;
        sumSq += v * v;
        if (v < min) min = v;
        if (v > max) max = v;
      }
      const n = FRAME_RECEPTIVE_SAMPLES;
      const stats = [sum / n, Math.sqrt(sumSq / n), min, max];
      for (let d = 0; d < numDims; d++) {
        const w = d * (STAT_COUNT + 1);
        let acc = weights[w + STAT_COUNT]; // phase term
        for (let s = 0; s < STAT_COUNT; s++) {
          acc += weights[w + s] * stats[s];
        }
        data[f * numDims + d] = Math.fround(Math.sin(acc) + 0.1 * acc);
      }
    }
    return { data, numFrames, numDims };
  }
}
