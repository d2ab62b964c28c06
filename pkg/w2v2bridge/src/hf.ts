/**
 * Checkpoint-backed backend via transformers.js (optional dependency).
 *
 * Checkpoint identifiers are read from a models config (models.json next to
 * the package root by default) and never vendored; the first run downloads
 * the ONNX export of the referenced model into the transformers.js cache.
 *
 * Layer addressing: "E" is the convolutional encoder output
 * (extract_features), "Q" the quantizer codevectors, "Tnn" hidden state nn
 * of the Transformer stack (hidden_states[nn], where index 0 is the
 * pre-Transformer projection).
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { LayerOutput, ModelBackend } from "./backend.js";
import type { LayerSpec, ModelKey } from "./layerspec.js";

export interface ModelsConfig {
  [model: string]: { checkpoint: string };
}

export function defaultModelsConfigPath(): string {
  return join(dirname(fileURLToPath(import.meta.url)), "..", "models.json");
}

export function loadModelsConfig(path?: string): ModelsConfig {
  return JSON.parse(readFileSync(path ?? defaultModelsConfigPath(), "utf-8"));
}

interface LoadedModel {
  model: any;
}

export class TransformersBackend implements ModelBackend {
  readonly name = "transformers";

  private cache = new Map<ModelKey, Promise<LoadedModel>>();

  constructor(private config: ModelsConfig) {}

  private load(key: ModelKey): Promise<LoadedModel> {
    let loaded = this.cache.get(key);
    if (!loaded) {
      loaded = (async () => {
        const entry = this.config[key];
        if (!entry?.checkpoint) {
          throw new Error(`models config has no checkpoint for ${key}`);
        }
        let transformers: any;
        try {
          transformers = await import("@huggingface/transformers");
        } catch {
          throw new Error(
            "the transformers backend needs the optional dependency " +
              "@huggingface/transformers (npm install @huggingface/transformers); " +
              "for hermetic runs use --backend stub",
          );
        }
        const model = await transformers.AutoModel.from_pretrained(entry.checkpoint, {
          output_hidden_states: true,
        });
        return { model };
      })();
      this.cache.set(key, loaded);
    }
    return loaded;
  }

  async extract(samples: Float32Array, spec: LayerSpec): Promise<LayerOutput> {
    const { model } = await this.load(spec.model);
    const transformers: any = await import("@huggingface/transformers");
    const inputs = new transformers.Tensor("float32", samples, [1, samples.length]);
    const outputs = await model({ input_values: inputs, output_hidden_states: true });

    let tensor: any;
    if (spec.layer === "E") {
      tensor = outputs.extract_features;
    } else if (spec.layer === "Q") {
      tensor = outputs.projected_quantized_states ?? outputs.codevectors;
    } else {
      const index = Number(spec.layer.slice(1));
      tensor = outputs.hidden_states?.[index];
    }
    if (!tensor) {
      throw new Error(
        `checkpoint output for layer ${spec.layer} not exposed by this export; ` +
          "re-export the model with hidden states enabled",
      );
    }
    const [, numFrames, numDims] = tensor.dims;
    return {
      data: Float32Array.from(tensor.data as Iterable<number>),
      numFrames,
      numDims,
    };
  }
}
