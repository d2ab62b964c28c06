/** Single-file and batch extraction: WAV in, ".qf" + manifest out. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import type { ModelBackend } from "./backend.js";
import {
  FRAME_LENGTH_MS,
  FRAME_SHIFT_MS,
  REQUIRED_SAMPLE_RATE,
  specTag,
  type LayerSpec,
} from "./layerspec.js";
import { loadManifest, writeManifest, type ManifestEntry } from "./manifest.js";
import { writeFeatureFile, type FeatureMatrix } from "./qf.js";
import { readWav } from "./wav.js";

export async function extractFeatures(
  wavPath: string,
  spec: LayerSpec,
  backend: ModelBackend,
): Promise<FeatureMatrix> {
  const audio = readWav(wavPath);
  if (audio.sampleRateHz !== REQUIRED_SAMPLE_RATE) {
    throw new Error(
      `${wavPath}: sample rate ${audio.sampleRateHz}, the model requires ` +
        `${REQUIRED_SAMPLE_RATE} Hz mono 16-bit PCM`,
    );
  }
  const output = await backend.extract(audio.samples, spec);
  return {
    data: output.data,
    numFrames: output.numFrames,
    numDims: output.numDims,
    frameShiftMs: FRAME_SHIFT_MS,
    frameLengthMs: FRAME_LENGTH_MS,
  };
}

export interface BatchResult {
  emitted: ManifestEntry[];
  failures: { id: string; error: string }[];
  manifestPath: string;
}

export async function extractBatch(
  manifestPath: string,
  spec: LayerSpec,
  outDir: string,
  backend: ModelBackend,
): Promise<BatchResult> {
  const rows = loadManifest(manifestPath);
  const tag = specTag(spec);
  const targetDir = join(outDir, tag);
  mkdirSync(targetDir, { recursive: true });

  const emitted: ManifestEntry[] = [];
  const failures: { id: string; error: string }[] = [];
  for (const row of rows) {
    try {
      const matrix = await extractFeatures(row.path, spec, backend);
      const target = join(targetDir, `${row.id}.qf`);
      writeFeatureFile(matrix, target);
      emitted.push({ id: row.id, path: target, transcription: row.transcription });
    } catch (error) {
      failures.push({ id: row.id, error: String(error) });
    }
  }

  const outManifest = join(targetDir, "manifest.tsv");
  writeManifest(emitted, outManifest);
  const metadata = {
    model: spec.model,
    layer: spec.layer,
    extractor_tag: tag,
    backend: backend.name,
    frame_shift_ms: FRAME_SHIFT_MS,
    frame_length_ms: FRAME_LENGTH_MS,
    quantizer_tensor:
      spec.layer === "Q"
        ? "projected quantized states (post-projection codevectors)"
        : undefined,
    num_files: emitted.length,
    num_failures: failures.length,
  };
  writeFileSync(
    join(targetDir, "extraction.json"),
    JSON.stringify(metadata, null, 2) + "\n",
  );
  return { emitted, failures, manifestPath: outManifest };
}
