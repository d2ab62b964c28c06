#!/usr/bin/env node
/**
 * extract-w2v2 --model {ls960|xlsr53} --layer {E|Q|T01..T24|all}
 *              --manifest IN.tsv --out DIR [--backend stub|transformers]
 *
 * Writes one ".qf" per input WAV plus a manifest TSV per layer tag under
 * DIR/<tag>/, consumable by the search pipeline. Exit status is nonzero if
 * any file failed.
 */

import process from "node:process";

import type { ModelBackend } from "./backend.js";
import { extractBatch } from "./extract.js";
import { allLayerSpecs, parseLayer, parseModel, type LayerSpec } from "./layerspec.js";
import { StubBackend } from "./stub.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`bad argument near ${JSON.stringify(key)}`);
    }
    args.set(key.slice(2), value);
  }
  return args;
}

async function makeBackend(name: string): Promise<ModelBackend> {
  if (name === "stub") return new StubBackend();
  if (name === "transformers") {
    const { TransformersBackend, loadModelsConfig } = await import("./hf.js");
    return new TransformersBackend(loadModelsConfig());
  }
  throw new Error(`unknown backend ${JSON.stringify(name)}`);
}

export async function main(argv: string[]): Promise<number> {
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (error) {
    console.error(String(error));
    return 2;
  }
  for (const required of ["model", "layer", "manifest", "out"]) {
    if (!args.has(required)) {
      console.error(`missing --${required}`);
      console.error(
        "usage: extract-w2v2 --model {ls960|xlsr53} --layer {E|Q|T01..T24|all} " +
          "--manifest IN.tsv --out DIR [--backend stub|transformers]",
      );
      return 2;
    }
  }

  try {
    const model = parseModel(args.get("model")!);
    const layerArg = args.get("layer")!;
    const specs: LayerSpec[] =
      layerArg.toLowerCase() === "all"
        ? allLayerSpecs(model)
        : [{ model, layer: parseLayer(layerArg) }];
    const backend = await makeBackend(args.get("backend") ?? "transformers");

    let failures = 0;
    for (const spec of specs) {
      const result = await extractBatch(
        args.get("manifest")!,
        spec,
        args.get("out")!,
        backend,
      );
      for (const failure of result.failures) {
        console.error(`error: ${spec.model}-${spec.layer}: ${failure.id}: ${failure.error}`);
      }
      failures += result.failures.length;
      console.error(
        `${spec.model}-${spec.layer}: ${result.emitted.length} files -> ${result.manifestPath}`,
      );
    }
    return failures > 0 ? 1 : 0;
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : String(error)}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
