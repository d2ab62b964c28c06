/** Minimal RIFF/WAVE reader: mono 16-bit PCM only, normalized to [-1, 1). */

import { readFileSync } from "node:fs";

export interface AudioBuffer {
  samples: Float32Array;
  sampleRateHz: number;
}

export function readWav(path: string): AudioBuffer {
  const raw = readFileSync(path);
  if (
    raw.length < 12 ||
    raw.toString("ascii", 0, 4) !== "RIFF" ||
    raw.toString("ascii", 8, 12) !== "WAVE"
  ) {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }

  let fmt: { format: number; channels: number; sampleRate: number; bits: number } | null =
    null;
  let data: Buffer | null = null;
  let pos = 12;
  while (pos + 8 <= raw.length) {
    const chunkId = raw.toString("ascii", pos, pos + 4);
    const chunkSize = raw.readUInt32LE(pos + 4);
    const bodyStart = pos + 8;
    if (bodyStart + chunkSize > raw.length) {
      throw new Error(`${path}: chunk ${chunkId} claims ${chunkSize} bytes past EOF`);
    }
    if (chunkId === "fmt ") {
      fmt = {
        format: raw.readUInt16LE(bodyStart),
        channels: raw.readUInt16LE(bodyStart + 2),
        sampleRate: raw.readUInt32LE(bodyStart + 4),
        bits: raw.readUInt16LE(bodyStart + 14),
      };
    } else if (chunkId === "data") {
      data = raw.subarray(bodyStart, bodyStart + chunkSize);
    }
    pos = bodyStart + chunkSize + (chunkSize % 2);
  }

  if (!fmt) throw new Error(`${path}: missing fmt chunk`);
  if (!data) throw new Error(`${path}: missing data chunk`);
  if (fmt.format !== 1) {
    throw new Error(`${path}: audio format code ${fmt.format} (only PCM is supported)`);
  }
  if (fmt.channels !== 1) {
    throw new Error(`${path}: ${fmt.channels} channels (only mono is supported)`);
  }
  if (fmt.bits !== 16) {
    throw new Error(`${path}: ${fmt.bits}-bit samples (only 16-bit is supported)`);
  }

  const count = Math.floor(data.length / 2);
  const samples = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    samples[i] = data.readInt16LE(i * 2) / 32768;
  }
  return { samples, sampleRateHz: fmt.sampleRate };
}
