import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function tempDir(prefix = "w2v2bridge-"): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function makeWavBuffer(
  samples: Int16Array,
  sampleRate = 16000,
  channels = 1,
  bits = 16,
  audioFormat = 1,
): Buffer {
  const payload = Buffer.alloc(samples.length * 2);
  for (let i = 0; i < samples.length; i++) {
    payload.writeInt16LE(samples[i], i * 2);
  }
  const fmt = Buffer.alloc(16);
  fmt.writeUInt16LE(audioFormat, 0);
  fmt.writeUInt16LE(channels, 2);
  fmt.writeUInt32LE(sampleRate, 4);
  fmt.writeUInt32LE((sampleRate * channels * bits) / 8, 8);
  fmt.writeUInt16LE((channels * bits) / 8, 12);
  fmt.writeUInt16LE(bits, 14);

  const chunks = Buffer.concat([
    Buffer.from("WAVE", "ascii"),
    Buffer.from("fmt ", "ascii"),
    uint32(fmt.length),
    fmt,
    Buffer.from("data", "ascii"),
    uint32(payload.length),
    payload,
  ]);
  return Buffer.concat([Buffer.from("RIFF", "ascii"), uint32(chunks.length), chunks]);
}

function uint32(value: number): Buffer {
  const buffer = Buffer.alloc(4);
  buffer.writeUInt32LE(value, 0);
  return buffer;
}

export function toneSamples(seconds: number, freqHz: number, sampleRate = 16000): Int16Array {
  const count = Math.round(seconds * sampleRate);
  const samples = new Int16Array(count);
  for (let i = 0; i < count; i++) {
    samples[i] = Math.round(12000 * Math.sin((2 * Math.PI * freqHz * i) / sampleRate));
  }
  return samples;
}

export function writeWavFile(
  path: string,
  samples: Int16Array,
  sampleRate = 16000,
): string {
  writeFileSync(path, makeWavBuffer(samples, sampleRate));
  return path;
}
