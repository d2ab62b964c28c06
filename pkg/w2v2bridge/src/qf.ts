/**
 * Writer (and reader, used by tests) for the ".qf" feature file format
 * consumed by the search pipeline: a 32-byte little-endian header --
 * magic "QFEA", u16 version 1, u16 reserved, u32 num_frames, u32 num_dims,
 * f32 frame_shift_ms, f32 frame_length_ms, 8 reserved bytes -- followed by
 * num_frames * num_dims float32 values, row-major.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const QF_MAGIC = "QFEA";
export const QF_VERSION = 1;
export const QF_HEADER_SIZE = 32;

export interface FeatureMatrix {
  data: Float32Array; // row-major, numFrames * numDims
  numFrames: number;
  numDims: number;
  frameShiftMs: number;
  frameLengthMs: number;
}

export function encodeFeatureFile(matrix: FeatureMatrix): Buffer {
  const { data, numFrames, numDims, frameShiftMs, frameLengthMs } = matrix;
  if (numFrames < 1 || numDims < 1) {
    throw new Error(`feature matrix must be at least 1x1, got ${numFrames}x${numDims}`);
  }
  if (data.length !== numFrames * numDims) {
    throw new Error(
      `payload has ${data.length} values, expected ${numFrames * numDims}`,
    );
  }
  for (const value of data) {
    if (!Number.isFinite(value)) {
      throw new Error("feature matrix contains non-finite values");
    }
  }
  const buffer = Buffer.alloc(QF_HEADER_SIZE + data.length * 4);
  buffer.write(QF_MAGIC, 0, "ascii");
  buffer.writeUInt16LE(QF_VERSION, 4);
  buffer.writeUInt16LE(0, 6);
  buffer.writeUInt32LE(numFrames, 8);
  buffer.writeUInt32LE(numDims, 12);
  buffer.writeFloatLE(frameShiftMs, 16);
  buffer.writeFloatLE(frameLengthMs, 20);
  // bytes 24..31 stay zero (reserved)
  for (let i = 0; i < data.length; i++) {
    buffer.writeFloatLE(data[i], QF_HEADER_SIZE + i * 4);
  }
  return buffer;
}

export function writeFeatureFile(matrix: FeatureMatrix, path: string): void {
  writeFileSync(path, encodeFeatureFile(matrix));
}

export function readFeatureFile(path: string): FeatureMatrix {
  const raw = readFileSync(path);
  if (raw.length < QF_HEADER_SIZE) {
    throw new Error(`${path}: too short for a feature file header`);
  }
  if (raw.toString("ascii", 0, 4) !== QF_MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = raw.readUInt16LE(4);
  if (version !== QF_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const numFrames = raw.readUInt32LE(8);
  const numDims = raw.readUInt32LE(12);
  const frameShiftMs = raw.readFloatLE(16);
  const frameLengthMs = raw.readFloatLE(20);
  const expected = numFrames * numDims * 4;
  if (raw.length - QF_HEADER_SIZE !== expected) {
    throw new Error(
      `${path}: header claims ${numFrames}x${numDims}, payload is ` +
        `${raw.length - QF_HEADER_SIZE} bytes (expected ${expected})`,
    );
  }
  const data = new Float32Array(numFrames * numDims);
  for (let i = 0; i < data.length; i++) {
    data[i] = raw.readFloatLE(QF_HEADER_SIZE + i * 4);
  }
  return { data, numFrames, numDims, frameShiftMs, frameLengthMs };
}
