/** Manifest TSV (header `id<TAB>path<TAB>transcription`) shared with the
 * search pipeline; paths are stored relative to the TSV's directory. */

import { readFileSync, writeFileSync } from "node:fs";
import { dirname, isAbsolute, join, relative } from "node:path";

export interface ManifestEntry {
  id: string;
  path: string; // absolute after loading
  transcription: string;
}

export const MANIFEST_HEADER = "id\tpath\ttranscription";

export function loadManifest(path: string): ManifestEntry[] {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n");
  if (lines.length === 0 || lines[0].trim() !== MANIFEST_HEADER) {
    throw new Error(`${path}: bad manifest header`);
  }
  const base = dirname(path);
  const rows: ManifestEntry[] = [];
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const cols = line.split("\t");
    if (cols.length !== 3) {
      throw new Error(`${path}:${i + 1}: expected 3 tab-separated columns`);
    }
    const [id, rel, transcription] = cols;
    rows.push({
      id,
      path: isAbsolute(rel) ? rel : join(base, rel),
      transcription,
    });
  }
  return rows;
}

export function writeManifest(rows: ManifestEntry[], path: string): void {
  const base = dirname(path);
  const lines = [MANIFEST_HEADER];
  for (const row of rows) {
    const rel = relative(base, row.path) || row.path;
    lines.push(`${row.id}\t${rel.startsWith("..") ? row.path : rel}\t${row.transcription}`);
  }
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}
