/** Readers for the manifest and CSV tables written by a naimstab run. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import Papa from "papaparse";

import {
  Manifest,
  ManifestArtifact,
  ResidualTable,
  SchemaError,
  StateTable,
  SweepRow,
} from "./types.js";

function parseNumeric(path: string): { header: string[]; rows: number[][] } {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const lines = parsed.data;
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  const header = lines[0];
  const rows = lines.slice(1).map((cells, i) => {
    if (cells.length !== header.length) {
      throw new SchemaError(`${path}: row ${i + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    return cells.map((cell, j) => {
      const x = Number(cell);
      if (!Number.isFinite(x)) {
        throw new SchemaError(`${path}: row ${i + 1}, column ${header[j]}: not a finite number`);
      }
      return x;
    });
  });
  return { header, rows };
}

function expectHeader(path: string, got: string[], want: string[]): void {
  if (got.join(",") !== want.join(",")) {
    throw new SchemaError(`${path}: header is "${got.join(",")}", expected "${want.join(",")}"`);
  }
}

function stateHeader(n: number): string[] {
  const names = ["t"];
  for (let i = 1; i <= n; i++) names.push(`q${i}`);
  for (let i = 1; i <= n; i++) names.push(`v${i}`);
  return names;
}

/** Read a t,q1..qN,v1..vN trajectory table; N is inferred from the width. */
export function readStateTable(path: string): StateTable {
  const { header, rows } = parseNumeric(path);
  const n = (header.length - 1) / 2;
  if (!Number.isInteger(n) || (n !== 3 && n !== 9)) {
    throw new SchemaError(`${path}: width ${header.length} matches no trajectory layout`);
  }
  expectHeader(path, header, stateHeader(n));
  if (rows.length === 0) {
    throw new SchemaError(`${path}: empty trajectory table`);
  }
  return {
    times: rows.map((r) => r[0]),
    qs: rows.map((r) => r.slice(1, 1 + n)),
    vs: rows.map((r) => r.slice(1 + n)),
    stateDim: n,
  };
}

/** Read a t,res_norm_sq residual table. */
export function readResidualTable(path: string): ResidualTable {
  const { header, rows } = parseNumeric(path);
  expectHeader(path, header, ["t", "res_norm_sq"]);
  if (rows.length === 0) {
    throw new SchemaError(`${path}: empty residual table`);
  }
  return { times: rows.map((r) => r[0]), values: rows.map((r) => r[1]) };
}

/** Read the gain-sweep summary table. */
export function readSweepTable(path: string): SweepRow[] {
  const { header, rows } = parseNumeric(path);
  expectHeader(path, header, ["epsilon", "fitted_rate_norm", "fitted_rate_norm_sq", "sandwich_ok"]);
  return rows.map((r) => ({
    epsilon: r[0],
    fittedRateNorm: r[1],
    fittedRateNormSq: r[2],
    sandwichOk: r[3] !== 0,
  }));
}

/** Read and structurally validate a run manifest. */
export function readManifest(path: string): Manifest {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new SchemaError(`cannot read manifest ${path}: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new SchemaError(`${path}: manifest is not an object`);
  }
  const m = doc as Record<string, unknown>;
  for (const key of ["scenario", "command", "artifacts"]) {
    if (!(key in m)) throw new SchemaError(`${path}: manifest is missing "${key}"`);
  }
  if (!Array.isArray(m.artifacts)) {
    throw new SchemaError(`${path}: manifest artifacts is not a list`);
  }
  const artifacts = (m.artifacts as Record<string, unknown>[]).map((a, i) => {
    if (typeof a.path !== "string" || typeof a.sha256 !== "string") {
      throw new SchemaError(`${path}: artifact ${i} lacks path/sha256`);
    }
    return a as unknown as ManifestArtifact;
  });
  return {
    scenario: String(m.scenario),
    command: String(m.command),
    package_version: String(m.package_version ?? ""),
    seed: Number(m.seed ?? 0),
    artifacts,
  };
}

/** Artifacts of one kind, with paths resolved next to the manifest. */
export function artifactPaths(manifestPath: string, manifest: Manifest, kind: string): string[] {
  const root = dirname(manifestPath);
  return manifest.artifacts.filter((a) => a.kind === kind).map((a) => join(root, a.path));
}
