/** Shapes of the run-directory contract: manifest plus CSV tables. */

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export interface ManifestArtifact {
  path: string;
  rows: number | null;
  sha256: string;
  kind?: string;
  ic?: number;
  epsilon?: number;
}

export interface Manifest {
  scenario: string;
  command: string;
  package_version: string;
  seed: number;
  artifacts: ManifestArtifact[];
}

/** Trajectory table: t,q1..qN,v1..vN with N = 3 (sphere) or 9 (rotations). */
export interface StateTable {
  times: number[];
  qs: number[][];
  vs: number[][];
  stateDim: number;
}

/** Residual table: t,res_norm_sq. */
export interface ResidualTable {
  times: number[];
  values: number[];
}

export interface SweepRow {
  epsilon: number;
  fittedRateNorm: number;
  fittedRateNormSq: number;
  sandwichOk: boolean;
}

export type PlotKind = "sphere3d" | "decay_semilog" | "so3_components";

export const PLOT_KINDS: PlotKind[] = ["sphere3d", "decay_semilog", "so3_components"];
