/** SVG renderers for the three plot kinds, fed by a run manifest. */

import { writeFileSync } from "node:fs";
import { basename } from "node:path";

import { artifactPaths, readManifest, readResidualTable, readStateTable } from "./csv.js";
import { logSlope } from "./fit.js";
import { DEFAULT_VIEW, Viewpoint, projectPoint, wireframe } from "./project.js";
import { PlotKind, ResidualTable, SchemaError, StateTable } from "./types.js";

export const REFERENCE_COLOR = "blue";
export const CLOSED_LOOP_COLOR = "red";
const PALETTE = ["#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085"];

const fmt = (x: number): string => (Object.is(x, -0) ? "0.00" : x.toFixed(2));

function polyline(points: Array<[number, number]>, attrs: string): string {
  const d = points.map(([x, y], i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(y)}`).join(" ");
  return `<path d="${d}" fill="none" ${attrs}/>`;
}

function svgDocument(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

// ------------------------------------------------------------- sphere plot

export interface SphereScene {
  svg: string;
  referenceCurves: number;
  closedLoopCurves: number;
}

/** Split a projected curve into near-side and far-side sub-polylines. */
function depthSplit(
  points: Array<{ x: number; y: number; depth: number }>,
): { near: Array<Array<[number, number]>>; far: Array<Array<[number, number]>> } {
  const near: Array<Array<[number, number]>> = [];
  const far: Array<Array<[number, number]>> = [];
  let run: Array<[number, number]> = [];
  let onNear: boolean | null = null;
  for (const p of points) {
    const side = p.depth >= 0;
    if (onNear === null || side === onNear) {
      run.push([p.x, p.y]);
    } else {
      if (run.length > 1) (onNear ? near : far).push(run);
      run = [[p.x, p.y]];
    }
    onNear = side;
  }
  if (run.length > 1 && onNear !== null) (onNear ? near : far).push(run);
  return { near, far };
}

/** Figure-style sphere: grey wireframe, blue references, red closed loops. */
export function sphereScene(
  reference: StateTable[],
  closedLoop: StateTable[],
  view: Viewpoint = DEFAULT_VIEW,
): SphereScene {
  for (const t of [...reference, ...closedLoop]) {
    if (t.stateDim !== 3) {
      throw new SchemaError(`sphere plot needs 3-component states, got ${t.stateDim}`);
    }
  }
  if (reference.length === 0 && closedLoop.length === 0) {
    throw new SchemaError("sphere plot has no curves to draw");
  }
  const size = 640;
  const scale = 0.42 * size;
  const toScreen = (q: number[]) => {
    const p = projectPoint(q, view);
    return { x: size / 2 + scale * p.x, y: size / 2 - scale * p.y, depth: p.depth };
  };

  const body: string[] = [];
  body.push(
    `<circle cx="${size / 2}" cy="${size / 2}" r="${fmt(scale)}" fill="none" ` +
      `stroke="#b0b0b0" stroke-width="1" class="horizon"/>`,
  );
  for (const ring of wireframe()) {
    const { near, far } = depthSplit(ring.map(toScreen));
    for (const seg of far) {
      body.push(polyline(seg, `stroke="#e3e3e3" stroke-width="0.7" class="wireframe-far"`));
    }
    for (const seg of near) {
      body.push(polyline(seg, `stroke="#bdbdbd" stroke-width="0.7" class="wireframe"`));
    }
  }
  for (const table of reference) {
    const pts = table.qs.map(toScreen).map(({ x, y }) => [x, y] as [number, number]);
    body.push(
      polyline(pts, `stroke="${REFERENCE_COLOR}" stroke-width="1.6" class="reference"`),
    );
  }
  for (const table of closedLoop) {
    const pts = table.qs.map(toScreen).map(({ x, y }) => [x, y] as [number, number]);
    body.push(
      polyline(pts, `stroke="${CLOSED_LOOP_COLOR}" stroke-width="1.3" class="closed-loop"`),
    );
  }
  return {
    svg: svgDocument(size, size, body),
    referenceCurves: reference.length,
    closedLoopCurves: closedLoop.length,
  };
}

export function renderSphere3d(manifestPath: string): SphereScene {
  const manifest = readManifest(manifestPath);
  const refs = artifactPaths(manifestPath, manifest, "reference").map(readStateTable);
  const loops = artifactPaths(manifestPath, manifest, "closed_loop").map(readStateTable);
  return sphereScene(refs, loops);
}

// ------------------------------------------------------------- decay plot

export interface DecaySeriesInput {
  label: string;
  epsilon: number | null;
  table: ResidualTable;
}

export interface DecaySeries {
  label: string;
  epsilon: number | null;
  /** fitted d ln(res)/dt, negative for decaying residuals */
  slope: number;
}

export interface DecayScene {
  svg: string;
  series: DecaySeries[];
}

/** Semilog residual decay: straight lines of slope -2/epsilon. */
export function decayScene(inputs: DecaySeriesInput[]): DecayScene {
  if (inputs.length === 0) {
    throw new SchemaError("decay plot has no residual tables");
  }
  const width = 640;
  const height = 440;
  const margin = { left: 64, right: 16, top: 16, bottom: 44 };

  // keep the clean exponential region: nine decades below each series peak
  const kept = inputs.map(({ table, label }) => {
    const peak = Math.max(...table.values);
    const floor = peak * 1e-9;
    const t: number[] = [];
    const logv: number[] = [];
    for (let i = 0; i < table.times.length; i++) {
      if (table.values[i] > floor) {
        t.push(table.times[i]);
        logv.push(Math.log10(table.values[i]));
      }
    }
    if (t.length < 2) throw new SchemaError(`${label}: too few samples above the floor`);
    return { t, logv, floor };
  });

  const tMax = Math.max(...kept.map(({ t }) => t[t.length - 1]));
  const yMax = Math.ceil(Math.max(...kept.map(({ logv }) => Math.max(...logv))));
  const yMin = Math.floor(Math.min(...kept.map(({ logv }) => Math.min(...logv))));
  const sx = (t: number) => margin.left + ((width - margin.left - margin.right) * t) / tMax;
  const sy = (ly: number) =>
    margin.top + ((height - margin.top - margin.bottom) * (yMax - ly)) / (yMax - yMin);

  const body: string[] = [];
  body.push(
    `<rect x="${margin.left}" y="${margin.top}" width="${width - margin.left - margin.right}" ` +
      `height="${height - margin.top - margin.bottom}" fill="none" stroke="#444" class="frame"/>`,
  );
  for (let ly = yMin; ly <= yMax; ly += 2) {
    body.push(
      `<text x="${margin.left - 8}" y="${fmt(sy(ly) + 4)}" text-anchor="end" ` +
        `font-size="11" fill="#444">1e${ly}</text>`,
    );
  }
  for (let k = 0; k <= 5; k++) {
    const t = (tMax * k) / 5;
    body.push(
      `<text x="${fmt(sx(t))}" y="${height - margin.bottom + 18}" text-anchor="middle" ` +
        `font-size="11" fill="#444">${t.toFixed(1)}</text>`,
    );
  }
  body.push(
    `<text x="${width / 2}" y="${height - 8}" text-anchor="middle" font-size="12" fill="#222">t</text>`,
    `<text x="14" y="${height / 2}" text-anchor="middle" font-size="12" fill="#222" ` +
      `transform="rotate(-90 14 ${height / 2})">residual g(y,y)</text>`,
  );

  const series: DecaySeries[] = [];
  inputs.forEach((input, i) => {
    const color = PALETTE[i % PALETTE.length];
    const { t, logv, floor } = kept[i];
    const pts = t.map((tt, j) => [sx(tt), sy(logv[j])] as [number, number]);
    body.push(polyline(pts, `stroke="${color}" stroke-width="1.5" class="decay-line"`));
    const fit = logSlope(input.table.times, input.table.values, floor);
    const tag =
      input.epsilon !== null ? `eps=${input.epsilon} (slope ${fit.slope.toFixed(3)}/t)` : input.label;
    body.push(
      `<text x="${width - margin.right - 8}" y="${margin.top + 16 + 16 * i}" text-anchor="end" ` +
        `font-size="11" fill="${color}" class="legend">${tag}</text>`,
    );
    series.push({ label: input.label, epsilon: input.epsilon, slope: fit.slope });
  });
  return { svg: svgDocument(width, height, body), series };
}

export function renderDecaySemilog(manifestPath: string): DecayScene {
  const manifest = readManifest(manifestPath);
  const residuals = manifest.artifacts.filter((a) => a.kind === "residual");
  const paths = artifactPaths(manifestPath, manifest, "residual");
  const inputs: DecaySeriesInput[] = residuals.map((a, i) => ({
    label: basename(a.path, ".csv"),
    epsilon: a.epsilon ?? null,
    table: readResidualTable(paths[i]),
  }));
  return decayScene(inputs);
}

// -------------------------------------------------------- rotation entries

export interface So3Scene {
  svg: string;
  panels: number;
  seriesPerPanel: number;
}

/** 3x3 grid of rotation-entry traces R_ij(t), one series per trajectory. */
export function so3Scene(tables: StateTable[]): So3Scene {
  if (tables.length === 0) {
    throw new SchemaError("rotation plot has no trajectory tables");
  }
  for (const t of tables) {
    if (t.stateDim !== 9) {
      throw new SchemaError(`rotation plot needs 9-component states, got ${t.stateDim}`);
    }
  }
  const panel = 180;
  const gap = 14;
  const margin = 34;
  const size = margin * 2 + panel * 3 + gap * 2;
  const tMax = Math.max(...tables.map(({ times }) => times[times.length - 1]));

  const body: string[] = [];
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      const x0 = margin + j * (panel + gap);
      const y0 = margin + i * (panel + gap);
      body.push(
        `<rect x="${x0}" y="${y0}" width="${panel}" height="${panel}" fill="none" ` +
          `stroke="#444" class="panel"/>`,
        `<text x="${x0 + 6}" y="${y0 + 14}" font-size="11" fill="#222">R${i + 1}${j + 1}</text>`,
      );
      const sx = (t: number) => x0 + (panel * t) / tMax;
      const sy = (v: number) => y0 + (panel * (1 - v)) / 2; // entries live in [-1, 1]
      body.push(
        polyline(
          [
            [x0, sy(0)],
            [x0 + panel, sy(0)],
          ],
          `stroke="#dddddd" stroke-width="0.7" class="zero-line"`,
        ),
      );
      tables.forEach((table, k) => {
        const col = 3 * i + j;
        const pts = table.times.map(
          (t, r) => [sx(t), sy(table.qs[r][col])] as [number, number],
        );
        body.push(
          polyline(pts, `stroke="${PALETTE[k % PALETTE.length]}" stroke-width="1.2" class="entry"`),
        );
      });
    }
  }
  return { svg: svgDocument(size, size, body), panels: 9, seriesPerPanel: tables.length };
}

export function renderSo3Components(manifestPath: string): So3Scene {
  const manifest = readManifest(manifestPath);
  const tables = artifactPaths(manifestPath, manifest, "closed_loop").map(readStateTable);
  return so3Scene(tables);
}

// ------------------------------------------------------------- dispatcher

export interface RenderRequest {
  manifestPath: string;
  kind: PlotKind;
  out: string;
}

/** Render one plot kind and write the image; nothing is written on failure. */
export function runRender(req: RenderRequest): string {
  let svg: string;
  let summary: string;
  if (req.kind === "sphere3d") {
    const scene = renderSphere3d(req.manifestPath);
    svg = scene.svg;
    summary = `sphere3d: ${scene.referenceCurves} reference + ${scene.closedLoopCurves} closed-loop curves`;
  } else if (req.kind === "decay_semilog") {
    const scene = renderDecaySemilog(req.manifestPath);
    svg = scene.svg;
    const slopes = scene.series.map((s) => s.slope.toFixed(3)).join(", ");
    summary = `decay_semilog: ${scene.series.length} series, slopes [${slopes}]`;
  } else {
    const scene = renderSo3Components(req.manifestPath);
    svg = scene.svg;
    summary = `so3_components: ${scene.panels} panels, ${scene.seriesPerPanel} trajectories`;
  }
  writeFileSync(req.out, svg);
  return `${summary} -> ${req.out}`;
}
