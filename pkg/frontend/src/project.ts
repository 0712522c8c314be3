/** Fixed-viewpoint orthographic projection for the sphere figure. */

export interface Viewpoint {
  /** rotation about the vertical axis, degrees */
  azimuth: number;
  /** tilt of the camera above the equator, degrees */
  elevation: number;
}

export interface Projected {
  x: number;
  y: number;
  /** signed distance toward the camera; positive is the near side */
  depth: number;
}

export const DEFAULT_VIEW: Viewpoint = { azimuth: -60, elevation: 22 };

const RAD = Math.PI / 180;

/**
 * Rotate by azimuth about z, tilt by elevation, then drop the camera axis.
 * Screen x points right, screen y points up (flip to SVG coords later).
 */
export function projectPoint(q: number[], view: Viewpoint = DEFAULT_VIEW): Projected {
  const ca = Math.cos(view.azimuth * RAD);
  const sa = Math.sin(view.azimuth * RAD);
  const ce = Math.cos(view.elevation * RAD);
  const se = Math.sin(view.elevation * RAD);
  const x1 = ca * q[0] - sa * q[1];
  const y1 = sa * q[0] + ca * q[1];
  const z1 = q[2];
  // camera looks along -y after the tilt
  const depth = ce * y1 + se * z1;
  const up = -se * y1 + ce * z1;
  return { x: x1, y: up, depth };
}

/** Latitude/longitude circles of the unit sphere, as point lists. */
export function wireframe(nLat = 5, nLon = 8, samples = 96): number[][][] {
  const curves: number[][][] = [];
  for (let i = 1; i <= nLat; i++) {
    const phi = (i / (nLat + 1) - 0.5) * Math.PI;
    const ring: number[][] = [];
    for (let s = 0; s <= samples; s++) {
      const th = (2 * Math.PI * s) / samples;
      ring.push([Math.cos(phi) * Math.cos(th), Math.cos(phi) * Math.sin(th), Math.sin(phi)]);
    }
    curves.push(ring);
  }
  for (let j = 0; j < nLon; j++) {
    const th = (Math.PI * j) / nLon;
    const ring: number[][] = [];
    for (let s = 0; s <= samples; s++) {
      const phi = (2 * Math.PI * s) / samples;
      ring.push([Math.cos(phi) * Math.cos(th), Math.cos(phi) * Math.sin(th), Math.sin(phi)]);
    }
    curves.push(ring);
  }
  return curves;
}
