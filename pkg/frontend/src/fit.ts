/** Ordinary least squares for the decay-slope annotations and checks. */

export interface LineFit {
  slope: number;
  intercept: number;
}

export function linearFit(xs: number[], ys: number[]): LineFit {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error(`cannot fit a line through ${xs.length} points`);
  }
  const n = xs.length;
  let sx = 0,
    sy = 0,
    sxx = 0,
    sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const denom = n * sxx - sx * sx;
  if (denom === 0) {
    throw new Error("degenerate abscissae: all x equal");
  }
  const slope = (n * sxy - sx * sy) / denom;
  return { slope, intercept: (sy - slope * sx) / n };
}

/** Slope of ln(y) vs x over the samples with y above the floor. */
export function logSlope(xs: number[], ys: number[], floor = 1e-300): LineFit {
  const keptX: number[] = [];
  const keptY: number[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (ys[i] > floor) {
      keptX.push(xs[i]);
      keptY.push(Math.log(ys[i]));
    }
  }
  return linearFit(keptX, keptY);
}
