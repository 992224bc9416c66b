/** Least-squares slope of y against x (both already transformed). */
export function slope(x: number[], y: number[]): number {
  const n = x.length;
  if (n < 2) {
    throw new Error("need at least two points for a slope fit");
  }
  let sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/** Slope of log(y) vs log(x): the convergence order read off a log-log plot. */
export function loglogSlope(x: number[], y: number[]): number {
  return slope(x.map(Math.log), y.map(Math.log));
}

/** Slope of log(y) vs x: the rate read off a semi-log plot (p-convergence). */
export function semilogSlope(x: number[], y: number[]): number {
  return slope(x, y.map(Math.log));
}
