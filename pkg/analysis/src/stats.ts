/** Small statistics helpers shared by figures and drift reports. */

export interface Interval {
  pHat: number;
  lo: number;
  hi: number;
  k: number;
  n: number;
}

export function wilson(k: number, n: number, z = 1.96): Interval {
  if (n === 0) return { pHat: 0, lo: 0, hi: 1, k, n };
  const pHat = k / n;
  const denom = 1 + (z * z) / n;
  const center = (pHat + (z * z) / (2 * n)) / denom;
  const half = (z * Math.sqrt((pHat * (1 - pHat)) / n + (z * z) / (4 * n * n))) / denom;
  return { pHat, lo: Math.max(0, center - half), hi: Math.min(1, center + half), k, n };
}

export function percentile(sorted: number[], q: number): number {
  if (sorted.length === 0) return NaN;
  const pos = (q / 100) * (sorted.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  const frac = pos - lo;
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

/**
 * Least upper envelope a + b * x with b >= 0: least-squares slope clipped at
 * zero, intercept lifted until every margin is non-negative.  Mirrors the
 * producer's envelope fit so figures and summaries agree.
 */
export function envelopeFit(xs: number[], ys: number[]): { a: number; b: number; margins: number[] } {
  let b = 0;
  if (xs.length >= 2) {
    const mx = xs.reduce((s, v) => s + v, 0) / xs.length;
    const my = ys.reduce((s, v) => s + v, 0) / ys.length;
    let num = 0;
    let den = 0;
    xs.forEach((x, i) => {
      num += (x - mx) * (ys[i] - my);
      den += (x - mx) * (x - mx);
    });
    if (den > 0) b = num / den;
  }
  b = Math.max(0, b);
  const a = Math.max(...ys.map((y, i) => y - b * xs[i]));
  return { a, b, margins: xs.map((x, i) => a + b * x - ys[i]) };
}

/** Two-proportion z statistic (pooled); returns 0 when both counts are empty. */
export function twoProportionZ(k1: number, n1: number, k2: number, n2: number): number {
  if (n1 === 0 || n2 === 0) return 0;
  const p1 = k1 / n1;
  const p2 = k2 / n2;
  const pool = (k1 + k2) / (n1 + n2);
  const se = Math.sqrt(pool * (1 - pool) * (1 / n1 + 1 / n2));
  if (se === 0) return 0;
  return (p1 - p2) / se;
}
