/**
 * Report figures from experiment CSVs.
 *
 * Each figure is a pure function of the CSV bytes and its options: file names
 * and thresholds come in explicitly, nothing reads the clock.  Covered here:
 *
 *   isolation_tail      — empirical tail of the max isolation radius vs ell,
 *                         log scale, against the reference decay slope
 *                         ln(alpha(d)(1-p))/(2d)
 *   isolation_histogram — distribution of the max isolation radius
 *   localization_growth — 99th percentile of the localization statistic vs
 *                         ln^2|Lambda| with the fitted upper envelope
 *   speed_curve         — exceedance frequency of the trimmed semi-distance
 *                         per ell, pairwise and windowed-union variants
 */

import { CsvTable, SchemaError, numericColumn, parseRunName } from "./schema.js";
import { envelopeFit, percentile, wilson } from "./stats.js";
import { ChartSpec, Series, renderChart } from "./svg.js";

export interface Figure {
  svg: string;
  meta: Record<string, unknown>;
}

function alphaOf(d: number): number {
  return 3 ** d + 4 * (d - 1) * 3 ** (d - 2) - 1;
}

function logLambda(d: number, L: number): number {
  return d * Math.log(L + 1);
}

function ellGrid(d: number, L: number): number[] {
  const ll = logLambda(d, L);
  const mults = [...new Set([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 2 * d])].sort((a, b) => a - b);
  return mults.map((m) => m * ll);
}

export function isolationTailFigure(table: CsvTable, csvPath: string): Figure {
  requireExperiment(table, "isolation");
  const run = parseRunName(csvPath);
  const vals = numericColumn(table, "max_isolation");
  const grid = ellGrid(run.d, run.L);
  const n = vals.length;
  const points: { x: number; y: number }[] = [];
  const ci: { lo: number; hi: number }[] = [];
  for (const ell of grid) {
    const k = vals.filter((v) => Number.isFinite(v) && v >= ell).length;
    const w = wilson(k, n);
    points.push({ x: ell, y: w.pHat });
    ci.push({ lo: w.lo, hi: w.hi });
  }
  const slope = Math.log(alphaOf(run.d) * (1 - run.p)) / (2 * run.d);
  const reference: Series = {
    label: `ref slope ${Number(slope.toPrecision(3))}/ln10`,
    color: "#cc5500",
    dash: "4 3",
    points: grid.map((ell) => ({ x: ell, y: Math.min(1, Math.exp(slope * ell)) })),
  };
  const spec: ChartSpec = {
    title: `isolation tail d=${run.d} L=${run.L} p=${run.p} (n=${n})`,
    xLabel: "ell (lattice units)",
    yLabel: "P(max isolation >= ell)",
    logY: true,
    warning: n === 0 ? "empty record stream" : undefined,
    series: n === 0 ? [] : [
      { label: "empirical tail", color: "#1f4e9c", points, ci },
      reference,
    ],
  };
  const meta = {
    n,
    reference_slope: slope,
    tail: points.map((p, i) => ({ ell: p.x, p_hat: p.y, ci_lo: ci[i].lo, ci_hi: ci[i].hi })),
  };
  return { svg: renderChart(spec), meta };
}

export function isolationHistogramFigure(table: CsvTable, csvPath: string): Figure {
  requireExperiment(table, "isolation");
  const run = parseRunName(csvPath);
  const vals = numericColumn(table, "max_isolation").filter((v) => Number.isFinite(v));
  const bins = 24;
  let series: Series[] = [];
  if (vals.length > 0) {
    const lo = Math.min(...vals);
    const hi = Math.max(...vals) + 1e-9;
    const width = (hi - lo) / bins || 1;
    const counts = new Array<number>(bins).fill(0);
    for (const v of vals) counts[Math.min(bins - 1, Math.floor((v - lo) / width))]++;
    series = [{
      label: "count",
      color: "#1f4e9c",
      points: counts.map((c, i) => ({ x: lo + (i + 0.5) * width, y: c })),
    }];
  }
  const svg = renderChart({
    title: `isolation radius histogram d=${run.d} L=${run.L} p=${run.p}`,
    xLabel: "max isolation radius",
    yLabel: "samples",
    warning: vals.length === 0 ? "empty record stream" : undefined,
    series,
  });
  return { svg, meta: { n: vals.length } };
}

export function localizationGrowthFigure(tables: { table: CsvTable; csvPath: string }[]): Figure {
  if (tables.length === 0) {
    const svg = renderChart({
      title: "localization growth", xLabel: "ln^2|Lambda|", yLabel: "q99",
      warning: "empty record stream", series: [],
    });
    return { svg, meta: { points: [] } };
  }
  const pts: { x: number; y: number; ciLo: number; ciHi: number }[] = [];
  let runMeta = { d: 0, p: 0 };
  for (const { table, csvPath } of tables) {
    requireExperiment(table, "localization");
    const run = parseRunName(csvPath);
    runMeta = { d: run.d, p: run.p };
    const empty = numericColumn(table, "empty");
    const vals = numericColumn(table, "max_dist")
      .filter((v, i) => empty[i] === 0 && Number.isFinite(v))
      .sort((a, b) => a - b);
    // order-statistic CI for the 99th percentile
    const n = vals.length;
    const half = 1.96 * Math.sqrt(n * 0.99 * 0.01);
    const lo = vals[Math.max(0, Math.min(n - 1, Math.floor(n * 0.99 - half)))];
    const hi = vals[Math.max(0, Math.min(n - 1, Math.ceil(n * 0.99 + half)))];
    pts.push({ x: logLambda(run.d, run.L) ** 2, y: percentile(vals, 99), ciLo: lo, ciHi: hi });
  }
  pts.sort((a, b) => a.x - b.x);
  const fit = envelopeFit(pts.map((p) => p.x), pts.map((p) => p.y));
  const envelope: Series = {
    label: `envelope ${Number(fit.a.toPrecision(3))} + ${Number(fit.b.toPrecision(3))} x`,
    color: "#cc5500",
    dash: "4 3",
    points: pts.map((p) => ({ x: p.x, y: fit.a + fit.b * p.x })),
  };
  const svg = renderChart({
    title: `localization 99th percentile d=${runMeta.d} p=${runMeta.p}`,
    xLabel: "ln^2|Lambda|",
    yLabel: "q99 of max d(e, complement u P\\{e})",
    series: [
      {
        label: "q99", color: "#1f4e9c",
        points: pts.map((p) => ({ x: p.x, y: p.y })),
        ci: pts.map((p) => ({ lo: p.ciLo, hi: p.ciHi })),
      },
      envelope,
    ],
  });
  const meta = {
    envelope: { a: fit.a, b: fit.b, margins: fit.margins },
    points: pts.map((p) => ({ ln2_lambda: p.x, q99: p.y, ci_lo: p.ciLo, ci_hi: p.ciHi })),
  };
  return { svg, meta };
}

export function speedCurveFigure(table: CsvTable, csvPath: string): Figure {
  requireExperiment(table, "speed");
  const run = parseRunName(csvPath);
  const threshold = 2 * run.d * logLambda(run.d, run.L);
  const variants = ["pair", "window_union"] as const;
  const colors = { pair: "#1f4e9c", window_union: "#2e7d32" };
  const series: Series[] = [];
  for (const variant of variants) {
    const rows = table.rows.filter((r) => r.variant === variant);
    const byEll = new Map<number, Map<string, number>>();
    for (const r of rows) {
      const ell = Number(r.ell);
      const key = `${r.replica}:${r.step}`;
      const windows = byEll.get(ell) ?? new Map<string, number>();
      windows.set(key, Math.max(windows.get(key) ?? 0, Number(r.value)));
      byEll.set(ell, windows);
    }
    const ells = [...byEll.keys()].sort((a, b) => a - b);
    if (ells.length === 0) continue;
    const points: { x: number; y: number }[] = [];
    const ci: { lo: number; hi: number }[] = [];
    for (const ell of ells) {
      const windows = byEll.get(ell)!;
      const k = [...windows.values()].filter((v) => v > threshold).length;
      const w = wilson(k, windows.size);
      points.push({ x: ell, y: w.pHat });
      ci.push({ lo: w.lo, hi: w.hi });
    }
    series.push({ label: variant, color: colors[variant], points, ci });
  }
  const svg = renderChart({
    title: `speed exceedance (> ${Number(threshold.toPrecision(4))}) d=${run.d} L=${run.L} p=${run.p}`,
    xLabel: "ell (trim radius)",
    yLabel: "P(d_H^ell > 2d ln|Lambda|)",
    warning: series.length === 0 ? "empty record stream" : undefined,
    series,
  });
  const meta = {
    threshold,
    variants: series.map((s) => ({
      variant: s.label,
      curve: s.points.map((p, i) => ({ ell: p.x, p_hat: p.y, ci_lo: s.ci?.[i]?.lo, ci_hi: s.ci?.[i]?.hi })),
    })),
  };
  return { svg, meta };
}

function requireExperiment(table: CsvTable, want: string): void {
  if (table.experiment !== want) {
    throw new SchemaError(`figure needs a ${want} CSV, got ${table.experiment}`);
  }
}
