/**
 * Drift comparison between two runs of the same experiment.
 *
 * Refuses runs with different geometry or schema (the deltas would be
 * meaningless); otherwise reports per-statistic deltas with a two-proportion
 * significance flag at the 0.01 level (|z| > 2.576).
 */

import { CsvTable, SchemaError, numericColumn, parseRunName } from "./schema.js";
import { twoProportionZ } from "./stats.js";

export interface DriftEntry {
  statistic: string;
  a: number;
  b: number;
  delta: number;
  z: number;
  significant: boolean;
}

export interface DriftReport {
  experiment: string;
  comparable: boolean;
  reason?: string;
  entries: DriftEntry[];
}

const Z_CUTOFF = 2.576; // two-sided 0.01 level

export function compareRuns(
  a: CsvTable, aPath: string, b: CsvTable, bPath: string,
): DriftReport {
  const runA = parseRunName(aPath);
  const runB = parseRunName(bPath);
  if (a.experiment !== b.experiment) {
    return refuse(a.experiment, `experiments differ (${a.experiment} vs ${b.experiment})`);
  }
  if (runA.d !== runB.d || runA.L !== runB.L || runA.p !== runB.p) {
    return refuse(
      a.experiment,
      `geometry differs (d=${runA.d},L=${runA.L},p=${runA.p} vs d=${runB.d},L=${runB.L},p=${runB.p}); ` +
        "statistics at different sizes are not comparable",
    );
  }
  if (a.columns.join(",") !== b.columns.join(",")) {
    return refuse(a.experiment, "column sets differ");
  }
  const entries: DriftEntry[] = [];
  for (const stat of thresholdStatistics(a, runA.d, runA.L)) {
    const ka = count(a, stat);
    const kb = count(b, stat);
    const z = twoProportionZ(ka, a.rows.length, kb, b.rows.length);
    entries.push({
      statistic: stat.name,
      a: ka / Math.max(1, a.rows.length),
      b: kb / Math.max(1, b.rows.length),
      delta: ka / Math.max(1, a.rows.length) - kb / Math.max(1, b.rows.length),
      z,
      significant: Math.abs(z) > Z_CUTOFF,
    });
  }
  return { experiment: a.experiment, comparable: true, entries };
}

interface Stat {
  name: string;
  column: string;
  threshold: number;
}

function thresholdStatistics(table: CsvTable, d: number, L: number): Stat[] {
  const ll = d * Math.log(L + 1);
  switch (table.experiment) {
    case "isolation":
      return [1, 2, 4].map((m) => ({
        name: `P(max_isolation >= ${m} ln|Lambda|)`,
        column: "max_isolation",
        threshold: m * ll,
      }));
    case "localization":
      return [1, 2].map((m) => ({
        name: `P(max_dist >= ${m} ln|Lambda|)`,
        column: "max_dist",
        threshold: m * ll,
      }));
    case "speed":
      return [{ name: `P(value > ${2 * d} ln|Lambda|)`, column: "value", threshold: 2 * d * ll }];
    case "empty_pivotal":
      return [{ name: "P(empty)", column: "empty", threshold: 0.5 }];
    case "stp_validity":
      return [{ name: "P(boundary_exit)", column: "boundary_exit", threshold: 0.5 }];
    default:
      throw new SchemaError(`no drift statistics for ${table.experiment}`);
  }
}

function count(table: CsvTable, stat: Stat): number {
  return numericColumn(table, stat.column)
    .filter((v) => Number.isFinite(v) && v >= stat.threshold).length;
}

function refuse(experiment: string, reason: string): DriftReport {
  return { experiment, comparable: false, reason, entries: [] };
}
