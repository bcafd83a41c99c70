/**
 * Entry point.
 *
 *   node dist/src/cli.js render --spec report.json
 *   node dist/src/cli.js compare a.csv b.csv --schemas schemas.json
 *
 * The report spec lists figures over experiment CSVs:
 *
 *   {
 *     "schemas": "fixtures/schemas.json",
 *     "out_dir": "figures",
 *     "figures": [
 *       {"kind": "isolation_tail", "csv": "isolation_2d_L32_p0.95_seed404.csv", "out": "tail.svg"},
 *       {"kind": "isolation_histogram", "csv": "...", "out": "hist.svg"},
 *       {"kind": "speed_curve", "csv": "...", "out": "speed.svg"},
 *       {"kind": "localization_growth", "csvs": ["...L16...", "...L32..."], "out": "growth.svg"}
 *     ]
 *   }
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join, resolve } from "node:path";

import { compareRuns } from "./compare.js";
import {
  Figure,
  isolationHistogramFigure,
  isolationTailFigure,
  localizationGrowthFigure,
  speedCurveFigure,
} from "./figures.js";
import { SchemaError, loadSchemas, parseCsv } from "./schema.js";

interface FigureSpec {
  kind: string;
  csv?: string;
  csvs?: string[];
  out: string;
}

interface ReportSpec {
  schemas: string;
  out_dir: string;
  figures: FigureSpec[];
}

export function renderReport(specPath: string): string[] {
  const spec = JSON.parse(readFileSync(specPath, "utf-8")) as ReportSpec;
  const base = dirname(resolve(specPath));
  const schemas = loadSchemas(resolve(base, spec.schemas));
  const outDir = resolve(base, spec.out_dir);
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  const summary: Record<string, unknown>[] = [];
  for (const fig of spec.figures) {
    const rendered = renderFigure(fig, base, schemas);
    const outPath = resolve(outDir, fig.out);
    writeFileSync(outPath, rendered.svg);
    written.push(outPath);
    summary.push({ out: fig.out, kind: fig.kind, inputs: fig.csv ?? fig.csvs, ...rendered.meta });
  }
  const summaryPath = resolve(outDir, "summary.json");
  writeFileSync(summaryPath, JSON.stringify(summary, null, 2) + "\n");
  written.push(summaryPath);
  return written;
}

function renderFigure(fig: FigureSpec, base: string, schemas: ReturnType<typeof loadSchemas>): Figure {
  switch (fig.kind) {
    case "isolation_tail": {
      const path = resolve(base, need(fig.csv, fig.kind));
      return isolationTailFigure(parseCsv(path, schemas), path);
    }
    case "isolation_histogram": {
      const path = resolve(base, need(fig.csv, fig.kind));
      return isolationHistogramFigure(parseCsv(path, schemas), path);
    }
    case "speed_curve": {
      const path = resolve(base, need(fig.csv, fig.kind));
      return speedCurveFigure(parseCsv(path, schemas), path);
    }
    case "localization_growth": {
      const paths = (fig.csvs ?? []).map((p) => resolve(base, p));
      return localizationGrowthFigure(paths.map((p) => ({ table: parseCsv(p, schemas), csvPath: p })));
    }
    default:
      throw new SchemaError(`unknown figure kind ${fig.kind}`);
  }
}

function need(v: string | undefined, kind: string): string {
  if (!v) throw new SchemaError(`figure ${kind} needs a "csv" entry`);
  return v;
}

export function compareCommand(aPath: string, bPath: string, schemasPath: string): string {
  const schemas = loadSchemas(schemasPath);
  const report = compareRuns(parseCsv(aPath, schemas), aPath, parseCsv(bPath, schemas), bPath);
  return JSON.stringify(report, null, 2) + "\n";
}

function main(argv: string[]): number {
  const [cmd, ...rest] = argv;
  try {
    if (cmd === "render") {
      const i = rest.indexOf("--spec");
      if (i < 0 || !rest[i + 1]) throw new SchemaError("render needs --spec <report.json>");
      for (const path of renderReport(rest[i + 1])) console.log(path);
      return 0;
    }
    if (cmd === "compare") {
      const [a, b] = rest;
      const i = rest.indexOf("--schemas");
      if (!a || !b || i < 0 || !rest[i + 1]) {
        throw new SchemaError("compare needs <a.csv> <b.csv> --schemas <schemas.json>");
      }
      process.stdout.write(compareCommand(a, b, rest[i + 1]));
      return 0;
    }
    console.error("usage: cli.js render --spec report.json | compare a.csv b.csv --schemas schemas.json");
    return 1;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
