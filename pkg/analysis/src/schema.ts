/**
 * CSV schema handling for percoface experiment outputs.
 *
 * The authoritative column lists come from `percoface emit-schema`; figures
 * refuse any CSV whose header deviates, naming the offending column.
 */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

export interface SchemaFile {
  schema_version: number;
  csv: Record<string, { columns: string[] }>;
  file_naming: string;
}

export interface CsvTable {
  experiment: string;
  columns: string[];
  rows: Record<string, string>[];
}

export class SchemaError extends Error {
  constructor(message: string, readonly column?: string) {
    super(message);
  }
}

export function loadSchemas(path: string): SchemaFile {
  const parsed = JSON.parse(readFileSync(path, "utf-8")) as SchemaFile;
  if (!parsed.csv) throw new SchemaError(`${path}: not a schema file (missing "csv")`);
  return parsed;
}

/** d, L, p, seed recovered from the documented file-naming pattern. */
export function parseRunName(csvPath: string): {
  experiment: string; d: number; L: number; p: number; seed: number;
} {
  const name = basename(csvPath).replace(/\.csv$/, "");
  const m = name.match(/^([a-z_]+)_(\d+)d_L(\d+)_p([0-9.]+)_seed(\d+)$/);
  if (!m) throw new SchemaError(`${csvPath}: file name does not match the documented pattern`);
  return {
    experiment: m[1],
    d: Number(m[2]),
    L: Number(m[3]),
    p: Number(m[4]),
    seed: Number(m[5]),
  };
}

/** Minimal CSV split: fields are quoted only when they contain commas. */
function splitCsvLine(line: string): string[] {
  const out: string[] = [];
  let cur = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') { cur += '"'; i++; }
        else quoted = false;
      } else cur += ch;
    } else if (ch === '"') quoted = true;
    else if (ch === ",") { out.push(cur); cur = ""; }
    else cur += ch;
  }
  out.push(cur);
  return out;
}

export function parseCsv(path: string, schemas: SchemaFile): CsvTable {
  const run = parseRunName(path);
  const schema = schemas.csv[run.experiment];
  if (!schema) throw new SchemaError(`${path}: unknown experiment ${run.experiment}`);
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.length > 0);
  const header = splitCsvLine(lines[0]);
  for (const col of schema.columns) {
    if (!header.includes(col)) {
      throw new SchemaError(`${path}: missing column "${col}"`, col);
    }
  }
  for (const col of header) {
    if (!schema.columns.includes(col)) {
      throw new SchemaError(`${path}: unexpected column "${col}"`, col);
    }
  }
  const rows = lines.slice(1).map((line) => {
    const cells = splitCsvLine(line);
    const row: Record<string, string> = {};
    header.forEach((col, i) => (row[col] = cells[i]));
    return row;
  });
  return { experiment: run.experiment, columns: header, rows };
}

export function numericColumn(table: CsvTable, column: string): number[] {
  if (!table.columns.includes(column)) {
    throw new SchemaError(`missing column "${column}"`, column);
  }
  return table.rows.map((r) => Number(r[column]));
}
