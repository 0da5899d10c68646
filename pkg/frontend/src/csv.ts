/** CSV reading for the solver's artifact files (numeric columns + header). */

import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8").trim();
  if (!text) {
    throw new SchemaError(`${path}: file is empty`);
  }
  const lines = text.split(/\r?\n/);
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((ln) => ln.split(","));
  if (rows.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return { columns, rows };
}

/** Numeric column by name; SchemaError lists what the file carries instead. */
export function numericColumn(table: Table, name: string, path = "input"): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${path}: missing column '${name}'; file has [${table.columns.join(", ")}]`,
    );
  }
  return table.rows.map((r) => {
    const v = parseFloat(r[idx]);
    return Number.isFinite(v) ? v : NaN;
  });
}

export function hasColumn(table: Table, name: string): boolean {
  return table.columns.includes(name);
}
