// CSV reading against the declared schemas of the simulation CLI outputs.
// Values never contain quoted separators, so a plain split is exact.
import { readFileSync } from "node:fs";

export interface Table {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError(`${path}: empty file`);
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

export function columnIndex(table: Table, name: string, context: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${context}: missing column "${name}" (found: ${table.header.join(", ")})`,
    );
  }
  return idx;
}

export function numericColumn(table: Table, name: string, context: string): number[] {
  const idx = columnIndex(table, name, context);
  return table.rows.map((r) => Number(r[idx]));
}
