import * as fs from "fs";

export class MissingColumn extends Error {}
export class TooFewRows extends Error {}

export interface Table {
  columns: string[];
  rows: number[][];
}

/** Parse a curlcurl CSV (plain comma-separated, first line is the header). */
export function readCsv(path: string): Table {
  const text = fs.readFileSync(path, "utf8").trim();
  const lines = text.length ? text.split(/\r?\n/) : [];
  if (lines.length < 1) {
    throw new TooFewRows(`${path}: empty file`);
  }
  const columns = lines[0].split(",").map((s) => s.trim());
  const rows: number[][] = [];
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    rows.push(line.split(",").map(Number));
  }
  return { columns, rows };
}

export function column(table: Table, name: string, path = "csv"): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new MissingColumn(`${path}: no column '${name}' in [${table.columns.join(", ")}]`);
  }
  return table.rows.map((r) => r[idx]);
}
