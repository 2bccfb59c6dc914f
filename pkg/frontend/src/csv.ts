/** CSV reading and schema validation for the evaluation file formats. */

export interface Table {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((line) => line.split(",").map((c) => c.trim()));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new SchemaError(
        `ragged CSV row: expected ${header.length} columns, got ${row.length}`,
      );
    }
  }
  return { header, rows };
}

/** Assert the named columns exist; the error names the first missing one. */
export function requireColumns(table: Table, needed: string[], kind: string): void {
  for (const col of needed) {
    if (!table.header.includes(col)) {
      throw new SchemaError(`${kind} input is missing column '${col}'`);
    }
  }
}

export function requireRows(table: Table, kind: string): void {
  if (table.rows.length === 0) {
    throw new SchemaError(`${kind} input has a header but no data rows`);
  }
}

/** Numeric column accessor keyed by header name. */
export function column(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column '${name}'`);
  }
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (!Number.isFinite(v)) {
      throw new SchemaError(`non-numeric value '${row[idx]}' in column '${name}' row ${i + 1}`);
    }
    return v;
  });
}
