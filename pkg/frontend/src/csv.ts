/**
 * Reader for the experiment CSV contract.
 *
 * Files start with a block of `# key: value` metadata lines (the first one
 * echoes the command that produced the file), then a header row, then data
 * rows. All errors carry the 1-based line number of the offending line.
 */

export class CsvParseError extends Error {
  readonly line: number;

  constructor(line: number, message: string) {
    super(`line ${line}: ${message}`);
    this.name = "CsvParseError";
    this.line = line;
  }
}

export interface CsvTable {
  /** Metadata block in file order. */
  meta: Map<string, string>;
  /** First word of the `# command:` echo, e.g. "workprec". */
  origin: string;
  columns: string[];
  /** Raw cells, one entry per data row, each entry column-aligned. */
  cells: string[][];
  /** 1-based file line of each data row. */
  rowLines: number[];
  /** 1-based file line of the header row. */
  headerLine: number;
}

const META_RE = /^# ([^:]+): (.*)$/;

export function parseCsv(text: string): CsvTable {
  const lines = text.split(/\r?\n/);
  while (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }

  const meta = new Map<string, string>();
  let columns: string[] | null = null;
  let headerLine = 0;
  const cells: string[][] = [];
  const rowLines: number[] = [];

  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    const lineNo = i + 1;
    if (line === "") {
      throw new CsvParseError(lineNo, "unexpected blank line");
    }
    if (columns === null && line.startsWith("#")) {
      const m = META_RE.exec(line);
      if (!m) {
        throw new CsvParseError(lineNo, `malformed metadata line: ${line}`);
      }
      meta.set(m[1].trim(), m[2]);
      continue;
    }
    if (columns === null) {
      columns = line.split(",").map((c) => c.trim());
      headerLine = lineNo;
      if (columns.some((c) => c === "")) {
        throw new CsvParseError(lineNo, "empty column name in header");
      }
      continue;
    }
    const row = line.split(",");
    if (row.length !== columns.length) {
      throw new CsvParseError(
        lineNo,
        `expected ${columns.length} fields, got ${row.length}`,
      );
    }
    cells.push(row);
    rowLines.push(lineNo);
  }

  if (columns === null) {
    throw new CsvParseError(lines.length, "no header row found");
  }
  const command = meta.get("command");
  if (command === undefined) {
    throw new CsvParseError(headerLine, "missing '# command:' metadata line");
  }
  if (cells.length === 0) {
    throw new CsvParseError(headerLine, "no data rows after header");
  }

  const origin = command.trim().split(/\s+/)[0];
  return { meta, origin, columns, cells, rowLines, headerLine };
}

function columnIndex(table: CsvTable, name: string): number {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new CsvParseError(
      table.headerLine,
      `missing column '${name}' (header has: ${table.columns.join(", ")})`,
    );
  }
  return idx;
}

function parseNumber(cell: string, line: number, column: string): number {
  const s = cell.trim();
  if (s === "nan") return NaN;
  if (s === "inf") return Infinity;
  if (s === "-inf") return -Infinity;
  const v = Number(s);
  if (s === "" || Number.isNaN(v)) {
    throw new CsvParseError(
      line,
      `field '${column}': cannot parse '${cell}' as a number`,
    );
  }
  return v;
}

export function numericColumn(table: CsvTable, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.cells.map((row, r) =>
    parseNumber(row[idx], table.rowLines[r], name),
  );
}

export function stringColumn(table: CsvTable, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.cells.map((row) => row[idx].trim());
}
