import Papa from "papaparse";

/** Column contract shared with the producer. Order matters for `extra`
 *  reporting only; validation is set-based. */
export const SCHEMA_COLUMNS = ["N", "estimator", "value", "stderr", "abs_err", "ginf"] as const;

export interface Row {
  N: number;
  estimator: string;
  value: number;
  stderr: number;
  absErr: number;
  ginf: number;
}

export interface Series {
  label: string;
  rows: Row[]; // sorted by N ascending, limit rows (N = 0) excluded
  ginf: number;
}

export interface SchemaReport {
  ok: boolean;
  missing: string[];
  extra: string[];
  rowCount: number;
  problems: string[];
}

function parseRaw(text: string): Papa.ParseResult<Record<string, string>> {
  // the producer writes one leading "#" provenance line; comments strips it
  return Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    comments: "#",
    skipEmptyLines: true,
  });
}

/** Check a CSV body against the column contract without throwing.
 *  The report is printable and the `ok` flag maps onto an exit status. */
export function validateCsv(text: string): SchemaReport {
  const problems: string[] = [];
  if (text.trim().length === 0 || text.trim().split("\n").every((l) => l.startsWith("#"))) {
    return { ok: false, missing: [...SCHEMA_COLUMNS], extra: [], rowCount: 0, problems: ["no header"] };
  }
  const parsed = parseRaw(text);
  const fields = parsed.meta.fields ?? [];
  const missing = SCHEMA_COLUMNS.filter((c) => !fields.includes(c));
  const extra = fields.filter((f) => !(SCHEMA_COLUMNS as readonly string[]).includes(f));
  for (const m of missing) problems.push(`missing column: ${m}`);
  for (const e of extra) problems.push(`extra column: ${e}`);
  if (missing.length === 0) {
    parsed.data.forEach((rec, i) => {
      for (const c of ["N", "value", "stderr", "abs_err", "ginf"]) {
        if (!Number.isFinite(Number(rec[c]))) {
          problems.push(`row ${i + 1}: non-numeric ${c} (${JSON.stringify(rec[c])})`);
        }
      }
    });
  }
  return { ok: problems.length === 0, missing, extra, rowCount: parsed.data.length, problems };
}

/** Parse a schema-valid CSV into plot-ready series, grouped by the
 *  estimator label and sorted by N. Throws on schema violations; run
 *  validateCsv first for a survivable report. */
export function parseCsv(text: string): Series[] {
  const report = validateCsv(text);
  if (!report.ok) {
    throw new Error(`CSV does not match schema: ${report.problems.join("; ")}`);
  }
  const rows: Row[] = parseRaw(text).data.map((rec) => ({
    N: Number(rec.N),
    estimator: rec.estimator,
    value: Number(rec.value),
    stderr: Number(rec.stderr),
    absErr: Number(rec.abs_err),
    ginf: Number(rec.ginf),
  }));

  const order: string[] = [];
  const byLabel = new Map<string, Row[]>();
  for (const row of rows) {
    if (!byLabel.has(row.estimator)) {
      byLabel.set(row.estimator, []);
      order.push(row.estimator);
    }
    byLabel.get(row.estimator)!.push(row);
  }
  return order.map((label) => {
    const all = byLabel.get(label)!;
    const finite = all.filter((r) => r.N > 0).sort((a, b) => a.N - b.N);
    // a standalone limit row (N = 0) still pins the series limit
    const ginf = (finite[0] ?? all[0]).ginf;
    return { label, rows: finite, ginf };
  });
}
