#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { parseCsv, validateCsv } from "./csv.js";
import { render, type FigureKind } from "./figure.js";

const USAGE = "usage: defectfe-plot --csv <path> --kind <value|loglog-error> --out <path> [--guide]";

/** Exit codes mirror the producer CLI: 2 config trouble, 3 bad data. */
export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        csv: { type: "string" },
        kind: { type: "string" },
        out: { type: "string" },
        guide: { type: "boolean", default: false },
      },
      allowPositionals: false,
    });
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(USAGE);
    return 2;
  }
  const { csv, kind, out, guide } = args.values;
  if (!csv || !kind || !out) {
    console.error(USAGE);
    return 2;
  }
  if (kind !== "value" && kind !== "loglog-error") {
    console.error(`unknown kind ${JSON.stringify(kind)}; expected value or loglog-error`);
    return 2;
  }

  let text: string;
  try {
    text = readFileSync(csv, "utf8");
  } catch (err) {
    console.error(`cannot read ${csv}: ${err instanceof Error ? err.message : String(err)}`);
    return 2;
  }

  const report = validateCsv(text);
  if (!report.ok) {
    for (const p of report.problems) console.error(`${csv}: ${p}`);
    return 3;
  }

  let svg: string;
  try {
    svg = render({ kind: kind as FigureKind, series: parseCsv(text), guide });
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 3;
  }
  writeFileSync(out, svg, "utf8");
  console.error(`wrote ${out} (${report.rowCount} rows, kind=${kind})`);
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
