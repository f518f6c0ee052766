import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parseCsv, SCHEMA_COLUMNS, validateCsv } from "../src/csv.js";

const FIXTURES = join(__dirname, "fixtures");
const quartic = readFileSync(join(FIXTURES, "quartic_study.csv"), "utf8");
const harmonic = readFileSync(join(FIXTURES, "harmonic_validation.csv"), "utf8");

/** Drop one column from a producer CSV, leaving the # sidecar intact. */
function dropColumn(text: string, name: string): string {
  const lines = text.trimEnd().split("\n");
  const headerIdx = lines.findIndex((l) => !l.startsWith("#"));
  const header = lines[headerIdx].split(",");
  const at = header.indexOf(name);
  if (at < 0) throw new Error(`no column ${name}`);
  return lines
    .map((l, i) => {
      if (i < headerIdx || l.startsWith("#")) return l;
      const cells = l.split(",");
      cells.splice(at, 1);
      return cells.join(",");
    })
    .join("\n") + "\n";
}

describe("validateCsv", () => {
  it("passes on producer output", () => {
    for (const text of [quartic, harmonic]) {
      const report = validateCsv(text);
      expect(report.ok).toBe(true);
      expect(report.problems).toEqual([]);
      expect(report.rowCount).toBe(6);
    }
  });

  it("fails a column-dropped mutant and names the column", () => {
    const report = validateCsv(dropColumn(quartic, "ginf"));
    expect(report.ok).toBe(false);
    expect(report.missing).toEqual(["ginf"]);
    expect(report.problems.join(" ")).toContain("ginf");
  });

  it("fails an empty file with a no-header report", () => {
    for (const text of ["", "   \n", "# just a comment\n"]) {
      const report = validateCsv(text);
      expect(report.ok).toBe(false);
      expect(report.problems).toEqual(["no header"]);
      expect(report.missing).toEqual([...SCHEMA_COLUMNS]);
    }
  });

  it("reports extra columns without failing the row parse", () => {
    const withExtra = quartic.replace("N,estimator", "N,estimator,mood").replace(/^(\d.*)$/gm, "$1,ok");
    const report = validateCsv(withExtra);
    expect(report.ok).toBe(false);
    expect(report.extra).toContain("mood");
  });

  it("flags non-numeric cells by row", () => {
    const broken = quartic.replace("3.4620956644974172", "oops");
    const report = validateCsv(broken);
    expect(report.ok).toBe(false);
    expect(report.problems.some((p) => p.includes("non-numeric value"))).toBe(true);
  });
});

describe("parseCsv", () => {
  it("groups rows into one sorted series per estimator", () => {
    const series = parseCsv(quartic);
    expect(series).toHaveLength(1);
    expect(series[0].label).toBe("gncg");
    expect(series[0].rows.map((r) => r.N)).toEqual([4, 8, 16, 32, 64, 128]);
    expect(series[0].ginf).toBeCloseTo(3.1226773067136651, 12);
    expect(series[0].rows.every((r) => r.stderr === 0)).toBe(true);
  });

  it("keeps a limit-only row (N = 0) off the polyline but on the series", () => {
    const text = "N,estimator,value,stderr,abs_err,ginf\n0,ginf,1.5,0,0,1.5\n";
    const series = parseCsv(text);
    expect(series).toHaveLength(1);
    expect(series[0].rows).toHaveLength(0);
    expect(series[0].ginf).toBe(1.5);
  });

  it("throws on schema violations", () => {
    expect(() => parseCsv(dropColumn(quartic, "abs_err"))).toThrow(/abs_err/);
  });
});
