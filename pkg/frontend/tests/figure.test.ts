import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parseCsv } from "../src/csv.js";
import { render } from "../src/figure.js";

const FIXTURES = join(__dirname, "fixtures");
const quartic = parseCsv(readFileSync(join(FIXTURES, "quartic_study.csv"), "utf8"));
const harmonic = parseCsv(readFileSync(join(FIXTURES, "harmonic_validation.csv"), "utf8"));

// hand-built sampled output: positive stderr buys the confidence band
const SAMPLED = parseCsv(
  [
    "N,estimator,value,stderr,abs_err,ginf",
    "4,gn-sample,0.851,0.004,0.0047,0.8466",
    "8,gn-sample,0.848,0.003,0.0011,0.8466",
    "16,gn-sample,0.847,0.002,0.0005,0.8466",
    "",
  ].join("\n"),
);

describe("value figure", () => {
  it("draws a line, markers, and a limit line per series", () => {
    const svg = render({ kind: "value", series: quartic });
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg).toContain("<polyline");
    expect((svg.match(/<circle/g) ?? []).length).toBe(6);
    expect(svg).toContain('stroke-dasharray="6,4"'); // the G_inf line
    expect(svg).toContain(">gncg<");
    expect(svg).toContain(">limit<");
  });

  it("adds a 2-stderr band only when stderr is positive", () => {
    expect(render({ kind: "value", series: quartic })).not.toContain("<polygon");
    expect(render({ kind: "value", series: SAMPLED })).toContain("<polygon");
  });

  it("survives a single-row input with one marker and no band", () => {
    const one = parseCsv("N,estimator,value,stderr,abs_err,ginf\n4,gncg,3.46,0,0.34,3.12\n");
    const svg = render({ kind: "value", series: one });
    expect((svg.match(/<circle/g) ?? []).length).toBe(1);
    expect(svg).not.toContain("<polyline");
    expect(svg).not.toContain("<polygon");
  });
});

describe("log-log error figure", () => {
  it("plots abs_err per series and honors the slope guide toggle", () => {
    const plain = render({ kind: "loglog-error", series: quartic });
    const guided = render({ kind: "loglog-error", series: quartic, guide: true });
    expect(plain).not.toContain(">1/N<");
    expect(guided).toContain(">1/N<");
    expect(guided).toContain('stroke-dasharray="7,4"');
    expect((guided.match(/<circle/g) ?? []).length).toBe(6);
  });

  it("the harmonic validation errors run parallel to the guide", () => {
    // both endpoints of the guide and of the data span close to the same
    // ratio; a crude parallelism check that fails if the axes are wrong
    const rows = harmonic[0].rows;
    const dataDrop = rows[0].absErr / rows[rows.length - 1].absErr;
    const guideDrop = rows[rows.length - 1].N / rows[0].N;
    expect(Math.abs(Math.log(dataDrop / guideDrop))).toBeLessThan(0.35);
    expect(render({ kind: "loglog-error", series: harmonic, guide: true })).toContain("<polyline");
  });

  it("drops zero-error points instead of breaking the log axis", () => {
    const withZero = parseCsv(
      "N,estimator,value,stderr,abs_err,ginf\n4,gncg,3.46,0,0.34,3.12\n8,gncg,3.12,0,0,3.12\n",
    );
    const svg = render({ kind: "loglog-error", series: withZero });
    expect((svg.match(/<circle/g) ?? []).length).toBe(1);
    expect(svg).not.toContain("NaN");
  });
});

describe("determinism and errors", () => {
  it("same input, same bytes", () => {
    for (const kind of ["value", "loglog-error"] as const) {
      const a = render({ kind, series: quartic, guide: true });
      const b = render({ kind, series: quartic, guide: true });
      expect(a).toBe(b);
    }
  });

  it("rejects empty input", () => {
    expect(() => render({ kind: "value", series: [] })).toThrow(/empty input/);
  });

  it("never emits NaN coordinates", () => {
    for (const kind of ["value", "loglog-error"] as const) {
      for (const series of [quartic, harmonic, SAMPLED]) {
        expect(render({ kind, series, guide: true })).not.toContain("NaN");
      }
    }
  });
});
