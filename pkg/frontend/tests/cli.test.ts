import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "fixtures");
const QUARTIC = join(FIXTURES, "quartic_study.csv");
const tmp = mkdtempSync(join(tmpdir(), "defectfe-plot-"));

describe("defectfe-plot CLI", () => {
  it("renders both kinds from the quartic study CSV", () => {
    for (const kind of ["value", "loglog-error"]) {
      const out = join(tmp, `${kind}.svg`);
      expect(main(["--csv", QUARTIC, "--kind", kind, "--out", out, "--guide"])).toBe(0);
      const svg = readFileSync(out, "utf8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    }
  });

  it("rerunning reproduces the file byte for byte", () => {
    const out1 = join(tmp, "a.svg");
    const out2 = join(tmp, "b.svg");
    main(["--csv", QUARTIC, "--kind", "loglog-error", "--out", out1, "--guide"]);
    main(["--csv", QUARTIC, "--kind", "loglog-error", "--out", out2, "--guide"]);
    expect(readFileSync(out1)).toEqual(readFileSync(out2));
  });

  it("exits 3 on a column-dropped mutant, naming the column", () => {
    const text = readFileSync(QUARTIC, "utf8");
    const lines = text.trimEnd().split("\n");
    const mutant = lines
      .map((l) => (l.startsWith("#") ? l : l.split(",").slice(0, -1).join(",")))
      .join("\n");
    const path = join(tmp, "mutant.csv");
    writeFileSync(path, mutant + "\n");
    expect(main(["--csv", path, "--kind", "value", "--out", join(tmp, "x.svg")])).toBe(3);
  });

  it("exits 2 on usage problems", () => {
    expect(main([])).toBe(2);
    expect(main(["--csv", QUARTIC, "--kind", "pie", "--out", join(tmp, "p.svg")])).toBe(2);
    expect(main(["--csv", join(tmp, "nope.csv"), "--kind", "value", "--out", join(tmp, "n.svg")])).toBe(2);
    expect(main(["--csv", QUARTIC, "--kind", "value", "--out", join(tmp, "z.svg"), "--wat"])).toBe(2);
  });

  it("exits 3 when the CSV parses but has nothing to plot", () => {
    const empty = join(tmp, "headeronly.csv");
    writeFileSync(empty, "N,estimator,value,stderr,abs_err,ginf\n");
    expect(main(["--csv", empty, "--kind", "value", "--out", join(tmp, "e.svg")])).toBe(3);
  });
});
