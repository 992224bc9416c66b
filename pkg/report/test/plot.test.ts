import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { column, MissingColumn, readCsv, TooFewRows } from "../src/csv.js";
import { loglogSlope } from "../src/fit.js";
import { renderFigure } from "../src/plot.js";
import { main } from "../src/cli.js";

const FIX = path.join(__dirname, "fixtures");
const HCONV = path.join(FIX, "cube_hconv_p0.csv");
const ADAPT = path.join(FIX, "ltype_adapt_p0.csv");

function tmpfile(name: string): string {
  return path.join(fs.mkdtempSync(path.join(os.tmpdir(), "report-")), name);
}

describe("convergence figure", () => {
  it("writes an SVG whose slope annotation matches an independent fit", () => {
    const out = tmpfile("conv.svg");
    const svg = renderFigure({ inputs: [HCONV], kind: "conv", x: "h", out });
    fs.writeFileSync(out, svg);
    expect(fs.existsSync(out)).toBe(true);
    const table = readCsv(HCONV);
    const expected = loglogSlope(column(table, "h"), column(table, "err"));
    const m = svg.match(/data-slope="([^"]+)"/);
    expect(m).not.toBeNull();
    expect(Math.abs(Number(m![1]) - expected)).toBeLessThan(1e-12);
    for (const label of ["err", "etae", "etac"]) {
      expect(svg).toContain(`data-curve="${label}"`);
    }
  });

  it("renders adaptive histories against dof counts", () => {
    const svg = renderFigure({
      inputs: [ADAPT], kind: "conv", x: "ndofs", out: "unused.svg",
    });
    expect(svg).toContain('data-curve="err"');
    expect(svg).toContain("N_dofs");
  });
});

describe("effectivity figure", () => {
  it("draws both reference lines at 1 and sqrt(6)", () => {
    const svg = renderFigure({
      inputs: [ADAPT], kind: "eff", x: "ndofs", out: "unused.svg",
    });
    expect(svg).toContain('data-refline="1"');
    expect(svg).toContain('data-refline="sqrt(6)"');
    expect(svg).toContain('data-curve="eff_edge"');
    expect(svg).toContain('data-curve="eff_cell"');
  });
});

describe("error paths", () => {
  it("raises TooFewRows on an empty csv", () => {
    const p = tmpfile("empty.csv");
    fs.writeFileSync(p, "h,p,err\n");
    expect(() => renderFigure({ inputs: [p], kind: "conv", x: "h", out: "x" }))
      .toThrow(TooFewRows);
  });

  it("raises MissingColumn when a curve is absent", () => {
    const p = tmpfile("nocol.csv");
    fs.writeFileSync(p, "h,p\n1,0\n0.5,0\n");
    expect(() => renderFigure({ inputs: [p], kind: "conv", x: "h", out: "x" }))
      .toThrow(MissingColumn);
  });
});

describe("cli", () => {
  it("produces files for both archetypes and exits 0", () => {
    const conv = tmpfile("c.svg");
    expect(main([HCONV, "--kind", "conv", "--x", "h", "--out", conv])).toBe(0);
    expect(fs.existsSync(conv)).toBe(true);
    const eff = tmpfile("e.svg");
    expect(main([ADAPT, "--kind", "eff", "--x", "ndofs", "--out", eff])).toBe(0);
    expect(fs.readFileSync(eff, "utf8")).toContain("data-refline");
  });

  it("exits 2 on schema errors", () => {
    const p = tmpfile("bad.csv");
    fs.writeFileSync(p, "h\n1\n2\n");
    expect(main([p, "--kind", "conv", "--x", "h", "--out", tmpfile("o.svg")]))
      .toBe(2);
  });
});
