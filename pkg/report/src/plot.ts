import * as path from "path";

import { column, readCsv, Table, TooFewRows } from "./csv.js";
import { loglogSlope, semilogSlope } from "./fit.js";
import { Figure, makeScale, Marker } from "./svg.js";

export type Kind = "conv" | "eff";
export type XAxis = "h" | "p" | "ndofs";

export interface FigureSpec {
  inputs: string[];
  kind: Kind;
  x: XAxis;
  out: string;
}

const SQRT6 = Math.sqrt(6);

const X_COLUMN: Record<XAxis, string> = { h: "h", p: "p", ndofs: "nr_dofs" };

interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash: string;
  marker: Marker;
}

function seriesFor(kind: Kind, table: Table, xcol: string, tag: string,
                   file: string): Series[] {
  const x = column(table, xcol, file);
  if (kind === "conv") {
    return [
      { label: `err${tag}`, x, y: column(table, "err", file),
        color: "black", dash: "", marker: "triangle" },
      { label: `etae${tag}`, x, y: column(table, "etae", file),
        color: "blue", dash: "2,3", marker: "circle" },
      { label: `etac${tag}`, x, y: column(table, "etac", file),
        color: "red", dash: "7,3", marker: "square" },
    ];
  }
  return [
    { label: `eff_edge${tag}`, x, y: column(table, "eff_edge", file),
      color: "blue", dash: "2,3", marker: "circle" },
    { label: `eff_cell${tag}`, x, y: column(table, "eff_cell", file),
      color: "red", dash: "7,3", marker: "square" },
  ];
}

/** Render one figure; returns the SVG text (also what gets written). */
export function renderFigure(spec: FigureSpec): string {
  const xcol = X_COLUMN[spec.x];
  const series: Series[] = [];
  let errSlope: number | null = null;
  for (const file of spec.inputs) {
    const table = readCsv(file);
    if (table.rows.length < 2) {
      throw new TooFewRows(`${file}: need at least 2 rows, got ${table.rows.length}`);
    }
    const tag = spec.inputs.length > 1
      ? ` (${path.basename(file).replace(/\.csv$/, "")})` : "";
    const got = seriesFor(spec.kind, table, xcol, tag, file);
    if (spec.kind === "conv" && errSlope === null) {
      const x = got[0].x;
      const y = got[0].y;
      errSlope = spec.x === "p" ? semilogSlope(x, y) : loglogSlope(x, y);
    }
    series.push(...got);
  }

  const fig = new Figure();
  const range = fig.plotRange();
  const allX = series.flatMap((s) => s.x);
  const allY = series.flatMap((s) => s.y);
  const xKind = spec.x === "p" ? "linear" : "log";
  const xs = makeScale(xKind, allX, range.x);
  if (spec.kind === "conv") {
    const ys = makeScale("log", allY.filter((v) => v > 0), range.y);
    fig.axes(xs, ys, spec.x === "ndofs" ? "N_dofs" : spec.x, "Error and estimators");
    for (const s of series) {
      fig.curve(xs, ys, s.x, s.y, s.color, s.dash, s.marker, s.label);
    }
    const kindLabel = spec.x === "p" ? "semilog slope" : "log-log slope";
    fig.annotation(`${kindLabel} of err: ${errSlope!.toFixed(3)}`,
                   ` data-slope="${errSlope}"`);
  } else {
    const ys = makeScale("linear", [0, ...allY, SQRT6 * 1.2], range.y, 0.02);
    fig.axes(xs, ys, spec.x === "ndofs" ? "N_dofs" : spec.x, "Effectivity indices");
    fig.hline(ys, 1.0, "1");
    fig.hline(ys, SQRT6, "sqrt(6)");
    for (const s of series) {
      fig.curve(xs, ys, s.x, s.y, s.color, s.dash, s.marker, s.label);
    }
  }
  fig.legend(series.map(({ label, color, dash, marker }) =>
    ({ label, color, dash, marker })));
  return fig.render();
}
