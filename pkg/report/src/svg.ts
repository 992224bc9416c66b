/** Tiny static-SVG scene builder: enough for log-log convergence figures. */

export type ScaleKind = "linear" | "log";

export interface Scale {
  kind: ScaleKind;
  domain: [number, number];
  range: [number, number];
}

export function makeScale(kind: ScaleKind, values: number[],
                          range: [number, number], pad = 0.06): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (kind === "log") {
    lo = Math.log10(lo);
    hi = Math.log10(hi);
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const span = hi - lo;
  return { kind, domain: [lo - pad * span, hi + pad * span], range };
}

export function apply(s: Scale, v: number): number {
  const t = s.kind === "log" ? Math.log10(v) : v;
  const f = (t - s.domain[0]) / (s.domain[1] - s.domain[0]);
  return s.range[0] + f * (s.range[1] - s.range[0]);
}

export function ticks(s: Scale, count = 5): number[] {
  const [lo, hi] = s.domain;
  if (s.kind === "log") {
    const out: number[] = [];
    for (let e = Math.ceil(lo); e <= Math.floor(hi); e++) out.push(10 ** e);
    if (out.length >= 2) return out;
    // fewer than two decades: fall back to 1-2-5 mantissas
    const fine: number[] = [];
    for (let e = Math.floor(lo) - 1; e <= Math.ceil(hi); e++) {
      for (const m of [1, 2, 5]) {
        const v = m * 10 ** e;
        const t = Math.log10(v);
        if (t >= lo && t <= hi) fine.push(v);
      }
    }
    return fine;
  }
  const step = niceStep((hi - lo) / count);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12; v += step) {
    out.push(Math.abs(v) < 1e-12 ? 0 : v);
  }
  return out;
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(raw));
  const r = raw / mag;
  return (r < 1.5 ? 1 : r < 3.5 ? 2 : r < 7.5 ? 5 : 10) * mag;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return String(parseFloat(v.toPrecision(4)));
  }
  return v.toExponential(0).replace("+", "");
}

export const MARKERS = ["triangle", "circle", "square"] as const;
export type Marker = (typeof MARKERS)[number];

export class Figure {
  width: number;
  height: number;
  margin = { left: 62, right: 14, top: 16, bottom: 44 };
  private parts: string[] = [];

  constructor(width = 480, height = 360) {
    this.width = width;
    this.height = height;
  }

  plotRange(): { x: [number, number]; y: [number, number] } {
    return {
      x: [this.margin.left, this.width - this.margin.right],
      y: [this.height - this.margin.bottom, this.margin.top],
    };
  }

  axes(xs: Scale, ys: Scale, xlabel: string, ylabel: string): void {
    const { x: xr, y: yr } = this.plotRange();
    this.parts.push(
      `<rect x="${xr[0]}" y="${yr[1]}" width="${xr[1] - xr[0]}" ` +
      `height="${yr[0] - yr[1]}" fill="none" stroke="black" stroke-width="1"/>`);
    for (const t of ticks(xs)) {
      const px = apply(xs, t);
      this.parts.push(`<line x1="${px}" y1="${yr[0]}" x2="${px}" y2="${yr[0] + 4}" stroke="black"/>`);
      this.parts.push(`<text x="${px}" y="${yr[0] + 16}" font-size="10" text-anchor="middle">${fmt(t)}</text>`);
    }
    for (const t of ticks(ys)) {
      const py = apply(ys, t);
      this.parts.push(`<line x1="${xr[0] - 4}" y1="${py}" x2="${xr[0]}" y2="${py}" stroke="black"/>`);
      this.parts.push(`<text x="${xr[0] - 6}" y="${py + 3}" font-size="10" text-anchor="end">${fmt(t)}</text>`);
    }
    const cx = (xr[0] + xr[1]) / 2;
    this.parts.push(`<text x="${cx}" y="${this.height - 8}" font-size="12" text-anchor="middle">${xlabel}</text>`);
    const cy = (yr[0] + yr[1]) / 2;
    this.parts.push(
      `<text x="14" y="${cy}" font-size="12" text-anchor="middle" ` +
      `transform="rotate(-90 14 ${cy})">${ylabel}</text>`);
  }

  curve(xs: Scale, ys: Scale, x: number[], y: number[], color: string,
        dash: string, marker: Marker, label: string): void {
    const pts = x.map((v, i) => [apply(xs, v), apply(ys, y[i])]);
    const path = pts.map((p) => p.map((c) => c.toFixed(2)).join(",")).join(" ");
    const dashattr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${path}" fill="none" stroke="${color}" ` +
      `stroke-width="1.5"${dashattr} data-curve="${label}"/>`);
    for (const [px, py] of pts) {
      this.parts.push(markerShape(marker, px, py, color));
    }
  }

  hline(ys: Scale, value: number, label: string): void {
    const { x: xr } = this.plotRange();
    const py = apply(ys, value);
    this.parts.push(
      `<line x1="${xr[0]}" y1="${py}" x2="${xr[1]}" y2="${py}" stroke="black" ` +
      `stroke-width="0.8" data-refline="${label}"/>`);
    this.parts.push(`<text x="${xr[1] - 4}" y="${py - 3}" font-size="10" text-anchor="end">${label}</text>`);
  }

  annotation(text: string, attrs = ""): void {
    const { x: xr, y: yr } = this.plotRange();
    this.parts.push(
      `<text x="${xr[0] + 8}" y="${yr[1] + 14}" font-size="11"${attrs}>${text}</text>`);
  }

  legend(entries: Array<{ label: string; color: string; dash: string; marker: Marker }>): void {
    const { x: xr, y: yr } = this.plotRange();
    let y = yr[0] - 10 - 14 * entries.length;
    for (const e of entries) {
      const x0 = xr[1] - 150;
      const dashattr = e.dash ? ` stroke-dasharray="${e.dash}"` : "";
      this.parts.push(`<line x1="${x0}" y1="${y}" x2="${x0 + 26}" y2="${y}" stroke="${e.color}" stroke-width="1.5"${dashattr}/>`);
      this.parts.push(markerShape(e.marker, x0 + 13, y, e.color));
      this.parts.push(`<text x="${x0 + 32}" y="${y + 3}" font-size="10">${e.label}</text>`);
      y += 14;
    }
  }

  render(): string {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="100%" height="100%" fill="white"/>\n` +
      this.parts.join("\n") + "\n</svg>\n";
  }
}

function markerShape(marker: Marker, x: number, y: number, color: string): string {
  const r = 3;
  if (marker === "circle") {
    return `<circle cx="${x}" cy="${y}" r="${r}" fill="${color}"/>`;
  }
  if (marker === "square") {
    return `<rect x="${x - r}" y="${y - r}" width="${2 * r}" height="${2 * r}" fill="${color}"/>`;
  }
  const p = [[x, y - r], [x - r, y + r], [x + r, y + r]]
    .map((q) => q.join(",")).join(" ");
  return `<polygon points="${p}" fill="${color}"/>`;
}
