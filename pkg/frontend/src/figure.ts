import type { Series } from "./csv.js";

export type FigureKind = "value" | "loglog-error";

export interface FigureSpec {
  kind: FigureKind;
  series: Series[];
  /** draw the reference 1/N slope on the log-log figure */
  guide?: boolean;
}

// fixed geometry keeps output byte-identical across runs
const WIDTH = 720;
const HEIGHT = 460;
const MARGIN = { left: 78, right: 150, top: 28, bottom: 56 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const FONT = 'font-family="Helvetica, Arial, sans-serif"';

const plotW = WIDTH - MARGIN.left - MARGIN.right;
const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;

function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  if (x === Math.trunc(x) && Math.abs(x) < 1e7) return String(x);
  return String(parseFloat(x.toPrecision(6)));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function padDomain(lo: number, hi: number): [number, number] {
  if (lo === hi) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.2 : 1;
    return [lo - pad, hi + pad];
  }
  const pad = (hi - lo) * 0.06;
  return [lo - pad, hi + pad];
}

function linearScale(lo: number, hi: number, r0: number, r1: number): Scale {
  [lo, hi] = padDomain(lo, hi);
  const f = ((v: number) => r0 + ((v - lo) / (hi - lo)) * (r1 - r0)) as Scale;
  const rawStep = (hi - lo) / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  f.ticks = ticks;
  return f;
}

function logScale(lo: number, hi: number, r0: number, r1: number): Scale {
  if (lo === hi) {
    lo /= 10;
    hi *= 10;
  }
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const f = ((v: number) => r0 + ((Math.log10(v) - llo) / (lhi - llo)) * (r1 - r0)) as Scale;
  const ticks: number[] = [];
  for (let d = Math.ceil(llo - 1e-9); d <= lhi + 1e-9; d += 1) ticks.push(Math.pow(10, d));
  if (ticks.length < 2) {
    // span under a decade: fall back to 1-2-5 mantissa ticks
    for (const m of [2, 5]) {
      for (let d = Math.floor(llo) - 1; d <= Math.ceil(lhi); d += 1) {
        const t = m * Math.pow(10, d);
        if (t >= lo && t <= hi) ticks.push(t);
      }
    }
    ticks.sort((a, b) => a - b);
  }
  f.ticks = ticks;
  return f;
}

function axes(x: Scale, y: Scale, xLabel: string, yLabel: string, logX: boolean): string[] {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = MARGIN.left + plotW;
  const y0 = MARGIN.top + plotH;
  const y1 = MARGIN.top;
  parts.push(`<g stroke="#333" fill="none">`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}"/>`);
  parts.push(`</g>`);
  for (const t of x.ticks) {
    const px = fmt(x(t));
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="#333"/>`);
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y1}" stroke="#ddd" stroke-dasharray="2,4"/>`);
    const label = logX ? (t >= 1 ? fmt(t) : `1e${Math.round(Math.log10(t))}`) : fmt(t);
    parts.push(
      `<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-size="12" ${FONT}>${label}</text>`,
    );
  }
  for (const t of y.ticks) {
    const py = fmt(y(t));
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="#333"/>`);
    parts.push(`<line x1="${x0}" y1="${py}" x2="${x1}" y2="${py}" stroke="#ddd" stroke-dasharray="2,4"/>`);
    const label = Math.abs(t) !== 0 && (Math.abs(t) < 1e-3 || Math.abs(t) >= 1e5)
      ? t.toExponential(0).replace("+", "")
      : fmt(t);
    parts.push(
      `<text x="${x0 - 9}" y="${fmt(y(t) + 4)}" text-anchor="end" font-size="12" ${FONT}>${label}</text>`,
    );
  }
  parts.push(
    `<text x="${fmt(x0 + plotW / 2)}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13" ${FONT}>${esc(xLabel)}</text>`,
  );
  parts.push(
    `<text x="18" y="${fmt(y1 + plotH / 2)}" text-anchor="middle" font-size="13" ${FONT} transform="rotate(-90 18 ${fmt(y1 + plotH / 2)})">${esc(yLabel)}</text>`,
  );
  return parts;
}

function legend(labels: string[]): string[] {
  const parts: string[] = [];
  labels.forEach((label, i) => {
    const y = MARGIN.top + 14 + i * 20;
    const x = MARGIN.left + plotW + 14;
    parts.push(`<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`);
    parts.push(`<text x="${x + 28}" y="${y}" font-size="12" ${FONT}>${esc(label)}</text>`);
  });
  return parts;
}

function svgDoc(body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    ...body,
    `</svg>`,
    ``,
  ].join("\n");
}

function renderValue(series: Series[]): string {
  const xs = series.flatMap((s) => s.rows.map((r) => r.N));
  const ys = series.flatMap((s) => [
    ...s.rows.map((r) => r.value + 2 * r.stderr),
    ...s.rows.map((r) => r.value - 2 * r.stderr),
    s.ginf,
  ]);
  const x = linearScale(Math.min(...xs, 0), Math.max(...xs), MARGIN.left, MARGIN.left + plotW);
  const y = linearScale(Math.min(...ys), Math.max(...ys), MARGIN.top + plotH, MARGIN.top);

  const parts = axes(x, y, "N", "free energy", false);
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const banded = s.rows.filter((r) => r.stderr > 0);
    if (banded.length >= 2) {
      const upper = banded.map((r) => `${fmt(x(r.N))},${fmt(y(r.value + 2 * r.stderr))}`);
      const lower = banded.map((r) => `${fmt(x(r.N))},${fmt(y(r.value - 2 * r.stderr))}`).reverse();
      parts.push(`<polygon points="${[...upper, ...lower].join(" ")}" fill="${color}" fill-opacity="0.15" stroke="none"/>`);
    }
    const ly = fmt(y(s.ginf));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${ly}" x2="${MARGIN.left + plotW}" y2="${ly}" stroke="${color}" stroke-dasharray="6,4" stroke-width="1"/>`,
    );
    if (s.rows.length >= 2) {
      const pts = s.rows.map((r) => `${fmt(x(r.N))},${fmt(y(r.value))}`).join(" ");
      parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="2"/>`);
    }
    for (const r of s.rows) {
      parts.push(`<circle cx="${fmt(x(r.N))}" cy="${fmt(y(r.value))}" r="3.5" fill="${color}"/>`);
    }
  });
  parts.push(...legend([...series.map((s) => s.label), "limit"]));
  return svgDoc(parts);
}

function renderLogLog(series: Series[], guide: boolean): string {
  // zero error cannot sit on a log axis; drop those points, not the series
  const plotted = series
    .map((s) => ({ ...s, rows: s.rows.filter((r) => r.absErr > 0 && r.N > 0) }))
    .filter((s) => s.rows.length > 0);
  if (plotted.length === 0) {
    return svgDoc([
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle" font-size="14" ${FONT}>no positive errors to plot</text>`,
    ]);
  }
  const xs = plotted.flatMap((s) => s.rows.map((r) => r.N));
  const es = plotted.flatMap((s) => s.rows.map((r) => r.absErr));
  const x = logScale(Math.min(...xs), Math.max(...xs), MARGIN.left, MARGIN.left + plotW);
  const y = logScale(Math.min(...es), Math.max(...es), MARGIN.top + plotH, MARGIN.top);

  const parts = axes(x, y, "N", "|G_N - G_inf|", true);
  if (guide) {
    // anchored through the first point of the first series
    const anchor = plotted[0].rows[0];
    const c = anchor.absErr * anchor.N;
    const nLo = Math.min(...xs);
    const nHi = Math.max(...xs);
    parts.push(
      `<line x1="${fmt(x(nLo))}" y1="${fmt(y(c / nLo))}" x2="${fmt(x(nHi))}" y2="${fmt(y(c / nHi))}" stroke="#888" stroke-dasharray="7,4" stroke-width="1.5"/>`,
    );
    parts.push(
      `<text x="${fmt(x(nHi) + 6)}" y="${fmt(y(c / nHi) + 4)}" font-size="12" fill="#666" ${FONT}>1/N</text>`,
    );
  }
  plotted.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (s.rows.length >= 2) {
      const pts = s.rows.map((r) => `${fmt(x(r.N))},${fmt(y(r.absErr))}`).join(" ");
      parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="2"/>`);
    }
    for (const r of s.rows) {
      parts.push(`<circle cx="${fmt(x(r.N))}" cy="${fmt(y(r.absErr))}" r="3.5" fill="${color}"/>`);
    }
  });
  parts.push(...legend(plotted.map((s) => s.label)));
  return svgDoc(parts);
}

/** Render a figure to an SVG string. Same spec, same bytes. */
export function render(spec: FigureSpec): string {
  if (spec.series.length === 0 || spec.series.every((s) => s.rows.length === 0)) {
    throw new Error("empty input: no data rows to plot");
  }
  if (spec.kind === "value") return renderValue(spec.series);
  if (spec.kind === "loglog-error") return renderLogLog(spec.series, spec.guide ?? false);
  throw new Error(`unknown figure kind: ${String(spec.kind)}`);
}
