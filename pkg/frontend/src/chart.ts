/** Shared chart frame: margins, linear scales, ticks, axes, legend. */

import { AXIS_STYLE, GRID_STYLE, LABEL_STYLE, PALETTE, Svg, TITLE_STYLE, fmt } from "./svg.js";

export interface Frame {
  svg: Svg;
  x: (v: number) => number;
  y: (v: number) => number;
}

export interface FrameOptions {
  width?: number;
  height?: number;
  title?: string;
  xLabel: string;
  yLabel: string;
  xDomain: [number, number];
  yDomain: [number, number];
  equalAspect?: boolean;
}

const MARGIN = { left: 52, right: 16, top: 30, bottom: 40 };

export function ticks(lo: number, hi: number, count = 6): number[] {
  if (hi <= lo) {
    hi = lo + 1;
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const pick = candidates.find((c) => span / c <= count) ?? 10 * step;
  const start = Math.ceil(lo / pick) * pick;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9; v += pick) {
    out.push(Number(v.toFixed(9)));
  }
  return out;
}

export function pad(domain: [number, number], frac = 0.05): [number, number] {
  const span = domain[1] - domain[0] || 1;
  return [domain[0] - frac * span, domain[1] + frac * span];
}

export function frame(opts: FrameOptions): Frame {
  const width = opts.width ?? 640;
  const height = opts.height ?? 420;
  const svg = new Svg(width, height);
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  let [x0, x1] = opts.xDomain;
  let [y0, y1] = opts.yDomain;
  if (opts.equalAspect) {
    // widen the narrow axis so one data unit spans equal pixels on both
    const xSpan = x1 - x0 || 1;
    const ySpan = y1 - y0 || 1;
    const unit = Math.max(xSpan / plotW, ySpan / plotH);
    const xPad = (unit * plotW - xSpan) / 2;
    const yPad = (unit * plotH - ySpan) / 2;
    x0 -= xPad;
    x1 += xPad;
    y0 -= yPad;
    y1 += yPad;
  }
  const x = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0)) * plotW;
  const y = (v: number) => MARGIN.top + plotH - ((v - y0) / (y1 - y0)) * plotH;

  for (const tx of ticks(x0, x1)) {
    svg.line(x(tx), MARGIN.top, x(tx), MARGIN.top + plotH, GRID_STYLE);
    svg.text(x(tx) - 8, MARGIN.top + plotH + 16, trimTick(tx), LABEL_STYLE);
  }
  for (const ty of ticks(y0, y1)) {
    svg.line(MARGIN.left, y(ty), MARGIN.left + plotW, y(ty), GRID_STYLE);
    svg.text(8, y(ty) + 4, trimTick(ty), LABEL_STYLE);
  }
  svg.line(MARGIN.left, MARGIN.top + plotH, MARGIN.left + plotW, MARGIN.top + plotH, AXIS_STYLE);
  svg.line(MARGIN.left, MARGIN.top, MARGIN.left, MARGIN.top + plotH, AXIS_STYLE);
  svg.text(width / 2 - 30, height - 8, opts.xLabel, LABEL_STYLE);
  svg.text(8, MARGIN.top - 12, opts.yLabel, LABEL_STYLE);
  if (opts.title) {
    svg.text(MARGIN.left, 16, opts.title, TITLE_STYLE);
  }
  return { svg, x, y };
}

function trimTick(v: number): string {
  const s = fmt(v);
  return s.replace(/\.?0+$/, "") || "0";
}

export function legend(f: Frame, entries: Array<{ label: string; color: string }>): void {
  entries.forEach((entry, i) => {
    const yPos = MARGIN.top + 14 + 16 * i;
    const xPos = f.svg.width - 150;
    f.svg.line(xPos, yPos - 4, xPos + 18, yPos - 4, `stroke:${entry.color};stroke-width:2`);
    f.svg.text(xPos + 24, yPos, entry.label, LABEL_STYLE);
  });
}

export function seriesColor(i: number): string {
  return PALETTE[i % PALETTE.length];
}
