/** Deterministic SVG assembly: fixed number formatting, append-order output. */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`cannot format non-finite value ${v}`);
  }
  const s = v.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" style="${style}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" style="${style}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, style: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" style="${style}"/>`);
  }

  polyline(points: Array<[number, number]>, style: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline fill="none" points="${pts}" style="${style}"/>`);
  }

  text(x: number, y: number, content: string, style: string): void {
    const safe = content
      .replace(/&/g, "&amp;")
      .replace(/</g, "&lt;")
      .replace(/>/g, "&gt;");
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" style="${style}">${safe}</text>`);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" style="fill:#ffffff"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

export const PALETTE = ["#1f6fd6", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

export const AXIS_STYLE = "stroke:#222222;stroke-width:1";
export const GRID_STYLE = "stroke:#dddddd;stroke-width:0.5";
export const LABEL_STYLE = "font-family:sans-serif;font-size:11px;fill:#222222";
export const TITLE_STYLE = "font-family:sans-serif;font-size:13px;fill:#000000";
