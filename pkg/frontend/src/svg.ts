// Minimal deterministic SVG scene builder: fixed fonts, no timestamps, so
// identical inputs render byte-identical files.

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export type Scale = (v: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const lin = linearScale(l0, l1, r0, r1);
  return (v) => lin(Math.log10(v));
}

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  return Number(v.toFixed(3)).toString();
}

export function niceTicks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const start = Math.ceil(lo / s) * s;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += s) ticks.push(Number(v.toPrecision(12)));
  return ticks;
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

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#444", width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}" opacity="${opacity}"/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ""): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  text(x: number, y: number, s: string, size = 11, anchor = "start", fill = "#222"): void {
    const esc = s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" font-family="Helvetica,Arial,sans-serif" text-anchor="${anchor}" fill="${fill}">${esc}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>` +
      this.parts.join("") +
      `</svg>`
    );
  }
}

export function drawAxes(
  svg: Svg,
  m: Margins,
  xTicks: Array<[number, string]>,
  yTicks: Array<[number, string]>,
  sx: Scale,
  sy: Scale,
  xLabel: string,
  yLabel: string,
): void {
  const x0 = m.left;
  const x1 = svg.width - m.right;
  const y0 = svg.height - m.bottom;
  const y1 = m.top;
  svg.line(x0, y0, x1, y0);
  svg.line(x0, y0, x0, y1);
  for (const [v, label] of xTicks) {
    const px = sx(v);
    svg.line(px, y0, px, y0 + 4);
    svg.text(px, y0 + 16, label, 10, "middle");
  }
  for (const [v, label] of yTicks) {
    const py = sy(v);
    svg.line(x0 - 4, py, x0, py);
    svg.text(x0 - 6, py + 3, label, 10, "end");
    svg.line(x0, py, x1, py, "#eee", 0.6);
  }
  svg.text((x0 + x1) / 2, svg.height - 6, xLabel, 11, "middle");
  svg.text(12, y1 - 6, yLabel, 11, "start");
}
