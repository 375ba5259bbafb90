// Log-log W1 convergence-rate figure: points with error bars, fitted line,
// dashed reference slope.
import { readFileSync } from "node:fs";
import { Table, numericColumn } from "../csv.js";
import { linearFit } from "../stats.js";
import { Svg, drawAxes, logScale } from "../svg.js";

export interface RateOptions {
  fitJson?: string; // manifest-recorded fit; recomputed for display if absent
}

export function renderRate(table: Table, opts: RateOptions): string {
  const ns = numericColumn(table, "N", "rate figure");
  const means = numericColumn(table, "mean_w1", "rate figure");
  const ses = numericColumn(table, "se", "rate figure");
  if (ns.length < 3) throw new Error("rate figure needs at least 3 rows");

  let slope: number;
  let intercept: number;
  let d = 1;
  if (opts.fitJson) {
    const doc = JSON.parse(readFileSync(opts.fitJson, "utf8"));
    slope = doc.fit.slope;
    intercept = doc.fit.intercept;
    d = doc.d ?? 1;
  } else {
    const fit = linearFit(ns.map(Math.log), means.map(Math.log));
    slope = fit.slope;
    intercept = fit.intercept;
  }
  const refSlope = d === 1 ? -0.5 : -1 / d;
  const refLabel = d === 1 ? "-1/2" : `-1/${d}`;

  const w = 560;
  const h = 400;
  const m = { top: 40, right: 30, bottom: 46, left: 62 };
  const svg = new Svg(w, h);
  const xLo = Math.min(...ns) / 1.5;
  const xHi = Math.max(...ns) * 1.5;
  const yVals = means.flatMap((v, i) => [v - ses[i], v + ses[i]]).filter((v) => v > 0);
  const yLo = Math.min(...yVals) / 1.6;
  const yHi = Math.max(...yVals) * 1.6;
  const sx = logScale(xLo, xHi, m.left, w - m.right);
  const sy = logScale(yLo, yHi, h - m.bottom, m.top);

  const xTicks = ns.map((n) => [n, String(n)] as [number, string]);
  const decades: Array<[number, string]> = [];
  for (let e = Math.ceil(Math.log10(yLo)); e <= Math.floor(Math.log10(yHi)); e++) {
    decades.push([Math.pow(10, e), `1e${e}`]);
  }
  drawAxes(svg, m, xTicks, decades, sx, sy, "N (log)", "mean W1 (log)");

  // fitted line across the data span
  const fitted = (n: number) => Math.exp(intercept + slope * Math.log(n));
  svg.polyline(
    [
      [sx(xLo), sy(fitted(xLo))],
      [sx(xHi), sy(fitted(xHi))],
    ],
    "#c0392b",
    1.6,
  );
  // dashed reference through the first point
  const anchor = means[0];
  const ref = (n: number) => anchor * Math.pow(n / ns[0], refSlope);
  svg.polyline(
    [
      [sx(xLo), sy(ref(xLo))],
      [sx(xHi), sy(ref(xHi))],
    ],
    "#555",
    1.2,
    "6,4",
  );
  for (let i = 0; i < ns.length; i++) {
    const px = sx(ns[i]);
    svg.line(px, sy(means[i] + ses[i]), px, sy(Math.max(means[i] - ses[i], yLo)), "#2c3e50", 1.2);
    svg.circle(px, sy(means[i]), 3.5, "#2c3e50");
  }
  svg.text(m.left, 18, `W1 rate: fitted slope ${slope.toFixed(3)}`, 13);
  svg.text(m.left, 32, `dashed reference slope ${refLabel}`, 11, "start", "#555");
  return svg.render();
}
