// Fluctuation-projection histogram with a Gaussian overlay from the sample
// moments and, for two-source files, the SPDE sample as a step outline plus
// the two-sample KS verdict in the caption.
import { Table, columnIndex } from "../csv.js";
import { gaussianPdf, histogram, ksTwoSample, mean, variance } from "../stats.js";
import { Svg, drawAxes, linearScale, niceTicks } from "../svg.js";

export interface HistOptions {
  phi: string;
  state: string;
  t: number;
}

function messageSvg(lines: string[]): string {
  const svg = new Svg(560, 120);
  lines.forEach((l, i) => svg.text(20, 40 + 22 * i, l, 13));
  return svg.render();
}

export function renderHist(table: Table, opts: HistOptions): string {
  const iState = columnIndex(table, "state", "fluctuation histogram");
  const iPhi = columnIndex(table, "phi_id", "fluctuation histogram");
  const iT = columnIndex(table, "t", "fluctuation histogram");
  const iEta = columnIndex(table, "eta", "fluctuation histogram");
  const iSource = table.header.indexOf("source");

  const groups = new Map<string, number[]>();
  for (const row of table.rows) {
    if (row[iState] !== opts.state || row[iPhi] !== opts.phi) continue;
    if (Math.abs(Number(row[iT]) - opts.t) > 1e-9 * Math.max(1, opts.t)) continue;
    const src = iSource >= 0 ? row[iSource] : "particle";
    if (!groups.has(src)) groups.set(src, []);
    groups.get(src)!.push(Number(row[iEta]));
  }
  const particle = groups.get("particle") ?? [];
  if (particle.length === 0) {
    throw new Error(
      `empty selection: no rows for state=${opts.state} phi=${opts.phi} t=${opts.t}`,
    );
  }
  if (particle.length < 100) {
    throw new Error(`selection too small (${particle.length} rows, need >= 100)`);
  }
  const mu = mean(particle);
  const sd = Math.sqrt(variance(particle));
  if (!(sd > 0)) {
    return messageSvg([
      "degenerate sample: zero variance",
      `state=${opts.state} phi=${opts.phi} t=${opts.t}, n=${particle.length}, mean=${mu.toFixed(6)}`,
    ]);
  }

  const spde = groups.get("spde") ?? [];
  const w = 560;
  const h = 400;
  const m = { top: 46, right: 24, bottom: 46, left: 56 };
  const svg = new Svg(w, h);
  const all = spde.length ? particle.concat(spde) : particle;
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const bins = histogram(particle, 30);
  const width = bins[0].hi - bins[0].lo;
  const density = bins.map((b) => b.count / (particle.length * width));
  let yMax = Math.max(...density, gaussianPdf(mu, mu, sd));

  let spdeDensity: number[] = [];
  let spdeBins: ReturnType<typeof histogram> = [];
  if (spde.length) {
    spdeBins = histogram(spde, 30);
    const sw = spdeBins[0].hi - spdeBins[0].lo;
    spdeDensity = spdeBins.map((b) => b.count / (spde.length * sw));
    yMax = Math.max(yMax, ...spdeDensity);
  }

  const sx = linearScale(lo, hi, m.left, w - m.right);
  const sy = linearScale(0, yMax * 1.12, h - m.bottom, m.top);
  const xT = niceTicks(lo, hi).map((v) => [v, String(v)] as [number, string]);
  const yT = niceTicks(0, yMax * 1.12, 4).map((v) => [v, v.toFixed(2)] as [number, string]);
  drawAxes(svg, m, xT, yT, sx, sy, "eta projection", "density");

  for (let k = 0; k < bins.length; k++) {
    const x = sx(bins[k].lo);
    const x2 = sx(bins[k].hi);
    svg.rect(x, sy(density[k]), x2 - x, sy(0) - sy(density[k]), "#6baed6", 0.75);
  }
  if (spde.length) {
    const steps: Array<[number, number]> = [];
    for (let k = 0; k < spdeBins.length; k++) {
      steps.push([sx(spdeBins[k].lo), sy(spdeDensity[k])]);
      steps.push([sx(spdeBins[k].hi), sy(spdeDensity[k])]);
    }
    svg.polyline(steps, "#e6550d", 1.8);
  }
  const curve: Array<[number, number]> = [];
  for (let k = 0; k <= 160; k++) {
    const x = lo + ((hi - lo) * k) / 160;
    curve.push([sx(x), sy(gaussianPdf(x, mu, sd))]);
  }
  svg.polyline(curve, "#2c3e50", 1.6);

  svg.text(m.left, 18, `state ${opts.state}, phi ${opts.phi}, t = ${opts.t}`, 13);
  if (spde.length) {
    const ks = ksTwoSample(particle, spde);
    svg.text(
      m.left, 34,
      `particle n=${particle.length} vs spde n=${spde.length}: KS ${ks.statistic.toFixed(4)}, p ${ks.pValue.toFixed(4)}`,
      11, "start", "#555",
    );
    svg.rect(w - 170, 24, 10, 10, "#6baed6", 0.75);
    svg.text(w - 155, 33, "particle", 10);
    svg.line(w - 170, 48, w - 160, 48, "#e6550d", 1.8);
    svg.text(w - 155, 51, "spde", 10);
  } else {
    const ks = ksTwoSample(
      particle,
      particle.map((_, i) => mu + sd * gaussianQuantile((i + 0.5) / particle.length)),
    );
    svg.text(
      m.left, 34,
      `n=${particle.length}, mean ${mu.toFixed(3)}, sd ${sd.toFixed(3)}, normal-screen KS ${ks.statistic.toFixed(4)}`,
      11, "start", "#555",
    );
  }
  return svg.render();
}

// Acklam's rational approximation of the standard normal quantile.
function gaussianQuantile(p: number): number {
  const a = [-39.6968302866538, 220.946098424521, -275.928510446969,
             138.357751867269, -30.6647980661472, 2.50662827745924];
  const b = [-54.4760987982241, 161.585836858041, -155.698979859887,
             66.8013118877197, -13.2806815528857];
  const c = [-0.00778489400243029, -0.322396458041136, -2.40075827716184,
             -2.54973253934373, 4.37466414146497, 2.93816398269878];
  const d = [0.00778469570904146, 0.32246712907004, 2.445134137143, 3.75440866190742];
  const pl = 0.02425;
  if (p < pl) {
    const q = Math.sqrt(-2 * Math.log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
      ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p <= 1 - pl) {
    const q = p - 0.5;
    const r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
      (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const q = Math.sqrt(-2 * Math.log(1 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
    ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
}
