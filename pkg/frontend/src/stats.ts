// Display statistics: least-squares fits, Gaussian densities and the
// two-sample Kolmogorov-Smirnov verdict shown in figure captions.

export function mean(xs: number[]): number {
  return xs.reduce((s, v) => s + v, 0) / Math.max(1, xs.length);
}

export function variance(xs: number[]): number {
  const m = mean(xs);
  return xs.reduce((s, v) => s + (v - m) * (v - m), 0) / Math.max(1, xs.length - 1);
}

export interface LineFit {
  slope: number;
  intercept: number;
}

export function linearFit(x: number[], y: number[]): LineFit {
  const n = Math.min(x.length, y.length);
  const mx = mean(x.slice(0, n));
  const my = mean(y.slice(0, n));
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

export function gaussianPdf(x: number, mu: number, sigma: number): number {
  const z = (x - mu) / sigma;
  return Math.exp(-0.5 * z * z) / (sigma * Math.sqrt(2 * Math.PI));
}

export interface KsResult {
  statistic: number;
  pValue: number;
}

// Two-sample KS with the asymptotic Kolmogorov tail.
export function ksTwoSample(a: number[], b: number[]): KsResult {
  const sa = [...a].sort((x, y) => x - y);
  const sb = [...b].sort((x, y) => x - y);
  let i = 0;
  let j = 0;
  let d = 0;
  while (i < sa.length && j < sb.length) {
    const va = sa[i];
    const vb = sb[j];
    if (va <= vb) i++;
    if (vb <= va) j++;
    d = Math.max(d, Math.abs(i / sa.length - j / sb.length));
  }
  const en = Math.sqrt((sa.length * sb.length) / (sa.length + sb.length));
  const lam = (en + 0.12 + 0.11 / en) * d;
  if (lam < 0.3) return { statistic: d, pValue: 1 }; // series region of no power
  let p = 0;
  for (let k = 1; k <= 100; k++) {
    p += 2 * Math.pow(-1, k - 1) * Math.exp(-2 * k * k * lam * lam);
  }
  return { statistic: d, pValue: Math.min(1, Math.max(0, p)) };
}

export interface Bin {
  lo: number;
  hi: number;
  count: number;
}

export function histogram(xs: number[], nBins: number): Bin[] {
  const lo = Math.min(...xs);
  const hi = Math.max(...xs);
  const span = hi - lo || 1;
  const bins: Bin[] = Array.from({ length: nBins }, (_, k) => ({
    lo: lo + (span * k) / nBins,
    hi: lo + (span * (k + 1)) / nBins,
    count: 0,
  }));
  for (const x of xs) {
    let k = Math.floor(((x - lo) / span) * nBins);
    if (k >= nBins) k = nBins - 1;
    if (k < 0) k = 0;
    bins[k].count++;
  }
  return bins;
}
