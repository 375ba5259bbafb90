import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { readCsv, columnIndex, SchemaError } from "../src/csv.js";
import { ksTwoSample, linearFit } from "../src/stats.js";
import { renderHist } from "../src/charts/hist.js";
import { renderMasses } from "../src/charts/masses.js";
import { renderQv } from "../src/charts/qv.js";
import { renderRate } from "../src/charts/rate.js";
import { main } from "../src/cli.js";

const dir = mkdtempSync(join(tmpdir(), "plots-"));

function writeCsv(name: string, header: string, rows: string[]): string {
  const p = join(dir, name);
  writeFileSync(p, [header, ...rows].join("\n") + "\n");
  return p;
}

// deterministic pseudo-normals via the sine-skip generator
function pseudoNormal(n: number, shift = 0, scale = 1): number[] {
  const out: number[] = [];
  for (let i = 0; i < n; i++) {
    const u1 = (Math.sin(i * 12.9898 + 78.233) * 43758.5453) % 1;
    const u2 = (Math.sin(i * 39.3468 + 11.135) * 24634.6345) % 1;
    const a = Math.abs(u1) || 0.5;
    const b = Math.abs(u2);
    out.push(shift + scale * Math.sqrt(-2 * Math.log(a)) * Math.cos(2 * Math.PI * b));
  }
  return out;
}

describe("csv", () => {
  it("reports the missing column by name", () => {
    const p = writeCsv("bad.csv", "N,reps,se", ["100,5,0.1"]);
    const table = readCsv(p);
    expect(() => columnIndex(table, "mean_w1", "rate figure")).toThrowError(
      /missing column "mean_w1"/,
    );
  });
});

describe("stats", () => {
  it("fits an exact power law", () => {
    const ns = [100, 400, 1600, 6400];
    const ys = ns.map((n) => 3 * Math.pow(n, -0.5));
    const fit = linearFit(ns.map(Math.log), ys.map(Math.log));
    expect(fit.slope).toBeCloseTo(-0.5, 10);
  });

  it("KS of a sample with itself is zero", () => {
    const xs = pseudoNormal(200);
    const r = ksTwoSample(xs, xs);
    expect(r.statistic).toBe(0);
    expect(r.pValue).toBeCloseTo(1, 3);
  });

  it("KS separates shifted samples", () => {
    const r = ksTwoSample(pseudoNormal(400), pseudoNormal(400, 3));
    expect(r.pValue).toBeLessThan(1e-6);
  });
});

describe("rate figure", () => {
  const rows = [100, 400, 1600, 6400].map(
    (n) => `${n},200,${3 * Math.pow(n, -0.5)},${0.1 * Math.pow(n, -0.5)}`,
  );

  it("renders with fitted slope and the -1/2 reference", () => {
    const p = writeCsv("rate.csv", "N,reps,mean_w1,se", rows);
    const svg = renderRate(readCsv(p), {});
    expect(svg).toContain("slope -0.500");
    expect(svg).toContain("-1/2");
    expect(svg).toContain("<svg");
  });

  it("uses the recorded fit manifest when given", () => {
    const p = writeCsv("rate2.csv", "N,reps,mean_w1,se", rows);
    const fitPath = join(dir, "fit.json");
    writeFileSync(fitPath, JSON.stringify({ fit: { slope: -0.47, intercept: 1.0 }, d: 1 }));
    const svg = renderRate(readCsv(p), { fitJson: fitPath });
    expect(svg).toContain("slope -0.470");
  });

  it("names the missing column", () => {
    const p = writeCsv("rate3.csv", "N,reps,se", ["100,5,0.1", "200,5,0.1", "400,5,0.1"]);
    expect(() => renderRate(readCsv(p), {})).toThrowError(/mean_w1/);
  });
});

describe("fluctuation histogram", () => {
  function sampleRows(source?: string): string[] {
    const rows: string[] = [];
    const xs = pseudoNormal(300);
    const ys = pseudoNormal(300, 0.1);
    for (let i = 0; i < xs.length; i++) {
      rows.push(`${i},S,gh0_wide,2.0,${xs[i]},0.0,0.0` + (source ? ",particle" : ""));
      if (source) rows.push(`${i},S,gh0_wide,2.0,${ys[i]},,,spde`);
    }
    return rows;
  }

  it("renders a single-source histogram with a screen caption", () => {
    const p = writeCsv("fluct.csv", "rep,state,phi_id,t,eta,martingale,qv_formula",
                       sampleRows());
    const svg = renderHist(readCsv(p), { phi: "gh0_wide", state: "S", t: 2.0 });
    expect(svg).toContain("normal-screen KS");
  });

  it("overlays two sources with a KS caption and legend", () => {
    const p = writeCsv("fluct2.csv",
                       "rep,state,phi_id,t,eta,martingale,qv_formula,source",
                       sampleRows("two"));
    const svg = renderHist(readCsv(p), { phi: "gh0_wide", state: "S", t: 2.0 });
    expect(svg).toContain("KS");
    expect(svg).toContain("spde");
    expect(svg).toContain("particle");
  });

  it("degenerate variance yields a message, not a crash", () => {
    const rows = Array.from({ length: 150 }, (_, i) =>
      `${i},I,gh1,1.0,0.25,0.0,0.0`);
    const p = writeCsv("fluct3.csv", "rep,state,phi_id,t,eta,martingale,qv_formula", rows);
    const svg = renderHist(readCsv(p), { phi: "gh1", state: "I", t: 1.0 });
    expect(svg).toContain("degenerate sample: zero variance");
  });

  it("empty selection raises a clear error", () => {
    const p = writeCsv("fluct4.csv", "rep,state,phi_id,t,eta,martingale,qv_formula",
                       sampleRows());
    expect(() => renderHist(readCsv(p), { phi: "nope", state: "S", t: 2.0 }))
      .toThrowError(/empty selection/);
  });
});

describe("masses figure", () => {
  it("renders flat S curve from a no-infection density file", () => {
    const rows: string[] = [];
    for (const t of [0, 0.5, 1.0]) {
      for (let c = 0; c < 8; c++) {
        rows.push(`${t},${-2 + 0.5 * c},${0.225},${0.025},0.0`);
      }
    }
    const p = writeCsv("dens.csv", "t,cell_center,rho_S,rho_I,rho_R", rows);
    const svg = renderMasses(readCsv(p));
    expect(svg).toContain("channel masses");
  });

  it("accepts trajectory schema", () => {
    const rows: string[] = [];
    for (const t of [0, 1]) {
      for (let i = 0; i < 30; i++) {
        rows.push(`0,${t},${i},0.0,${i % 3}`);
      }
    }
    const p = writeCsv("traj.csv", "rep,t,individual,x_1,state", rows);
    expect(renderMasses(readCsv(p))).toContain("<svg");
  });

  it("rejects unknown schemas naming the expectation", () => {
    const p = writeCsv("junk.csv", "a,b", ["1,2"]);
    expect(() => renderMasses(readCsv(p))).toThrowError(/cell_center/);
  });
});

describe("qv figure", () => {
  it("renders grouped bars", () => {
    const rows = [
      "S,gh0_wide,0.21,0.209,0.21,1.004,1.01,True,True",
      "I,gh0_wide,0.12,0.119,0.12,0.992,0.98,True,True",
    ];
    const p = writeCsv("qv.csv",
                       "state,phi_id,mean_m2,mean_realized_qv,mean_formula_qv,ratio,ratio_plain,checked,ok",
                       rows);
    const svg = renderQv(readCsv(p));
    expect(svg).toContain("closed-form QV");
    expect(svg).toContain("S:gh0_wide");
  });
});

describe("byte stability and cli", () => {
  it("same input renders byte-identical output", () => {
    const rows = [100, 200, 400].map((n) => `${n},10,${Math.pow(n, -0.5)},0.01`);
    const p = writeCsv("rate4.csv", "N,reps,mean_w1,se", rows);
    const a = renderRate(readCsv(p), {});
    const b = renderRate(readCsv(p), {});
    expect(a).toBe(b);
  });

  it("cli writes svg and png artifacts", async () => {
    const rows = [100, 200, 400].map((n) => `${n},10,${Math.pow(n, -0.5)},0.01`);
    const p = writeCsv("rate5.csv", "N,reps,mean_w1,se", rows);
    const svgOut = join(dir, "r.svg");
    expect(await main(["rate", "--in", p, "--out", svgOut])).toBe(0);
    expect(readFileSync(svgOut, "utf8")).toContain("<svg");
    const pngOut = join(dir, "r.png");
    expect(await main(["rate", "--in", p, "--out", pngOut])).toBe(0);
    expect(readFileSync(pngOut).subarray(1, 4).toString()).toBe("PNG");
  });

  it("unknown kind exits 64", async () => {
    expect(await main(["pie"])).toBe(64);
  });

  it("schema error exits 65", async () => {
    const p = writeCsv("rate6.csv", "N,reps,se", ["1,2,3", "2,3,4", "4,5,6"]);
    expect(await main(["rate", "--in", p, "--out", join(dir, "x.svg")])).toBe(65);
  });
});
