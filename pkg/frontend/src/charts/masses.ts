// S/I/R channel masses against time, from either a density CSV
// (t, cell_center, rho_S, rho_I, rho_R) or a trajectory CSV
// (rep, t, individual, x_*, state).
import { SchemaError, Table, columnIndex } from "../csv.js";
import { Svg, drawAxes, linearScale, niceTicks } from "../svg.js";

interface Curve {
  times: number[];
  masses: number[][]; // [3][nTimes]
}

function fromDensity(table: Table): Curve {
  const iT = columnIndex(table, "t", "masses figure");
  const iC = columnIndex(table, "cell_center", "masses figure");
  const cols = ["rho_S", "rho_I", "rho_R"].map((c) => columnIndex(table, c, "masses figure"));
  const byT = new Map<number, { centers: number[]; rho: number[][] }>();
  for (const row of table.rows) {
    const t = Number(row[iT]);
    if (!byT.has(t)) byT.set(t, { centers: [], rho: [[], [], []] });
    const g = byT.get(t)!;
    g.centers.push(Number(row[iC]));
    for (let e = 0; e < 3; e++) g.rho[e].push(Number(row[cols[e]]));
  }
  const times = [...byT.keys()].sort((a, b) => a - b);
  const masses: number[][] = [[], [], []];
  for (const t of times) {
    const g = byT.get(t)!;
    const h = g.centers.length > 1 ? g.centers[1] - g.centers[0] : 1;
    for (let e = 0; e < 3; e++) {
      masses[e].push(g.rho[e].reduce((s, v) => s + v, 0) * h);
    }
  }
  return { times, masses };
}

function fromTrajectory(table: Table): Curve {
  const iT = columnIndex(table, "t", "masses figure");
  const iState = columnIndex(table, "state", "masses figure");
  const byT = new Map<number, [number, number, number]>();
  for (const row of table.rows) {
    const t = Number(row[iT]);
    if (!byT.has(t)) byT.set(t, [0, 0, 0]);
    byT.get(t)![Number(row[iState])]++;
  }
  const times = [...byT.keys()].sort((a, b) => a - b);
  const masses: number[][] = [[], [], []];
  for (const t of times) {
    const counts = byT.get(t)!;
    const total = counts[0] + counts[1] + counts[2];
    for (let e = 0; e < 3; e++) masses[e].push(counts[e] / total);
  }
  return { times, masses };
}

export function renderMasses(table: Table): string {
  let curve: Curve;
  if (table.header.includes("cell_center")) {
    curve = fromDensity(table);
  } else if (table.header.includes("individual")) {
    curve = fromTrajectory(table);
  } else {
    throw new SchemaError(
      `masses figure: expected a density CSV (cell_center, rho_S, ...) or a ` +
      `trajectory CSV (individual, state); found columns ${table.header.join(", ")}`,
    );
  }
  const w = 560;
  const h = 380;
  const m = { top: 36, right: 24, bottom: 46, left: 56 };
  const svg = new Svg(w, h);
  const tLo = Math.min(...curve.times);
  const tHi = Math.max(...curve.times);
  const sx = linearScale(tLo, tHi, m.left, w - m.right);
  const sy = linearScale(0, 1.05, h - m.bottom, m.top);
  const xT = niceTicks(tLo, tHi).map((v) => [v, String(v)] as [number, string]);
  const yT = [0, 0.25, 0.5, 0.75, 1].map((v) => [v, v.toFixed(2)] as [number, string]);
  drawAxes(svg, m, xT, yT, sx, sy, "t", "channel mass");

  svg.line(sx(tLo), sy(1.0), sx(tHi), sy(1.0), "#999", 1, "4,4");
  const colors = ["#1f77b4", "#e6550d", "#2ca02c"];
  const names = ["S", "I", "R"];
  for (let e = 0; e < 3; e++) {
    svg.polyline(
      curve.times.map((t, i) => [sx(t), sy(curve.masses[e][i])] as [number, number]),
      colors[e], 1.8,
    );
    svg.text(w - m.right - 60 + 22 * e, 24, names[e], 12, "start", colors[e]);
  }
  svg.text(m.left, 18, "channel masses (S down, R up; dashed: total = 1)", 12);
  return svg.render();
}
