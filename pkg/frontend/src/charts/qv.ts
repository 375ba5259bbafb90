// Quadratic-variation identity bar chart: empirical (realized) vs
// closed-form QV per (state, test function).
import { Table, columnIndex } from "../csv.js";
import { Svg, drawAxes, linearScale, niceTicks } from "../svg.js";

export function renderQv(table: Table): string {
  const iState = columnIndex(table, "state", "qv figure");
  const iPhi = columnIndex(table, "phi_id", "qv figure");
  const iEmp = columnIndex(table, "mean_realized_qv", "qv figure");
  const iFor = columnIndex(table, "mean_formula_qv", "qv figure");

  const labels: string[] = [];
  const emp: number[] = [];
  const frm: number[] = [];
  for (const row of table.rows) {
    labels.push(`${row[iState]}:${row[iPhi]}`);
    emp.push(Number(row[iEmp]));
    frm.push(Number(row[iFor]));
  }
  const n = labels.length;
  if (n === 0) throw new Error("qv figure: no rows");

  const w = Math.max(640, 30 * n + 120);
  const h = 420;
  const m = { top: 40, right: 20, bottom: 110, left: 64 };
  const svg = new Svg(w, h);
  const yMax = Math.max(...emp, ...frm) * 1.15 || 1;
  const sy = linearScale(0, yMax, h - m.bottom, m.top);
  const sx = linearScale(0, n, m.left, w - m.right);
  const yT = niceTicks(0, yMax, 5).map((v) => [v, v.toPrecision(3)] as [number, string]);
  drawAxes(svg, m, [], yT, sx, sy, "", "QV at T");

  const bw = (sx(1) - sx(0)) * 0.38;
  for (let k = 0; k < n; k++) {
    const x = sx(k + 0.12);
    svg.rect(x, sy(emp[k]), bw, sy(0) - sy(emp[k]), "#6baed6");
    svg.rect(x + bw, sy(frm[k]), bw, sy(0) - sy(frm[k]), "#fd8d3c");
    svg.raw(
      `<text x="${(x + bw).toFixed(2)}" y="${h - m.bottom + 10}" font-size="8" ` +
      `font-family="Helvetica,Arial,sans-serif" text-anchor="end" fill="#333" ` +
      `transform="rotate(-60 ${(x + bw).toFixed(2)} ${h - m.bottom + 10})">${labels[k]}</text>`,
    );
  }
  svg.rect(m.left, 18, 10, 10, "#6baed6");
  svg.text(m.left + 14, 27, "empirical (realized QV)", 11);
  svg.rect(m.left + 170, 18, 10, 10, "#fd8d3c");
  svg.text(m.left + 184, 27, "closed-form QV", 11);
  return svg.render();
}
