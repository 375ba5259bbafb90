#!/usr/bin/env node
// plots <kind> --in <csv> --out <svg|png> [options]
//
// kinds: rate | hist | masses | qv
// Figures regenerate byte-identically from identical CSV inputs; every
// number shown comes from a CSV column, a recorded fit manifest, or a
// display statistic of the plotted sample.
import { writeFileSync } from "node:fs";
import { parseArgs } from "node:util";
import { SchemaError, readCsv } from "./csv.js";
import { renderHist } from "./charts/hist.js";
import { renderMasses } from "./charts/masses.js";
import { renderQv } from "./charts/qv.js";
import { renderRate } from "./charts/rate.js";

const KINDS = ["rate", "hist", "masses", "qv"] as const;

function usage(): string {
  return (
    "usage: plots <rate|hist|masses|qv> --in <csv> --out <svg|png>\n" +
    "  rate:   --fit-json <manifest fit>    (rate.csv)\n" +
    "  hist:   --phi <id> --state <S|I|R> --t <time>   (fluctuations/spde_compare.csv)\n" +
    "  masses: (density.csv or trajectory.csv)\n" +
    "  qv:     (qv_check.csv)\n"
  );
}

export async function main(argv: string[]): Promise<number> {
  const kind = argv[0];
  if (!kind || !(KINDS as readonly string[]).includes(kind)) {
    process.stderr.write(usage());
    return 64;
  }
  const { values } = parseArgs({
    args: argv.slice(1),
    options: {
      in: { type: "string" },
      out: { type: "string" },
      phi: { type: "string", default: "gh0_wide" },
      state: { type: "string", default: "S" },
      t: { type: "string", default: "0" },
      "fit-json": { type: "string" },
    },
  });
  if (!values.in || !values.out) {
    process.stderr.write(usage());
    return 64;
  }
  try {
    const table = readCsv(values.in);
    let svg: string;
    switch (kind) {
      case "rate":
        svg = renderRate(table, { fitJson: values["fit-json"] });
        break;
      case "hist":
        svg = renderHist(table, {
          phi: values.phi!,
          state: values.state!,
          t: Number(values.t),
        });
        break;
      case "masses":
        svg = renderMasses(table);
        break;
      default:
        svg = renderQv(table);
    }
    if (values.out.endsWith(".png")) {
      const sharp = (await import("sharp")).default;
      const buf = await sharp(Buffer.from(svg), { density: 144 }).png().toBuffer();
      writeFileSync(values.out, buf);
    } else {
      writeFileSync(values.out, svg);
    }
    return 0;
  } catch (err) {
    const msg = err instanceof Error ? err.message : String(err);
    process.stderr.write(`plots ${kind}: ${msg}\n`);
    return err instanceof SchemaError ? 65 : 1;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (isMain) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
