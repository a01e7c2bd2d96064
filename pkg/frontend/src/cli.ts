#!/usr/bin/env node
/**
 * plot --kind <figure> --in <csv> --out <svg|png>
 *
 * Reads one experiment CSV and writes one figure. The kind must match the
 * command that produced the CSV: convergence -> convergence, workprec and
 * quotient -> workprec, stepsizes and functionals -> trace.
 */

import { existsSync, readFileSync, writeFileSync } from "fs";
import yargs from "yargs";
import { parseCsv } from "./csv";
import { FIGURE_KINDS, FigureKind, render } from "./figures";

/** Font files tried in order when rasterizing to PNG. */
const FONT_CANDIDATES = [
  "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
  "/usr/local/lib/python3.10/dist-packages/matplotlib/mpl-data/fonts/ttf/DejaVuSans.ttf",
];

function parseOrders(spec: string): number[] {
  return spec.split(",").map((part) => {
    const v = Number(part.trim());
    if (!Number.isFinite(v) || v <= 0) {
      throw new Error(`--orders: cannot parse '${part}' as a positive slope`);
    }
    return v;
  });
}

function toPng(svg: string): Buffer {
  // Loaded lazily so SVG output works even without the native module.
  const { Resvg } = require("@resvg/resvg-js");
  const font = FONT_CANDIDATES.find((f) => existsSync(f));
  if (!font) {
    throw new Error(
      "PNG output needs a TTF font; none of the known font paths exist. " +
        "Write an .svg instead.",
    );
  }
  const r = new Resvg(svg, {
    font: {
      loadSystemFonts: false,
      fontFiles: [font],
      defaultFontFamily: "DejaVu Sans",
    },
  });
  return Buffer.from(r.render().asPng());
}

export async function runCli(argv: string[]): Promise<void> {
  const args = yargs(argv)
    .usage("$0 --kind <figure> --in <csv> --out <svg|png>")
    .option("kind", {
      choices: FIGURE_KINDS,
      demandOption: true,
      describe: "Figure to draw",
    })
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "Experiment CSV to read",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "Image to write (.svg, or .png via rasterizer)",
    })
    .option("orders", {
      type: "string",
      describe: "Comma list of guide-line slopes (convergence only)",
    })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parseSync();

  const inPath = args.in;
  if (!existsSync(inPath)) {
    throw new Error(`no such file: ${inPath}`);
  }
  const table = parseCsv(readFileSync(inPath, "utf8"));
  const opts = args.orders !== undefined ? { orders: parseOrders(args.orders) } : {};
  const svg = render(args.kind as FigureKind, table, opts);

  if (args.out.toLowerCase().endsWith(".png")) {
    writeFileSync(args.out, toPng(svg));
  } else {
    writeFileSync(args.out, svg + "\n", "utf8");
  }
}

if (require.main === module) {
  runCli(process.argv.slice(2)).catch((err) => {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(1);
  });
}
