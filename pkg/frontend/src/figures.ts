/**
 * The five figure kinds rendered from experiment CSV tables.
 *
 * convergence  error vs step size, log-log, order guide lines
 * workprec     error vs matvec count, log-log
 * quotient     achieved error / tolerance vs tolerance, with the y=1 line
 * stepsizes    accepted step size vs time, log y
 * functionals  energy and double occupation vs time, two panels
 *
 * Rendering is pure string assembly: same table in, same SVG out.
 */

import { CsvTable, numericColumn, stringColumn } from "./csv";
import { Scale, linearScale, logScale } from "./scale";
import { circle, line, polyline, px, tag, text } from "./svg";

export type FigureKind =
  | "convergence"
  | "workprec"
  | "quotient"
  | "stepsizes"
  | "functionals";

export const FIGURE_KINDS: FigureKind[] = [
  "convergence",
  "workprec",
  "quotient",
  "stepsizes",
  "functionals",
];

/** Which experiment command must have written the input CSV. */
export const KIND_ORIGIN: Record<FigureKind, string> = {
  convergence: "convergence",
  workprec: "workprec",
  quotient: "workprec",
  stepsizes: "trace",
  functionals: "trace",
};

/** Convergence order by integrator name, used for default guide slopes. */
export const METHOD_ORDER: Record<string, number> = {
  cf2: 2,
  cf4: 4,
  cf4o: 4,
  cf4oh: 4,
  cf6n: 6,
  cf7: 7,
  magnus4: 4,
  magnusstrang4: 4,
  dopri45: 4,
};

export interface RenderOptions {
  /** Guide-line slopes for convergence figures; default: one per distinct
   *  order among the plotted methods. */
  orders?: number[];
}

const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
];

const FONT = "DejaVu Sans, Helvetica, sans-serif";
const W = 640;
const H = 440;
const MARGIN = { l: 76, r: 24, t: 40, b: 56 };

interface Region {
  x0: number;
  x1: number;
  y0: number; // top
  y1: number; // bottom
}

interface Series {
  name: string;
  pts: Array<[number, number]>;
}

function groupSeries(xs: number[], ys: number[], names: string[]): Series[] {
  const order: string[] = [];
  const byName = new Map<string, Array<[number, number]>>();
  for (let i = 0; i < names.length; i++) {
    let pts = byName.get(names[i]);
    if (!pts) {
      pts = [];
      byName.set(names[i], pts);
      order.push(names[i]);
    }
    pts.push([xs[i], ys[i]]);
  }
  return order.map((name) => ({ name, pts: byName.get(name)! }));
}

function extent(
  series: Series[],
  pick: (p: [number, number]) => number,
  logAxis: boolean,
): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const p of s.pts) {
      const v = pick(p);
      if (!Number.isFinite(v)) continue;
      if (logAxis && v <= 0) continue;
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!(lo <= hi)) {
    throw new Error("no plottable data points");
  }
  return [lo, hi];
}

function padded(
  lo: number,
  hi: number,
  logAxis: boolean,
): [number, number] {
  if (logAxis) {
    return [lo / 1.25, hi * 1.25];
  }
  const span = hi > lo ? hi - lo : Math.max(Math.abs(hi), 1);
  return [lo - 0.04 * span, hi + 0.04 * span];
}

function makeScale(
  lo: number,
  hi: number,
  rlo: number,
  rhi: number,
  logAxis: boolean,
): Scale {
  return logAxis ? logScale(lo, hi, rlo, rhi) : linearScale(lo, hi, rlo, rhi);
}

/** Plot frame: border, grid, tick labels, axis titles. */
function frame(
  r: Region,
  sx: Scale,
  sy: Scale,
  xLabel: string,
  yLabel: string,
  opts: { xTickLabels?: boolean } = {},
): string {
  const parts: string[] = [];
  const showX = opts.xTickLabels !== false;
  for (const t of sx.ticks) {
    const x = sx.map(t.v);
    if (x < r.x0 - 0.5 || x > r.x1 + 0.5) continue;
    parts.push(line(x, r.y0, x, r.y1, { stroke: "#e0e0e0" }));
    if (showX) {
      parts.push(
        text(x, r.y1 + 18, t.label, {
          "font-family": FONT,
          "font-size": 12,
          "text-anchor": "middle",
          fill: "#333333",
        }),
      );
    }
  }
  for (const t of sy.ticks) {
    const y = sy.map(t.v);
    if (y < r.y0 - 0.5 || y > r.y1 + 0.5) continue;
    parts.push(line(r.x0, y, r.x1, y, { stroke: "#e0e0e0" }));
    parts.push(
      text(r.x0 - 8, y, t.label, {
        "font-family": FONT,
        "font-size": 12,
        "text-anchor": "end",
        dy: "0.32em",
        fill: "#333333",
      }),
    );
  }
  parts.push(
    tag("rect", {
      x: px(r.x0),
      y: px(r.y0),
      width: px(r.x1 - r.x0),
      height: px(r.y1 - r.y0),
      fill: "none",
      stroke: "#333333",
    }),
  );
  if (xLabel) {
    parts.push(
      text((r.x0 + r.x1) / 2, r.y1 + 40, xLabel, {
        "font-family": FONT,
        "font-size": 13,
        "text-anchor": "middle",
        fill: "#111111",
      }),
    );
  }
  if (yLabel) {
    const cy = (r.y0 + r.y1) / 2;
    parts.push(
      text(0, 0, yLabel, {
        "font-family": FONT,
        "font-size": 13,
        "text-anchor": "middle",
        fill: "#111111",
        transform: `translate(${px(r.x0 - 54)},${px(cy)}) rotate(-90)`,
      }),
    );
  }
  return parts.join("");
}

function drawSeries(
  series: Series[],
  sx: Scale,
  sy: Scale,
  opts: { markers?: boolean } = {},
): string {
  const parts: string[] = [];
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.pts
      .filter(
        ([x, y]) =>
          Number.isFinite(x) &&
          Number.isFinite(y) &&
          (!sx.log || x > 0) &&
          (!sy.log || y > 0),
      )
      .sort((a, b) => a[0] - b[0])
      .map(([x, y]): [number, number] => [sx.map(x), sy.map(y)]);
    if (pts.length === 0) return;
    const children: string[] = [
      polyline(pts, { stroke: color, "stroke-width": 1.5 }),
    ];
    if (opts.markers !== false) {
      for (const [x, y] of pts) {
        children.push(circle(x, y, 3, { fill: color }));
      }
    }
    parts.push(tag("g", { "data-series": s.name }, children));
  });
  return parts.join("");
}

function legend(names: string[], r: Region): string {
  const maxLen = Math.max(...names.map((n) => n.length));
  const boxW = 40 + 7.2 * maxLen;
  const boxH = 10 + 16 * names.length;
  const x0 = r.x1 - boxW - 8;
  const y0 = r.y0 + 8;
  const parts: string[] = [
    tag("rect", {
      x: px(x0),
      y: px(y0),
      width: px(boxW),
      height: px(boxH),
      fill: "#ffffff",
      "fill-opacity": 0.85,
      stroke: "#cccccc",
    }),
  ];
  names.forEach((name, i) => {
    const y = y0 + 13 + 16 * i;
    const color = PALETTE[i % PALETTE.length];
    parts.push(line(x0 + 6, y, x0 + 26, y, { stroke: color, "stroke-width": 2 }));
    parts.push(
      text(x0 + 32, y, name, {
        "font-family": FONT,
        "font-size": 12,
        dy: "0.32em",
        fill: "#111111",
      }),
    );
  });
  return tag("g", { "data-legend": "1" }, parts);
}

function svgRoot(kind: FigureKind, height: number, body: string[]): string {
  return tag(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width: W,
      height,
      viewBox: `0 0 ${W} ${height}`,
      "data-kind": kind,
    },
    [
      tag("rect", { width: W, height, fill: "#ffffff" }),
      ...body,
    ],
  );
}

function title(label: string): string {
  return text(W / 2, MARGIN.t - 16, label, {
    "font-family": FONT,
    "font-size": 14,
    "text-anchor": "middle",
    fill: "#111111",
  });
}

/**
 * Straight guide line in log-log space through (xa, ya) with slope p,
 * clipped to the data domain box.
 */
function orderGuide(
  p: number,
  xa: number,
  ya: number,
  sx: Scale,
  sy: Scale,
): string {
  const lxa = Math.log10(xa);
  const lya = Math.log10(ya);
  const at = (lx: number) => lya + p * (lx - lxa);
  const lxOf = (ly: number) => lxa + (ly - lya) / p;

  let lx0 = Math.log10(sx.lo);
  let lx1 = Math.log10(sx.hi);
  const lyLo = Math.log10(sy.lo);
  const lyHi = Math.log10(sy.hi);
  let ly0 = at(lx0);
  let ly1 = at(lx1);
  if (ly0 < lyLo) {
    lx0 = lxOf(lyLo);
    ly0 = lyLo;
  }
  if (ly1 > lyHi) {
    lx1 = lxOf(lyHi);
    ly1 = lyHi;
  }
  if (!(lx0 < lx1)) return "";

  const x0 = sx.map(10 ** lx0);
  const y0 = sy.map(10 ** ly0);
  const x1 = sx.map(10 ** lx1);
  const y1 = sy.map(10 ** ly1);
  return tag("g", { "data-guide": `order-${p}` }, [
    line(x0, y0, x1, y1, {
      stroke: "#888888",
      "stroke-dasharray": "6 4",
    }),
    text(x1 - 4, y1 - 6, `slope ${p}`, {
      "font-family": FONT,
      "font-size": 11,
      "text-anchor": "end",
      fill: "#666666",
    }),
  ]);
}

function plotRegion(height = H): Region {
  return {
    x0: MARGIN.l,
    x1: W - MARGIN.r,
    y0: MARGIN.t,
    y1: height - MARGIN.b,
  };
}

function renderConvergence(table: CsvTable, opts: RenderOptions): string {
  const methods = stringColumn(table, "method");
  const taus = numericColumn(table, "tau");
  const errs = numericColumn(table, "error_l2_vs_reference");
  const series = groupSeries(taus, errs, methods);
  const r = plotRegion();

  const [xl, xh] = padded(...extent(series, (p) => p[0], true), true);
  const [yl, yh] = padded(...extent(series, (p) => p[1], true), true);
  const sx = makeScale(xl, xh, r.x0, r.x1, true);
  const sy = makeScale(yl, yh, r.y1, r.y0, true);

  const slopes =
    opts.orders ??
    [...new Set(series.map((s) => METHOD_ORDER[s.name]).filter((o) => o))];
  const guides: string[] = [];
  for (const p of slopes) {
    // Anchor each guide just above the largest-step point of the first
    // series with that order (or the first series at all as a fallback).
    const host =
      series.find((s) => METHOD_ORDER[s.name] === p) ?? series[0];
    const anchor = host.pts.reduce((a, b) => (b[0] > a[0] ? b : a));
    guides.push(orderGuide(p, anchor[0], anchor[1] * 1.35, sx, sy));
  }

  return svgRoot("convergence", H, [
    title("error vs step size"),
    frame(r, sx, sy, "tau", "error (2-norm vs reference)"),
    ...guides,
    drawSeries(series, sx, sy),
    legend(series.map((s) => s.name), r),
  ]);
}

function renderWorkprec(table: CsvTable): string {
  const methods = stringColumn(table, "method");
  const work = numericColumn(table, "matvecs");
  const errs = numericColumn(table, "achieved_error");
  const series = groupSeries(work, errs, methods);
  const r = plotRegion();

  const [xl, xh] = padded(...extent(series, (p) => p[0], true), true);
  const [yl, yh] = padded(...extent(series, (p) => p[1], true), true);
  const sx = makeScale(xl, xh, r.x0, r.x1, true);
  const sy = makeScale(yl, yh, r.y1, r.y0, true);

  return svgRoot("workprec", H, [
    title("error vs work"),
    frame(r, sx, sy, "matvecs", "achieved error"),
    drawSeries(series, sx, sy),
    legend(series.map((s) => s.name), r),
  ]);
}

function renderQuotient(table: CsvTable): string {
  const methods = stringColumn(table, "method");
  const tols = numericColumn(table, "tol");
  const quots = numericColumn(table, "quotient");
  const series = groupSeries(tols, quots, methods);
  const r = plotRegion();

  const [xl, xh] = padded(...extent(series, (p) => p[0], true), true);
  let [yl, yh] = extent(series, (p) => p[1], true);
  // The y=1 reference must always be inside the frame.
  yl = Math.min(yl, 1);
  yh = Math.max(yh, 1);
  [yl, yh] = padded(yl, yh, true);
  const sx = makeScale(xl, xh, r.x0, r.x1, true);
  const sy = makeScale(yl, yh, r.y1, r.y0, true);

  const yOne = sy.map(1);
  const guide = tag("g", { "data-guide": "y=1" }, [
    line(r.x0, yOne, r.x1, yOne, {
      stroke: "#555555",
      "stroke-dasharray": "6 4",
    }),
    text(r.x0 + 6, yOne - 6, "quotient = 1", {
      "font-family": FONT,
      "font-size": 11,
      fill: "#555555",
    }),
  ]);

  return svgRoot("quotient", H, [
    title("achieved error / tolerance"),
    frame(r, sx, sy, "tolerance", "error / tol"),
    guide,
    drawSeries(series, sx, sy),
    legend(series.map((s) => s.name), r),
  ]);
}

function renderStepsizes(table: CsvTable): string {
  const ts = numericColumn(table, "t");
  const taus = numericColumn(table, "tau");
  const name = table.meta.get("method") ?? "tau";
  const series: Series[] = [
    { name, pts: ts.map((t, i): [number, number] => [t, taus[i]]) },
  ];
  const r = plotRegion();

  const [xl, xh] = padded(...extent(series, (p) => p[0], false), false);
  const [yl, yh] = padded(...extent(series, (p) => p[1], true), true);
  const sx = makeScale(xl, xh, r.x0, r.x1, false);
  const sy = makeScale(yl, yh, r.y1, r.y0, true);

  return svgRoot("stepsizes", H, [
    title("accepted step sizes"),
    frame(r, sx, sy, "t", "tau"),
    drawSeries(series, sx, sy, { markers: true }),
    legend([name], r),
  ]);
}

function renderFunctionals(table: CsvTable): string {
  const ts = numericColumn(table, "t");
  const energy = numericColumn(table, "energy");
  const docc = numericColumn(table, "double_occ");
  const height = 560;
  const gap = 34;
  const panelH = (height - MARGIN.t - MARGIN.b - gap) / 2;
  const top: Region = {
    x0: MARGIN.l,
    x1: W - MARGIN.r,
    y0: MARGIN.t,
    y1: MARGIN.t + panelH,
  };
  const bottom: Region = {
    x0: MARGIN.l,
    x1: W - MARGIN.r,
    y0: top.y1 + gap,
    y1: top.y1 + gap + panelH,
  };

  const panels: string[] = [];
  const specs: Array<{
    region: Region;
    ys: number[];
    label: string;
    key: string;
    color: string;
    xLabel: string;
    xTickLabels: boolean;
  }> = [
    {
      region: top,
      ys: energy,
      label: "energy",
      key: "energy",
      color: PALETTE[0],
      xLabel: "",
      xTickLabels: false,
    },
    {
      region: bottom,
      ys: docc,
      label: "double occupation",
      key: "double-occ",
      color: PALETTE[1],
      xLabel: "t",
      xTickLabels: true,
    },
  ];

  const [txl, txh] = padded(Math.min(...ts), Math.max(...ts), false);
  for (const spec of specs) {
    const series: Series[] = [
      {
        name: spec.label,
        pts: ts.map((t, i): [number, number] => [t, spec.ys[i]]),
      },
    ];
    const [yl, yh] = padded(...extent(series, (p) => p[1], false), false);
    const sx = makeScale(txl, txh, spec.region.x0, spec.region.x1, false);
    const sy = makeScale(yl, yh, spec.region.y1, spec.region.y0, false);
    panels.push(
      tag("g", { "data-panel": spec.key }, [
        frame(spec.region, sx, sy, spec.xLabel, spec.label, {
          xTickLabels: spec.xTickLabels,
        }),
        tag("g", { "data-series": spec.key }, [
          polyline(
            series[0].pts
              .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y))
              .map(([x, y]): [number, number] => [sx.map(x), sy.map(y)]),
            { stroke: spec.color, "stroke-width": 1.5 },
          ),
        ]),
      ]),
    );
  }

  return svgRoot("functionals", height, [title("observable traces"), ...panels]);
}

/**
 * Render one figure from a parsed CSV table.
 *
 * Throws if the table was written by a different experiment command than
 * the figure kind consumes (e.g. a quotient figure from a trace CSV).
 */
export function render(
  kind: FigureKind,
  table: CsvTable,
  opts: RenderOptions = {},
): string {
  const want = KIND_ORIGIN[kind];
  if (want === undefined) {
    throw new Error(`unknown figure kind '${kind}'`);
  }
  if (table.origin !== want) {
    throw new Error(
      `figure kind '${kind}' expects a CSV written by '${want}', ` +
        `got one written by '${table.origin}'`,
    );
  }
  switch (kind) {
    case "convergence":
      return renderConvergence(table, opts);
    case "workprec":
      return renderWorkprec(table);
    case "quotient":
      return renderQuotient(table);
    case "stepsizes":
      return renderStepsizes(table);
    case "functionals":
      return renderFunctionals(table);
  }
}
