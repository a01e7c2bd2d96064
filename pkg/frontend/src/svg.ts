/** Minimal SVG string assembly. Output is deterministic for fixed input. */

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Pixel coordinate with stable short formatting. */
export function px(v: number): string {
  const s = v.toFixed(2);
  return s.replace(/\.?0+$/, "") || "0";
}

export type Attrs = Record<string, string | number>;

function attrString(attrs: Attrs): string {
  const parts: string[] = [];
  for (const [k, v] of Object.entries(attrs)) {
    parts.push(` ${k}="${esc(String(v))}"`);
  }
  return parts.join("");
}

export function tag(
  name: string,
  attrs: Attrs,
  children?: string[] | string,
): string {
  const a = attrString(attrs);
  if (children === undefined) {
    return `<${name}${a}/>`;
  }
  const body = Array.isArray(children) ? children.join("") : children;
  return `<${name}${a}>${body}</${name}>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  attrs: Attrs = {},
): string {
  return tag("text", { x: px(x), y: px(y), ...attrs }, esc(content));
}

export function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  attrs: Attrs = {},
): string {
  return tag("line", {
    x1: px(x1),
    y1: px(y1),
    x2: px(x2),
    y2: px(y2),
    ...attrs,
  });
}

export function polyline(pts: Array<[number, number]>, attrs: Attrs = {}): string {
  const points = pts.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
  return tag("polyline", { points, fill: "none", ...attrs });
}

export function circle(
  cx: number,
  cy: number,
  r: number,
  attrs: Attrs = {},
): string {
  return tag("circle", { cx: px(cx), cy: px(cy), r: px(r), ...attrs });
}
