/** Axis scales and tick placement. Pure functions, no state. */

export interface Tick {
  v: number;
  label: string;
}

export interface Scale {
  map(v: number): number;
  ticks: Tick[];
  lo: number;
  hi: number;
  log: boolean;
}

/** Compact number label: "0.25", "1e-7", "2.5e-6". */
export function fmt(v: number): string {
  if (v === 0) return "0";
  if (!Number.isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const [mant, exp] = v.toExponential(6).split("e");
    const m = mant.replace(/\.?0+$/, "");
    const e = String(Number(exp));
    return `${m}e${e}`;
  }
  const s = String(v);
  if (s.length <= 8) return s;
  return String(Number(v.toPrecision(6)));
}

/** Largest "nice" step (1, 2, 5 times a power of ten) not exceeding x. */
function niceStep(x: number): number {
  const exp = Math.floor(Math.log10(x));
  const f = x / 10 ** exp;
  const nice = f >= 5 ? 5 : f >= 2 ? 2 : 1;
  return nice * 10 ** exp;
}

export function linearTicks(lo: number, hi: number, n = 5): Tick[] {
  if (!(hi > lo)) {
    return [{ v: lo, label: fmt(lo) }];
  }
  const step = niceStep((hi - lo) / Math.max(1, n - 1));
  const ticks: Tick[] = [];
  const first = Math.ceil(lo / step - 1e-9) * step;
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    const r = Math.abs(v) < step * 1e-9 ? 0 : v;
    ticks.push({ v: r, label: fmt(Number(r.toPrecision(12))) });
  }
  return ticks;
}

export function logTicks(lo: number, hi: number): Tick[] {
  const e0 = Math.ceil(Math.log10(lo) - 1e-9);
  const e1 = Math.floor(Math.log10(hi) + 1e-9);
  const ticks: Tick[] = [];
  if (e1 - e0 >= 2) {
    for (let e = e0; e <= e1; e++) {
      ticks.push({ v: 10 ** e, label: fmt(10 ** e) });
    }
    return ticks;
  }
  // Fewer than three decades visible: fill in with a 1-2-5 sequence.
  for (let e = Math.floor(Math.log10(lo) - 1e-9); e <= e1; e++) {
    for (const m of [1, 2, 5]) {
      const v = m * 10 ** e;
      if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) {
        ticks.push({ v, label: fmt(v) });
      }
    }
  }
  return ticks;
}

export function linearScale(
  lo: number,
  hi: number,
  rlo: number,
  rhi: number,
): Scale {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.05 : 0.5;
    lo -= pad;
    hi += pad;
  }
  const span = hi - lo;
  return {
    lo,
    hi,
    log: false,
    ticks: linearTicks(lo, hi),
    map: (v: number) => rlo + ((v - lo) / span) * (rhi - rlo),
  };
}

export function logScale(
  lo: number,
  hi: number,
  rlo: number,
  rhi: number,
): Scale {
  if (!(lo > 0) || !(hi > 0)) {
    throw new Error(`log scale needs positive data, got [${lo}, ${hi}]`);
  }
  if (!(hi > lo)) {
    lo /= 2;
    hi *= 2;
  }
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  return {
    lo,
    hi,
    log: true,
    ticks: logTicks(lo, hi),
    map: (v: number) => rlo + ((Math.log10(v) - llo) / (lhi - llo)) * (rhi - rlo),
  };
}
