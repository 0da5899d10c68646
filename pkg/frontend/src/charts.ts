/**
 * Chart renderers for the solver's CSV artifacts. Every renderer draws into
 * a fixed-size raster with integer geometry only, so identical inputs give
 * identical images.
 */

import { basename } from "node:path";
import { viridis } from "./colormap.js";
import { SchemaError, Table, hasColumn, numericColumn, readCsv } from "./csv.js";
import {
  BLACK,
  BLUE,
  Color,
  GRAY,
  GREEN,
  LIGHT_GRAY,
  ORANGE,
  RED,
  Raster,
  formatTick,
} from "./raster.js";

export type PlotKind =
  | "loss-curve"
  | "field-1d"
  | "field-2d-heatmap"
  | "error-map"
  | "ablation-table";

export interface PlotJob {
  kind: PlotKind;
  inputs: string[];
  output: string;
  title?: string;
  width?: number;
  height?: number;
}

const SERIES_COLORS: Color[] = [BLUE, ORANGE, GREEN, RED];

interface Frame {
  raster: Raster;
  x0: number;
  y0: number;
  w: number;
  h: number;
}

function makeFrame(width: number, height: number, title: string): Frame {
  const raster = new Raster(width, height);
  const x0 = 64;
  const y0 = 28;
  const w = width - x0 - 24;
  const h = height - y0 - 40;
  raster.textCentered(width / 2, 10, title, BLACK, 2);
  raster.line(x0, y0 + h, x0 + w, y0 + h, BLACK);
  raster.line(x0, y0, x0, y0 + h, BLACK);
  return { raster, x0, y0, w, h };
}

function niceRange(lo: number, hi: number): [number, number] {
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function xTicks(frame: Frame, lo: number, hi: number, label: string): void {
  const { raster, x0, y0, w, h } = frame;
  for (let i = 0; i <= 4; i++) {
    const v = lo + ((hi - lo) * i) / 4;
    const px = x0 + (w * i) / 4;
    raster.line(px, y0 + h, px, y0 + h + 3, BLACK);
    raster.textCentered(px, y0 + h + 6, formatTick(v), BLACK);
  }
  raster.textCentered(x0 + w / 2, y0 + h + 22, label, BLACK, 2);
}

function yTicksLog(frame: Frame, lo: number, hi: number, label: string): void {
  const { raster, x0, y0, w, h } = frame;
  const dlo = Math.ceil(lo);
  for (let d = dlo; d <= hi; d++) {
    const py = y0 + h - (h * (d - lo)) / (hi - lo);
    raster.line(x0 - 3, py, x0, py, BLACK);
    for (let gx = x0 + 1; gx < x0 + w; gx += 3) {
      raster.set(gx, py, LIGHT_GRAY);
    }
    raster.text(6, py - 2, `1E${d}`, BLACK);
  }
  raster.text(6, y0 - 12, label, BLACK, 2);
}

function yTicksLinear(frame: Frame, lo: number, hi: number, label: string): void {
  const { raster, x0, y0, h } = frame;
  for (let i = 0; i <= 4; i++) {
    const v = lo + ((hi - lo) * i) / 4;
    const py = y0 + h - (h * i) / 4;
    raster.line(x0 - 3, py, x0, py, BLACK);
    raster.text(6, py - 2, formatTick(v), BLACK);
  }
  raster.text(6, y0 - 12, label, BLACK, 2);
}

export function renderLossCurve(job: PlotJob): Raster {
  const width = job.width ?? 640;
  const height = job.height ?? 420;
  const series = job.inputs.map((p) => {
    const t = readCsv(p);
    const x = numericColumn(t, "wall_time_s", p);
    const y = numericColumn(t, "mse", p);
    const pts = x
      .map((xv, i) => [xv, y[i]] as [number, number])
      .filter(([, yv]) => Number.isFinite(yv) && yv > 0);
    if (pts.length === 0) {
      throw new SchemaError(`${p}: no positive mse values to plot`);
    }
    return { name: basename(p).replace(/\.csv$/, ""), pts };
  });
  const frame = makeFrame(width, height, job.title ?? "MSE VS TIME");
  const allX = series.flatMap((s) => s.pts.map((p) => p[0]));
  const allY = series.flatMap((s) => s.pts.map((p) => Math.log10(p[1])));
  const [xlo, xhi] = niceRange(Math.min(...allX), Math.max(...allX));
  const [ylo, yhi] = niceRange(Math.floor(Math.min(...allY)), Math.ceil(Math.max(...allY)));
  yTicksLog(frame, ylo, yhi, "MSE");
  xTicks(frame, xlo, xhi, "TIME (S)");
  series.forEach((s, si) => {
    const color = SERIES_COLORS[si % SERIES_COLORS.length];
    let prev: [number, number] | null = null;
    for (const [xv, yv] of s.pts) {
      const px = frame.x0 + ((xv - xlo) / (xhi - xlo)) * frame.w;
      const py = frame.y0 + frame.h - ((Math.log10(yv) - ylo) / (yhi - ylo)) * frame.h;
      if (prev) frame.raster.line(prev[0], prev[1], px, py, color, 2);
      prev = [px, py];
    }
    frame.raster.fillRect(frame.x0 + frame.w - 108, frame.y0 + 8 + 14 * si, 10, 4, color);
    frame.raster.text(frame.x0 + frame.w - 94, frame.y0 + 5 + 14 * si, s.name.slice(0, 16), BLACK);
  });
  return frame.raster;
}

export function renderField1d(job: PlotJob): Raster {
  const width = job.width ?? 640;
  const height = job.height ?? 420;
  const t = readCsv(job.inputs[0]);
  const x = numericColumn(t, "x", job.inputs[0]);
  const pred = numericColumn(t, "u_pred", job.inputs[0]);
  const ref = hasColumn(t, "u_ref") ? numericColumn(t, "u_ref", job.inputs[0]) : null;
  const frame = makeFrame(width, height, job.title ?? "SOLUTION");
  const ys = ref ? pred.concat(ref) : pred;
  const [xlo, xhi] = niceRange(Math.min(...x), Math.max(...x));
  const [ylo, yhi] = niceRange(Math.min(...ys), Math.max(...ys));
  yTicksLinear(frame, ylo, yhi, "U");
  xTicks(frame, xlo, xhi, "X");
  const draw = (vals: number[], color: Color, thick: number) => {
    let prev: [number, number] | null = null;
    for (let i = 0; i < x.length; i++) {
      const px = frame.x0 + ((x[i] - xlo) / (xhi - xlo)) * frame.w;
      const py = frame.y0 + frame.h - ((vals[i] - ylo) / (yhi - ylo)) * frame.h;
      if (prev) frame.raster.line(prev[0], prev[1], px, py, color, thick);
      prev = [px, py];
    }
  };
  if (ref) draw(ref, GRAY, 3);
  draw(pred, BLUE, 1);
  return frame.raster;
}

function renderHeatmap(job: PlotJob, column: string, fallbackTitle: string): Raster {
  const width = job.width ?? 560;
  const height = job.height ?? 520;
  const path = job.inputs[0];
  const t = readCsv(path);
  const x = numericColumn(t, "x", path);
  const yName = hasColumn(t, "y") ? "y" : hasColumn(t, "t") ? "t" : "y";
  const y = numericColumn(t, yName, path);
  const v = numericColumn(t, column, path);
  const frame = makeFrame(width - 56, height, job.title ?? fallbackTitle);
  const [xlo, xhi] = niceRange(Math.min(...x), Math.max(...x));
  const [ylo, yhi] = niceRange(Math.min(...y), Math.max(...y));
  const finite = v.filter(Number.isFinite);
  const vlo = Math.min(...finite);
  const vhi = Math.max(...finite);
  const scale = vhi > vlo ? vhi - vlo : 1;
  // splat size from the data spacing so grid cells tile without holes
  const spacing = (arr: number[]) => {
    const uniq = Array.from(new Set(arr)).sort((a, b) => a - b);
    let best = Infinity;
    for (let i = 1; i < uniq.length; i++) best = Math.min(best, uniq[i] - uniq[i - 1]);
    return Number.isFinite(best) ? best : 1;
  };
  const cellW = Math.max(1, Math.ceil((spacing(x) / (xhi - xlo)) * frame.w) + 1);
  const cellH = Math.max(1, Math.ceil((spacing(y) / (yhi - ylo)) * frame.h) + 1);
  for (let i = 0; i < x.length; i++) {
    if (!Number.isFinite(v[i])) continue;
    const px = frame.x0 + ((x[i] - xlo) / (xhi - xlo)) * frame.w;
    const py = frame.y0 + frame.h - ((y[i] - ylo) / (yhi - ylo)) * frame.h;
    frame.raster.fillRect(
      Math.round(px - cellW / 2),
      Math.round(py - cellH / 2),
      cellW,
      cellH,
      viridis((v[i] - vlo) / scale),
    );
  }
  // axes on top of the splats
  frame.raster.line(frame.x0, frame.y0 + frame.h, frame.x0 + frame.w, frame.y0 + frame.h, BLACK);
  frame.raster.line(frame.x0, frame.y0, frame.x0, frame.y0 + frame.h, BLACK);
  yTicksLinear(frame, ylo, yhi, yName.toUpperCase());
  xTicks(frame, xlo, xhi, "X");
  // colorbar in the reserved right margin
  const out = new Raster(width, height);
  out.pixels.fill(255);
  for (let yy = 0; yy < height; yy++) {
    for (let xx = 0; xx < width - 56; xx++) {
      const src = (yy * frame.raster.width + xx) * 4;
      out.pixels.set(frame.raster.pixels.subarray(src, src + 4), (yy * width + xx) * 4);
    }
  }
  const barX = width - 44;
  const barTop = frame.y0;
  const barH = frame.h;
  for (let i = 0; i < barH; i++) {
    const tt = 1 - i / (barH - 1);
    const c = viridis(tt);
    out.fillRect(barX, barTop + i, 14, 1, c);
  }
  out.text(barX, barTop - 10, formatTick(vhi), BLACK);
  out.text(barX, barTop + barH + 4, formatTick(vlo), BLACK);
  return out;
}

export function renderField2d(job: PlotJob): Raster {
  return renderHeatmap(job, "u_pred", "FIELD");
}

export function renderErrorMap(job: PlotJob): Raster {
  return renderHeatmap(job, "abs_err", "ABS ERROR");
}

export function renderAblationTable(job: PlotJob): Raster {
  const path = job.inputs[0];
  const t = readCsv(path);
  const scale = 2;
  const cellW = 13 * (3 + 1) * scale;
  const rowH = 9 * scale;
  const width = Math.max(360, t.columns.length * cellW + 24);
  const height = (t.rows.length + 2) * rowH + 46;
  const raster = new Raster(width, height);
  raster.textCentered(width / 2, 8, job.title ?? "ABLATION", BLACK, 2);
  const top = 30;
  t.columns.forEach((c, j) => {
    raster.text(12 + j * cellW, top, c.slice(0, 12), BLACK, scale);
  });
  raster.line(12, top + rowH - 3, width - 12, top + rowH - 3, BLACK);
  t.rows.forEach((row, i) => {
    row.forEach((cell, j) => {
      const v = parseFloat(cell);
      const text = Number.isFinite(v) ? formatTick(v) : cell.slice(0, 12);
      raster.text(12 + j * cellW, top + (i + 1) * rowH, text, BLACK, scale);
    });
  });
  return raster;
}

export function render(job: PlotJob): Raster {
  if (job.inputs.length === 0) {
    throw new SchemaError("no input files given");
  }
  switch (job.kind) {
    case "loss-curve":
      return renderLossCurve(job);
    case "field-1d":
      return renderField1d(job);
    case "field-2d-heatmap":
      return renderField2d(job);
    case "error-map":
      return renderErrorMap(job);
    case "ablation-table":
      return renderAblationTable(job);
    default:
      throw new SchemaError(`unknown plot kind '${job.kind as string}'`);
  }
}
