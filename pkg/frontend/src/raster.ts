/**
 * Software canvas: RGBA pixel buffer with the handful of primitives the
 * charts need. No anti-aliasing anywhere, so output is bit-reproducible.
 */

import { GLYPH_H, GLYPH_W, glyphRows, textWidth } from "./font.js";
import { encodePng } from "./png.js";

export type Color = [number, number, number, number];

export const WHITE: Color = [255, 255, 255, 255];
export const BLACK: Color = [20, 20, 20, 255];
export const GRAY: Color = [175, 175, 175, 255];
export const LIGHT_GRAY: Color = [228, 228, 228, 255];
export const BLUE: Color = [31, 119, 180, 255];
export const ORANGE: Color = [255, 127, 14, 255];
export const GREEN: Color = [44, 160, 44, 255];
export const RED: Color = [214, 39, 40, 255];

export class Raster {
  readonly width: number;
  readonly height: number;
  readonly pixels: Uint8Array;

  constructor(width: number, height: number, background: Color = WHITE) {
    this.width = width;
    this.height = height;
    this.pixels = new Uint8Array(width * height * 4);
    this.clear(background);
  }

  clear(color: Color): void {
    for (let i = 0; i < this.width * this.height; i++) {
      this.pixels.set(color, i * 4);
    }
  }

  set(x: number, y: number, color: Color): void {
    x = Math.round(x);
    y = Math.round(y);
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    this.pixels.set(color, (y * this.width + x) * 4);
  }

  fillRect(x0: number, y0: number, w: number, h: number, color: Color): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.set(x, y, color);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Color, thick = 1): void {
    // Bresenham with optional square pen
    let ix0 = Math.round(x0);
    let iy0 = Math.round(y0);
    const ix1 = Math.round(x1);
    const iy1 = Math.round(y1);
    const dx = Math.abs(ix1 - ix0);
    const dy = -Math.abs(iy1 - iy0);
    const sx = ix0 < ix1 ? 1 : -1;
    const sy = iy0 < iy1 ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      if (thick <= 1) {
        this.set(ix0, iy0, color);
      } else {
        const r = Math.floor(thick / 2);
        this.fillRect(ix0 - r, iy0 - r, thick, thick, color);
      }
      if (ix0 === ix1 && iy0 === iy1) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        ix0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        iy0 += sy;
      }
    }
  }

  text(x: number, y: number, s: string, color: Color, scale = 1): void {
    let cx = Math.round(x);
    const cy = Math.round(y);
    for (const ch of s) {
      const rows = glyphRows(ch);
      for (let gy = 0; gy < GLYPH_H; gy++) {
        for (let gx = 0; gx < GLYPH_W; gx++) {
          if ((rows[gy] >> (GLYPH_W - 1 - gx)) & 1) {
            this.fillRect(cx + gx * scale, cy + gy * scale, scale, scale, color);
          }
        }
      }
      cx += (GLYPH_W + 1) * scale;
    }
  }

  textCentered(cx: number, y: number, s: string, color: Color, scale = 1): void {
    this.text(cx - textWidth(s, scale) / 2, y, s, color, scale);
  }

  toPng(): Buffer {
    return encodePng(this.width, this.height, this.pixels);
  }
}

/** Short scientific/compact label for tick values. */
export function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    const s = v.toPrecision(3);
    return String(parseFloat(s));
  }
  return v.toExponential(1).replace("e-", "e-").replace("e+", "e+");
}
