#!/usr/bin/env node
/**
 * Figure renderer CLI:
 *
 *   dgnn-plot --kind <loss-curve|field-1d|field-2d-heatmap|error-map|ablation-table>
 *             --in run/telemetry.csv [more.csv ...] --out figure.png
 *             [--title TEXT] [--width N] [--height N]
 */

import { writeFileSync } from "node:fs";
import { PlotJob, PlotKind, render } from "./charts.js";
import { SchemaError } from "./csv.js";

const KINDS: PlotKind[] = [
  "loss-curve",
  "field-1d",
  "field-2d-heatmap",
  "error-map",
  "ablation-table",
];

export function parseArgs(argv: string[]): PlotJob {
  let kind: string | undefined;
  const inputs: string[] = [];
  let output: string | undefined;
  let title: string | undefined;
  let width: number | undefined;
  let height: number | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new UsageError(`missing value after ${a}`);
      return argv[++i];
    };
    if (a === "--kind") kind = next();
    else if (a === "--in") {
      inputs.push(next());
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
        inputs.push(argv[++i]);
      }
    } else if (a === "--out") output = next();
    else if (a === "--title") title = next();
    else if (a === "--width") width = parseInt(next(), 10);
    else if (a === "--height") height = parseInt(next(), 10);
    else throw new UsageError(`unknown argument ${a}`);
  }
  if (!kind || !output || inputs.length === 0) {
    throw new UsageError("required: --kind, --in, --out");
  }
  if (!KINDS.includes(kind as PlotKind)) {
    throw new UsageError(`--kind must be one of ${KINDS.join(", ")}`);
  }
  return { kind: kind as PlotKind, inputs, output, title, width, height };
}

export class UsageError extends Error {}

export function main(argv: string[]): number {
  let job: PlotJob;
  try {
    job = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const raster = render(job);
    writeFileSync(job.output, raster.toPng());
    console.log(`${job.kind} -> ${job.output} (${raster.width}x${raster.height})`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(`error: ${(err as Error).message}`);
    }
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
