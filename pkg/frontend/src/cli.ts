/** Standalone figure renderer.
 *
 * Usage:
 *   plot trajectory --input run.csv [--input other.csv] [--label name]... --out fig.svg
 *   plot orientation --input a.csv --input b.csv --out fig.svg
 *   plot survival --input grid.csv [--boundary 50,100 | --summary impulse_summary.json] --out fig.svg
 *   plot reward-curve --input iterations.csv --out fig.svg
 *
 * Exit codes: 0 ok, 2 usage or schema error.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { SchemaError, parseCsv } from "./csv.js";
import {
  SeriesInput,
  orientationFigure,
  rewardCurveFigure,
  survivalFigure,
  trajectoryFigure,
} from "./figures.js";

interface Args {
  inputs: string[];
  labels: string[];
  out: string | null;
  boundary: number[] | null;
  summary: string | null;
  title: string | null;
}

export function parseArgs(argv: string[]): { kind: string; args: Args } {
  const kind = argv[0];
  const args: Args = { inputs: [], labels: [], out: null, boundary: null, summary: null, title: null };
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`flag ${flag} needs a value`);
    }
    switch (flag) {
      case "--input":
        args.inputs.push(value);
        break;
      case "--label":
        args.labels.push(value);
        break;
      case "--out":
        args.out = value;
        break;
      case "--boundary":
        args.boundary = value.split(",").map(Number);
        break;
      case "--summary":
        args.summary = value;
        break;
      case "--title":
        args.title = value;
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (!kind) {
    throw new UsageError("missing figure kind (trajectory | orientation | survival | reward-curve)");
  }
  if (args.inputs.length === 0) {
    throw new UsageError("at least one --input is required");
  }
  if (!args.out) {
    throw new UsageError("--out is required");
  }
  return { kind, args };
}

class UsageError extends Error {}

function loadSeries(args: Args): SeriesInput[] {
  return args.inputs.map((path, i) => ({
    name: args.labels[i] ?? basename(path).replace(/\.csv$/, ""),
    table: parseCsv(readFileSync(path, "utf8")),
  }));
}

export function render(kind: string, args: Args): string {
  const series = loadSeries(args);
  switch (kind) {
    case "trajectory":
      return trajectoryFigure(series, args.title ?? undefined);
    case "orientation":
      return orientationFigure(series, args.title ?? undefined);
    case "survival": {
      let radii = args.boundary;
      if (!radii && args.summary) {
        const summary = JSON.parse(readFileSync(args.summary, "utf8"));
        radii = summary.training_boundary_radii;
      }
      return survivalFigure(series[0], radii ?? [50, 100], args.title ?? undefined);
    }
    case "reward-curve":
      return rewardCurveFigure(series, args.title ?? undefined);
    default:
      throw new UsageError(`unknown figure kind '${kind}'`);
  }
}

export function main(argv: string[]): number {
  try {
    const { kind, args } = parseArgs(argv);
    const svg = render(kind, args);
    writeFileSync(args.out as string, svg);
    process.stdout.write(`${args.out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError || err instanceof SchemaError) {
      process.stderr.write(`plot-error: ${(err as Error).message}\n`);
      return 2;
    }
    process.stderr.write(`plot-error: ${String(err)}\n`);
    return 2;
  }
}

const isMain = process.argv[1] && import.meta.url.endsWith(basename(process.argv[1]));
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
