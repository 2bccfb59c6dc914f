/** The four figure kinds, each a pure function of parsed CSV content.
 *
 * trajectory: one dot per CSV row (the producer samples rows every 0.05 s),
 * overlaying each input series plus the ideal-turn path from the first input.
 * orientation: tilt-angle-vs-time lines, one per input, for variant overlays.
 * survival: blue/red outcome dots on the impulse plane with the training
 * distribution boundary drawn as black circles.
 * reward-curve: mean iteration reward over training.
 */

import { SchemaError, Table, column, requireColumns, requireRows } from "./csv.js";
import { frame, legend, pad, seriesColor } from "./chart.js";
import { LABEL_STYLE } from "./svg.js";

export interface SeriesInput {
  name: string;
  table: Table;
}

export function trajectoryFigure(inputs: SeriesInput[], title?: string): string {
  if (inputs.length === 0) {
    throw new SchemaError("trajectory figure needs at least one input");
  }
  const xs: number[] = [];
  const ys: number[] = [];
  for (const input of inputs) {
    requireColumns(input.table, ["t", "x", "y"], "trajectory");
    requireRows(input.table, "trajectory");
    xs.push(...column(input.table, "x"));
    ys.push(...column(input.table, "y"));
  }
  const first = inputs[0].table;
  const hasIdeal = first.header.includes("ideal_x") && first.header.includes("ideal_y");
  if (hasIdeal) {
    xs.push(...column(first, "ideal_x"));
    ys.push(...column(first, "ideal_y"));
  }
  const f = frame({
    title,
    xLabel: "x [m]",
    yLabel: "y [m]",
    xDomain: pad([Math.min(...xs), Math.max(...xs)]),
    yDomain: pad([Math.min(...ys), Math.max(...ys)]),
    equalAspect: true,
  });
  if (hasIdeal) {
    const ix = column(first, "ideal_x");
    const iy = column(first, "ideal_y");
    ix.forEach((v, i) => f.svg.circle(f.x(v), f.y(iy[i]), 2.0, "fill:#9ecbff"));
  }
  inputs.forEach((input, s) => {
    const x = column(input.table, "x");
    const y = column(input.table, "y");
    x.forEach((v, i) => f.svg.circle(f.x(v), f.y(y[i]), 2.4, `fill:${seriesColor(s)}`));
  });
  const entries = inputs.map((input, s) => ({ label: input.name, color: seriesColor(s) }));
  if (hasIdeal) {
    entries.push({ label: "ideal", color: "#9ecbff" });
  }
  legend(f, entries);
  return f.svg.render();
}

export function orientationFigure(inputs: SeriesInput[], title?: string): string {
  if (inputs.length === 0) {
    throw new SchemaError("orientation figure needs at least one input");
  }
  const ts: number[] = [];
  const angles: number[] = [];
  for (const input of inputs) {
    requireColumns(input.table, ["t", "angle_deg"], "orientation");
    requireRows(input.table, "orientation");
    ts.push(...column(input.table, "t"));
    angles.push(...column(input.table, "angle_deg"));
  }
  const f = frame({
    title,
    xLabel: "time [s]",
    yLabel: "angle(body z, world z) [deg]",
    xDomain: [0, Math.max(...ts)],
    yDomain: pad([Math.min(0, Math.min(...angles)), Math.max(...angles)]),
  });
  inputs.forEach((input, s) => {
    const t = column(input.table, "t");
    const a = column(input.table, "angle_deg");
    f.svg.polyline(
      t.map((v, i) => [f.x(v), f.y(a[i])] as [number, number]),
      `stroke:${seriesColor(s)};stroke-width:2`,
    );
  });
  legend(f, inputs.map((input, s) => ({ label: input.name, color: seriesColor(s) })));
  return f.svg.render();
}

export function survivalFigure(
  input: SeriesInput,
  boundaryRadii: number[],
  title?: string,
): string {
  requireColumns(input.table, ["jy", "jz", "survived"], "survival");
  requireRows(input.table, "survival");
  const jy = column(input.table, "jy");
  const jz = column(input.table, "jz");
  const survived = column(input.table, "survived");
  const lim = Math.max(
    ...jy.map(Math.abs),
    ...jz.map(Math.abs),
    ...boundaryRadii.map(Math.abs),
    1,
  );
  const f = frame({
    title,
    xLabel: "impulse Jy [N s]",
    yLabel: "impulse Jz [N s]",
    xDomain: pad([-lim, lim]),
    yDomain: pad([-lim, lim]),
    equalAspect: true,
  });
  for (const r of boundaryRadii) {
    const rx = Math.abs(f.x(r) - f.x(0));
    f.svg.circle(f.x(0), f.y(0), rx, "fill:none;stroke:#000000;stroke-width:1.5");
  }
  jy.forEach((v, i) => {
    const color = survived[i] > 0 ? "#1f6fd6" : "#d62728";
    f.svg.circle(f.x(v), f.y(jz[i]), 4.0, `fill:${color}`);
  });
  f.svg.text(f.svg.width - 150, 44, "blue = survived", LABEL_STYLE);
  f.svg.text(f.svg.width - 150, 60, "red = failed", LABEL_STYLE);
  f.svg.text(f.svg.width - 150, 76, "black = training band", LABEL_STYLE);
  return f.svg.render();
}

export function rewardCurveFigure(inputs: SeriesInput[], title?: string): string {
  if (inputs.length === 0) {
    throw new SchemaError("reward-curve figure needs at least one input");
  }
  const its: number[] = [];
  const rewards: number[] = [];
  for (const input of inputs) {
    requireColumns(input.table, ["iteration", "mean_reward"], "reward-curve");
    requireRows(input.table, "reward-curve");
    its.push(...column(input.table, "iteration"));
    rewards.push(...column(input.table, "mean_reward"));
  }
  const f = frame({
    title,
    xLabel: "iteration",
    yLabel: "mean step reward",
    xDomain: [0, Math.max(...its)],
    yDomain: pad([Math.min(0, Math.min(...rewards)), Math.max(...rewards)]),
  });
  inputs.forEach((input, s) => {
    const it = column(input.table, "iteration");
    const r = column(input.table, "mean_reward");
    f.svg.polyline(
      it.map((v, i) => [f.x(v), f.y(r[i])] as [number, number]),
      `stroke:${seriesColor(s)};stroke-width:1.5`,
    );
  });
  legend(f, inputs.map((input, s) => ({ label: input.name, color: seriesColor(s) })));
  return f.svg.render();
}
