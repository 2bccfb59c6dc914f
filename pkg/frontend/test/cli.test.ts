import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { test } from "node:test";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));
const CLI = join(HERE, "..", "src", "cli.js");
const FIXTURES = join(HERE, "..", "..", "fixtures");

function run(args: string[]) {
  return spawnSync(process.execPath, [CLI, ...args], { encoding: "utf8" });
}

test("cli renders and is byte-stable across repeated runs", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  const out1 = join(dir, "a.svg");
  const out2 = join(dir, "b.svg");
  const args = (out: string) => [
    "orientation",
    "--input", join(FIXTURES, "orient_none.csv"),
    "--input", join(FIXTURES, "orient_viper.csv"),
    "--label", "none", "--label", "viperx300s",
    "--out", out,
  ];
  assert.equal(run(args(out1)).status, 0);
  assert.equal(run(args(out2)).status, 0);
  assert.deepEqual(readFileSync(out1), readFileSync(out2));
  assert.ok(readFileSync(out1, "utf8").startsWith("<svg "));
});

test("cli survival reads the boundary radii from the summary json", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  const out = join(dir, "grid.svg");
  const res = run([
    "survival",
    "--input", join(FIXTURES, "impulse_grid.csv"),
    "--summary", join(FIXTURES, "impulse_summary.json"),
    "--out", out,
  ]);
  assert.equal(res.status, 0);
  const svg = readFileSync(out, "utf8");
  assert.equal((svg.match(/fill:none;stroke:#000000/g) ?? []).length, 2);
});

test("cli trajectory writes the figure and reports the path", () => {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  const out = join(dir, "traj.svg");
  const res = run([
    "trajectory",
    "--input", join(FIXTURES, "traj_tail.csv"),
    "--input", join(FIXTURES, "traj_none.csv"),
    "--out", out, "--title", "135 deg turn at 4.5 m/s",
  ]);
  assert.equal(res.status, 0);
  assert.equal(res.stdout.trim(), out);
  assert.ok(readFileSync(out, "utf8").includes("135 deg turn at 4.5 m/s"));
});

test("cli exits 2 with a named column on schema mismatch", () => {
  const res = run([
    "trajectory",
    "--input", join(FIXTURES, "bad_traj.csv"),
    "--out", join(tmpdir(), "never.svg"),
  ]);
  assert.equal(res.status, 2);
  assert.ok(res.stderr.includes("plot-error:"));
  assert.ok(res.stderr.includes("'y'"));
});

test("cli exits 2 on an empty grid instead of writing an image", () => {
  const res = run([
    "survival",
    "--input", join(FIXTURES, "empty_grid.csv"),
    "--out", join(tmpdir(), "never2.svg"),
  ]);
  assert.equal(res.status, 2);
  assert.ok(res.stderr.includes("no data rows"));
});

test("cli exits 2 on unknown figure kinds and missing flags", () => {
  assert.equal(run(["sparkline", "--input", "x", "--out", "y"]).status, 2);
  assert.equal(run(["trajectory", "--out", "y.svg"]).status, 2);
  assert.equal(run(["trajectory", "--input", join(FIXTURES, "traj_tail.csv")]).status, 2);
});
