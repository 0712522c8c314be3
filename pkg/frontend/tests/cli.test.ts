import { spawnSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

const ROOT = fileURLToPath(new URL("..", import.meta.url));
const CLI = join(ROOT, "dist", "cli.js");
const FIXTURES = join(ROOT, "fixtures");

function cli(...args: string[]): { status: number | null; stdout: string; stderr: string } {
  const r = spawnSync("node", [CLI, ...args], { encoding: "utf8" });
  return { status: r.status, stdout: r.stdout, stderr: r.stderr };
}

function scratch(name: string): string {
  return join(mkdtempSync(join(tmpdir(), "naimstab-cli-")), name);
}

describe("cli render", () => {
  it("renders a sphere figure and reports the curve counts", () => {
    const out = scratch("fig1.svg");
    const r = cli("render", "--manifest", join(FIXTURES, "fig1", "manifest.json"),
      "--kind", "sphere3d", "--out", out);
    expect(r.status).toBe(0);
    expect(r.stdout).toContain("6 reference + 6 closed-loop curves");
    expect(readFileSync(out, "utf8").startsWith("<svg ")).toBe(true);
  });

  it("is byte-stable across re-renders", () => {
    const a = scratch("a.svg");
    const b = scratch("b.svg");
    const manifest = join(FIXTURES, "sweep", "manifest.json");
    expect(cli("render", "--manifest", manifest, "--kind", "decay_semilog", "--out", a).status).toBe(0);
    expect(cli("render", "--manifest", manifest, "--kind", "decay_semilog", "--out", b).status).toBe(0);
    expect(readFileSync(a)).toEqual(readFileSync(b));
  });

  it("renders rotation entries from an SO(3) run", () => {
    const out = scratch("so3.svg");
    const r = cli("render", "--manifest", join(FIXTURES, "so3", "manifest.json"),
      "--kind", "so3_components", "--out", out);
    expect(r.status).toBe(0);
    expect(r.stdout).toContain("9 panels, 2 trajectories");
  });

  it("fails with a schema message on a kind mismatch and writes no file", () => {
    const out = scratch("bad.svg");
    const r = cli("render", "--manifest", join(FIXTURES, "so3", "manifest.json"),
      "--kind", "sphere3d", "--out", out);
    expect(r.status).toBe(1);
    expect(r.stderr).toContain("render error");
    expect(r.stderr).toContain("needs 3-component states");
    expect(existsSync(out)).toBe(false);
  });

  it("fails on a missing manifest", () => {
    const out = scratch("bad.svg");
    const r = cli("render", "--manifest", join(FIXTURES, "nope.json"),
      "--kind", "sphere3d", "--out", out);
    expect(r.status).toBe(1);
    expect(r.stderr).toContain("cannot read manifest");
    expect(existsSync(out)).toBe(false);
  });

  it("rejects an unknown plot kind as a usage error", () => {
    const r = cli("render", "--manifest", join(FIXTURES, "fig1", "manifest.json"),
      "--kind", "piechart", "--out", scratch("x.svg"));
    expect(r.status).toBe(2);
    expect(r.stderr).toContain("usage error");
  });

  it("rejects a bare invocation as a usage error", () => {
    const r = cli();
    expect(r.status).toBe(2);
    expect(r.stderr).toContain("usage error");
  });
});
