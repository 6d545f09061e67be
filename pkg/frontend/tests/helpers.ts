import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

export const REPO_ROOT = resolve(
  dirname(fileURLToPath(import.meta.url)),
  "../..",
);
export const PYTHON_PATH = join(REPO_ROOT, "src");
export const PYTHON = process.env.T2E_PYTHON ?? "python3";

/** Deterministic action scripts shared with the engine-side scripted policy. */
export function makeScript(
  seed: number,
  captors: number,
  steps: number,
): { captors: number[][]; target: number[] } {
  let state = (seed * 2654435761 + 1) >>> 0;
  const next = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state % 5;
  };
  const rows: number[][] = [];
  for (let i = 0; i < captors; i++) {
    rows.push(Array.from({ length: steps }, next));
  }
  return { captors: rows, target: Array.from({ length: steps }, next) };
}

export function writeScript(
  script: { captors: number[][]; target: number[] },
  dir: string,
): string {
  const path = join(dir, "script.json");
  writeFileSync(path, JSON.stringify(script));
  return path;
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Run the engine CLI synchronously; throws on non-zero exit. */
export function runCli(args: string[]): string {
  return execFileSync(PYTHON, ["-m", "t2e", ...args], {
    env: { ...process.env, PYTHONPATH: PYTHON_PATH },
    encoding: "utf8",
    stdio: ["ignore", "pipe", "pipe"],
  });
}
