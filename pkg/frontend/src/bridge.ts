/**
 * Line-framed JSON transport to an engine bridge subprocess.
 *
 * The engine is spawned as `python -m t2e bridge ...` and speaks one JSON
 * object per line over stdio.  Reads are promise-based with an internal
 * line buffer; the child's stderr is collected for error reporting.
 */

import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";

import { ActionMessage, EngineMessage, EnvConfig } from "./types.js";

export class BridgeClosedError extends Error {}

export class BridgeSession {
  private proc: ChildProcessWithoutNullStreams;
  private buffer = "";
  private lines: string[] = [];
  private waiters: {
    resolve: (line: string) => void;
    reject: (err: Error) => void;
  }[] = [];
  private closed = false;
  private stderr = "";

  constructor(proc: ChildProcessWithoutNullStreams) {
    this.proc = proc;
    proc.stdout.setEncoding("utf8");
    proc.stderr.setEncoding("utf8");
    proc.stdout.on("data", (chunk: string) => this.onData(chunk));
    proc.stderr.on("data", (chunk: string) => {
      this.stderr += chunk;
    });
    proc.on("close", () => this.onClose());
    proc.on("error", () => this.onClose());
  }

  static start(config: EnvConfig, seed: number): BridgeSession {
    const cmd = config.pythonCmd ?? ["python3"];
    const args = [
      ...cmd.slice(1),
      "-m",
      "t2e",
      "bridge",
      "--map",
      config.map,
      "--captors",
      String(config.captors),
      "--seed",
      String(seed),
      "--control",
      config.control ?? "all",
      "--max-steps",
      String(config.maxSteps ?? 500),
      "--speed-ratio",
      String(config.speedRatio ?? 1.0),
      "--mode",
      config.mode ?? "cooperative",
    ];
    if (config.captorPolicy) args.push("--captor-policy", config.captorPolicy);
    if (config.targetPolicy) args.push("--target-policy", config.targetPolicy);
    if (config.logPath) args.push("--log", config.logPath);
    if (config.emitObs) args.push("--emit-obs");
    const env = { ...process.env };
    if (config.pythonPath) {
      env.PYTHONPATH = config.pythonPath;
    }
    const proc = spawn(cmd[0], args, { env, stdio: "pipe" });
    return new BridgeSession(proc as ChildProcessWithoutNullStreams);
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (line.length === 0) continue;
      const waiter = this.waiters.shift();
      if (waiter) {
        waiter.resolve(line);
      } else {
        this.lines.push(line);
      }
    }
  }

  private onClose(): void {
    if (this.closed) return;
    this.closed = true;
    const err = new BridgeClosedError(
      `bridge process closed${this.stderr ? `: ${this.stderr.trim()}` : ""}`,
    );
    for (const waiter of this.waiters.splice(0)) {
      waiter.reject(err);
    }
  }

  /** Read the next protocol message from the engine. */
  async readMessage(timeoutMs = 30_000): Promise<EngineMessage> {
    const line = this.lines.shift() ?? (await this.waitLine(timeoutMs));
    return JSON.parse(line) as EngineMessage;
  }

  private waitLine(timeoutMs: number): Promise<string> {
    if (this.closed) {
      return Promise.reject(
        new BridgeClosedError(
          `bridge process closed${this.stderr ? `: ${this.stderr.trim()}` : ""}`,
        ),
      );
    }
    return new Promise<string>((resolve, reject) => {
      const timer = setTimeout(() => {
        const i = this.waiters.findIndex((w) => w.resolve === wrapped);
        if (i >= 0) this.waiters.splice(i, 1);
        reject(new Error(`no bridge message within ${timeoutMs} ms`));
      }, timeoutMs);
      const wrapped = (line: string) => {
        clearTimeout(timer);
        resolve(line);
      };
      this.waiters.push({
        resolve: wrapped,
        reject: (err) => {
          clearTimeout(timer);
          reject(err);
        },
      });
    });
  }

  sendActions(step: number, actions: Record<number, number>): void {
    const msg: ActionMessage = {
      v: 1,
      step,
      actions: Object.entries(actions).map(([id, a]) => ({
        id: Number(id),
        a,
      })),
    };
    this.proc.stdin.write(JSON.stringify(msg) + "\n");
  }

  /** Wait for the child to exit and report its code. */
  exitCode(): Promise<number | null> {
    if (this.proc.exitCode !== null) {
      return Promise.resolve(this.proc.exitCode);
    }
    return new Promise((resolve) => this.proc.on("close", resolve));
  }

  close(): void {
    if (!this.closed) {
      this.proc.stdin.end();
      this.proc.kill();
    }
  }
}
