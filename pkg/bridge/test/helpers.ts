/** Test scaffolding: spawn the bridge over stdio and exchange NDJSON lines;
 * synthesize trivially segmentable PGM clips. */
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { createInterface, type Interface } from "node:readline";

import { encodePgm } from "../src/image.js";

const here = dirname(fileURLToPath(import.meta.url));
export const repoRoot = join(here, "..", "..", "..");
export const fixturesDir = join(repoRoot, "protocol", "fixtures");
export const mainJs = join(here, "..", "src", "main.js");

export class BridgeProcess {
  private proc: ChildProcess;
  private rl: Interface;
  private pending: ((line: string) => void)[] = [];
  private buffered: string[] = [];

  constructor(args: string[] = []) {
    this.proc = spawn(process.execPath, [mainJs, ...args], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.rl = createInterface({ input: this.proc.stdout!, terminal: false });
    this.rl.on("line", (line) => {
      const waiter = this.pending.shift();
      if (waiter) waiter(line);
      else this.buffered.push(line);
    });
  }

  sendRaw(line: string): void {
    this.proc.stdin!.write(line + "\n");
  }

  readLine(timeoutMs = 5000): Promise<string> {
    const ready = this.buffered.shift();
    if (ready !== undefined) return Promise.resolve(ready);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("timed out waiting for a response")),
        timeoutMs,
      );
      this.pending.push((line) => {
        clearTimeout(timer);
        resolve(line);
      });
    });
  }

  async request(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    this.sendRaw(JSON.stringify(payload));
    return JSON.parse(await this.readLine());
  }

  get alive(): boolean {
    return this.proc.exitCode === null;
  }

  close(): void {
    this.proc.stdin!.end();
    this.proc.kill();
  }
}

export interface ClipSpec {
  frames: number;
  width: number;
  height: number;
  size: number; // square side
  startX: number;
  startY: number;
  stepX: number;
}

/** Bright square on a dark background, moving right; returns frame paths and
 * per-frame object bounding boxes. */
export function makeClip(spec: ClipSpec): { paths: string[]; boxes: number[][] } {
  const dir = mkdtempSync(join(tmpdir(), "bridge-clip-"));
  const paths: string[] = [];
  const boxes: number[][] = [];
  for (let t = 0; t < spec.frames; t++) {
    const data = new Uint8Array(spec.width * spec.height).fill(40);
    const x0 = spec.startX + spec.stepX * t;
    const y0 = spec.startY;
    for (let y = y0; y < y0 + spec.size; y++) {
      for (let x = x0; x < x0 + spec.size; x++) {
        data[y * spec.width + x] = 220;
      }
    }
    const path = join(dir, `frame_${String(t).padStart(4, "0")}.pgm`);
    writeFileSync(path, encodePgm({ width: spec.width, height: spec.height, data }));
    paths.push(path);
    boxes.push([x0, y0, x0 + spec.size - 1, y0 + spec.size - 1]);
  }
  return { paths, boxes };
}
