/**
 * Client for the `pixelctrl serve` stdio protocol.
 *
 * The server speaks one JSON object per line in each direction;
 * observations travel base64-encoded. A server process hosts one
 * vectorized environment at a time, created with {@link EnvClient.make}.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type ServerProcess = ChildProcessByStdio<Writable, Readable, null>;

/** Mirrors the server's environment configuration; all fields optional. */
export interface EnvConfig {
  model?: string;
  batch?: number;
  width?: number;
  height?: number;
  distractor_mode?: "none" | "color" | "video";
  video_pack_path?: string | null;
  action_repeat?: number;
  observation?: "rgb" | "grayscale";
  floor_in_background?: boolean | null;
  seed?: number;
  threads?: number;
  logical_batch?: number | null;
  env_offset?: number;
}

export interface MakeResult {
  batch: number;
  /** [height, width, channels] of a single env's observation. */
  obsShape: [number, number, number];
  nJoints: number;
  /** Raw uint8 pixels for the whole batch, C-order (batch, H, W, C). */
  obs: Uint8Array;
}

export interface StepResult {
  obs: Uint8Array;
  reward: number[];
  done: boolean[];
  /** Finished-episode totals; nonzero only where done is true. */
  episodeReturn: number[];
  episodeLength: number[];
  /** Server step counter after this step. */
  t: number;
}

export interface LaunchOptions {
  /** Server executable; defaults to `pixelctrl` on PATH. */
  command?: string;
  /** Arguments before the implicit `serve`; rarely needed. */
  args?: string[];
}

interface Pending {
  resolve: (value: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

/** Thrown when the server answers `{"ok": false}`. */
export class ServerError extends Error {}

/**
 * One spawned `pixelctrl serve` process hosting one vectorized env.
 *
 * Requests are strictly ordered: the protocol answers one line per
 * request line, so responses are matched FIFO.
 */
export class EnvClient {
  private proc: ServerProcess;
  private lines: Interface;
  private pending: Pending[] = [];
  private exited: Error | null = null;

  private constructor(proc: ServerProcess) {
    this.proc = proc;
    this.lines = createInterface({ input: proc.stdout });
    this.lines.on("line", (line) => {
      const next = this.pending.shift();
      if (!next) return; // unsolicited output; protocol never does this
      try {
        next.resolve(JSON.parse(line) as Record<string, unknown>);
      } catch (e) {
        next.reject(new Error(`unparseable server response: ${line}`));
      }
    });
    proc.on("exit", (code) => {
      this.exited = new Error(`server exited with code ${code}`);
      for (const p of this.pending.splice(0)) p.reject(this.exited);
    });
    proc.on("error", (err) => {
      this.exited = err;
      for (const p of this.pending.splice(0)) p.reject(err);
    });
  }

  /** Spawn a server process. The returned client owns the process. */
  static launch(options: LaunchOptions = {}): EnvClient {
    const command = options.command ?? "pixelctrl";
    const args = [...(options.args ?? []), "serve"];
    const proc = spawn(command, args, { stdio: ["pipe", "pipe", "inherit"] });
    return new EnvClient(proc);
  }

  private request(body: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.exited) return Promise.reject(this.exited);
    return new Promise((resolve, reject) => {
      this.pending.push({
        resolve: (resp) => {
          if (resp.ok === true) resolve(resp);
          else reject(new ServerError(String(resp.error ?? "unknown server error")));
        },
        reject,
      });
      this.proc.stdin.write(JSON.stringify(body) + "\n");
    });
  }

  /** Create (or replace) the hosted env and return its first observation. */
  async make(config: EnvConfig): Promise<MakeResult> {
    const resp = await this.request({ cmd: "make", config });
    return {
      batch: resp.batch as number,
      obsShape: resp.obs_shape as [number, number, number],
      nJoints: resp.n_joints as number,
      obs: decodeObs(resp.obs_b64 as string),
    };
  }

  /** Advance one control step. `actions` is (batch, nJoints) in [-1, 1]. */
  async step(actions: number[][]): Promise<StepResult> {
    const resp = await this.request({ cmd: "step", actions });
    return {
      obs: decodeObs(resp.obs_b64 as string),
      reward: resp.reward as number[],
      done: resp.done as boolean[],
      episodeReturn: resp.episode_return as number[],
      episodeLength: resp.episode_length as number[],
      t: resp.t as number,
    };
  }

  /** Re-render the current state's observation without stepping. */
  async observe(): Promise<Uint8Array> {
    const resp = await this.request({ cmd: "observe" });
    return decodeObs(resp.obs_b64 as string);
  }

  /** Shut the server down cleanly. The client is unusable afterwards. */
  async close(): Promise<void> {
    try {
      await this.request({ cmd: "close" });
    } finally {
      this.proc.stdin.end();
    }
  }

  /** Last-resort teardown for error paths. */
  kill(): void {
    this.proc.kill();
  }
}

function decodeObs(b64: string): Uint8Array {
  return new Uint8Array(Buffer.from(b64, "base64"));
}

/** All-zero action matrix sized for an env. */
export function zeroActions(batch: number, nJoints: number): number[][] {
  return Array.from({ length: batch }, () => new Array<number>(nJoints).fill(0));
}
