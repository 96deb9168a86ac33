// JSON-lines client for the driving environment service.  One request in
// flight at a time: every call writes a line and resolves with the matching
// response line.

import { ChildProcess, spawn } from "child_process";
import * as readline from "readline";

export interface EnvSpec {
  state_dim: number;
  action_dim: number;
  max_steps: number;
  max_accel: number;
  max_decel: number;
  success_reward: number;
}

export interface StepResult {
  state: Float32Array;
  reward: number;
  terminated: boolean;
  truncated: boolean;
  cause: string;
}

export class EnvClient {
  private proc: ChildProcess;
  private lines: AsyncIterableIterator<string>;

  constructor(command: string[] = ["roadsynth", "serve-env"]) {
    this.proc = spawn(command[0], command.slice(1), {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const rl = readline.createInterface({ input: this.proc.stdout! });
    this.lines = rl[Symbol.asyncIterator]();
  }

  private async rpc(request: object): Promise<any> {
    this.proc.stdin!.write(JSON.stringify(request) + "\n");
    const next = await this.lines.next();
    if (next.done) {
      throw new Error("environment service closed its stream");
    }
    const response = JSON.parse(next.value);
    if (!response.ok) {
      throw new Error(`environment error: ${response.error}`);
    }
    return response;
  }

  async spec(): Promise<EnvSpec> {
    return (await this.rpc({ cmd: "spec" })) as EnvSpec;
  }

  async reset(seed: number): Promise<Float32Array> {
    const r = await this.rpc({ cmd: "reset", seed });
    return Float32Array.from(r.state);
  }

  async step(action: ArrayLike<number>): Promise<StepResult> {
    const r = await this.rpc({ cmd: "step", action: Array.from(action) });
    return {
      state: Float32Array.from(r.state),
      reward: r.reward,
      terminated: r.terminated,
      truncated: r.truncated,
      cause: r.info?.cause ?? "none",
    };
  }

  close(): void {
    this.proc.stdin!.end();
    this.proc.kill();
  }
}
