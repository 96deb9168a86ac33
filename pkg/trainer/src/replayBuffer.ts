// Bounded transition store with uniform sampling.  Seeding from a dataset
// file goes through the environment service: each episode is reset by seed
// and its action tape replayed, which reproduces the recorded states exactly
// (the environment is deterministic) and cross-checks the stored rewards.

import * as fs from "fs";
import { EnvClient } from "./envClient";
import { Rng } from "./rng";

export interface Transition {
  state: Float32Array;
  // Demonstration tapes replay bit-exactly, so actions keep full precision.
  action: Float64Array | Float32Array;
  reward: number;
  nextState: Float32Array;
  done: boolean;
}

export class ReplayBuffer {
  private store: Transition[] = [];
  private cursor = 0;

  constructor(public readonly capacity: number) {}

  get size(): number {
    return this.store.length;
  }

  add(t: Transition): void {
    if (this.store.length < this.capacity) {
      this.store.push(t);
    } else {
      this.store[this.cursor] = t;
      this.cursor = (this.cursor + 1) % this.capacity;
    }
  }

  sample(batch: number, rng: Rng): Transition[] {
    const out: Transition[] = [];
    for (let i = 0; i < batch; i++) {
      out.push(this.store[rng.int(this.store.length)]);
    }
    return out;
  }
}

export interface DatasetHeader {
  format: string;
  version: number;
  episodes: number;
  transitions: number;
}

export interface DatasetEpisode {
  seed: number | null;
  reward: number;
  len: number;
  sha: string;
  actions: number[][];
  rewards: number[];
}

export function readDataset(path: string): {
  header: DatasetHeader;
  episodes: DatasetEpisode[];
} {
  const lines = fs
    .readFileSync(path, "utf8")
    .split("\n")
    .filter((l) => l.trim().length > 0)
    .map((l) => JSON.parse(l));
  const header = lines[0] as DatasetHeader;
  if (header.format !== "roadsynth-episodes") {
    throw new Error(`not an episode dataset: ${header.format}`);
  }
  const episodes = lines.slice(1) as DatasetEpisode[];
  if (episodes.length !== header.episodes) {
    throw new Error(
      `header says ${header.episodes} episodes, file has ${episodes.length}`
    );
  }
  const total = episodes.reduce((n, e) => n + e.actions.length, 0);
  if (total !== header.transitions) {
    throw new Error(
      `header says ${header.transitions} transitions, file has ${total}`
    );
  }
  return { header, episodes };
}

export async function seedBuffer(
  path: string,
  env: EnvClient,
  capacity?: number
): Promise<ReplayBuffer> {
  const { header, episodes } = readDataset(path);
  const buffer = new ReplayBuffer(
    Math.max(capacity ?? 0, header.transitions, 1)
  );
  for (const ep of episodes) {
    if (ep.seed === null) {
      throw new Error("unseeded episodes are not supported by the trainer");
    }
    let state = await env.reset(ep.seed);
    for (let k = 0; k < ep.actions.length; k++) {
      const action = Float64Array.from(ep.actions[k]);
      const r = await env.step(action);
      if (r.reward !== ep.rewards[k]) {
        throw new Error(
          `dataset integrity: episode seed=${ep.seed} reward mismatch at ${k}`
        );
      }
      buffer.add({
        state,
        action,
        reward: r.reward,
        nextState: r.state,
        done: r.terminated,
      });
      state = r.state;
    }
  }
  return buffer;
}
