// Off-policy training loop against the environment service, with periodic
// evaluation on fresh seeds and a tabular curve file.

import * as fs from "fs";
import { EnvClient } from "./envClient";
import { ReplayBuffer, seedBuffer } from "./replayBuffer";
import { Rng } from "./rng";
import { DEFAULT_CONFIG, Td3, Td3Config } from "./td3";

export interface TrainOptions {
  algo: "td3" | "td3bc";
  dataset?: string;            // seeds the buffer when given
  steps: number;
  batchSize: number;
  evalEvery: number;
  evalEpisodes: number;
  explorationNoise: number;    // fraction of the action scale
  warmupSteps: number;         // random actions before the policy takes over
  bufferCapacity: number;
  // Gradient steps on the seeded buffer before any environment stepping:
  // the offline phase of the cloning variant.
  pretrainSteps: number;
  seed: number;
  curveFile?: string;
  envCommand: string[];
  // Training episodes use seeds from trainSeedBase upward; evaluation uses a
  // disjoint range.
  trainSeedBase: number;
  evalSeedBase: number;
  log?: (msg: string) => void;
}

export const DESK_DEFAULTS: Omit<TrainOptions, "algo"> = {
  steps: 200_000,
  batchSize: 128,
  evalEvery: 5_000,
  evalEpisodes: 50,
  explorationNoise: 0.1,
  warmupSteps: 500,
  bufferCapacity: 400_000,
  pretrainSteps: 0,
  seed: 1,
  envCommand: ["roadsynth", "serve-env"],
  trainSeedBase: 100_000,
  evalSeedBase: 900_000,
};

export interface CurvePoint {
  step: number;
  successRate: number;
}

export async function evaluate(
  agent: Td3,
  env: EnvClient,
  episodes: number,
  seedBase: number,
  successThreshold: number,
  maxSteps: number
): Promise<number> {
  if (episodes <= 0) {
    console.warn("evaluate called with no episodes; reporting 0");
    return 0;
  }
  let successes = 0;
  for (let e = 0; e < episodes; e++) {
    let state = await env.reset(seedBase + e);
    let total = 0;
    for (let k = 0; k < maxSteps; k++) {
      const r = await env.step(agent.act(state));
      total += r.reward;
      state = r.state;
      if (r.terminated || r.truncated) break;
    }
    if (total >= successThreshold) successes += 1;
  }
  return successes / episodes;
}

export async function train(opts: TrainOptions): Promise<{
  agent: Td3;
  curve: CurvePoint[];
}> {
  const log = opts.log ?? ((m: string) => console.error(m));
  const env = new EnvClient(opts.envCommand);
  const spec = await env.spec();
  const cfg: Td3Config = {
    ...DEFAULT_CONFIG,
    stateDim: spec.state_dim,
    actionDim: spec.action_dim,
    actionScale: spec.max_accel,
    useBc: opts.algo === "td3bc",
    seed: opts.seed,
  };
  const agent = new Td3(cfg);
  const rng = new Rng(opts.seed * 7919 + 17);
  const buffer = opts.dataset
    ? await seedBuffer(opts.dataset, env, opts.bufferCapacity)
    : new ReplayBuffer(opts.bufferCapacity);
  if (opts.dataset) {
    log(`buffer seeded with ${buffer.size} transitions from ${opts.dataset}`);
  }

  const curve: CurvePoint[] = [];
  if (opts.pretrainSteps > 0 && buffer.size >= opts.batchSize) {
    for (let k = 1; k <= opts.pretrainSteps; k++) {
      agent.update(buffer.sample(opts.batchSize, rng), rng);
      if (k % opts.evalEvery === 0 || k === opts.pretrainSteps) {
        const rate = await evaluate(
          agent, env, opts.evalEpisodes, opts.evalSeedBase,
          spec.success_reward, spec.max_steps
        );
        curve.push({ step: k - opts.pretrainSteps, successRate: rate });
        log(`pretrain ${k}/${opts.pretrainSteps}: eval success rate ` +
            `${(100 * rate).toFixed(1)}%`);
        if (opts.curveFile) writeCurve(opts.curveFile, curve);
      }
    }
  }
  let episodeSeed = opts.trainSeedBase;
  let state = await env.reset(episodeSeed);
  let stepsInEpisode = 0;

  for (let step = 1; step <= opts.steps; step++) {
    let action: Float32Array;
    if (buffer.size < opts.warmupSteps && !opts.dataset) {
      action = new Float32Array(cfg.actionDim);
      for (let i = 0; i < action.length; i++) {
        action[i] = rng.uniform(-cfg.actionScale, cfg.actionScale);
      }
    } else {
      action = agent.actNoisy(state, rng, opts.explorationNoise);
    }
    const r = await env.step(action);
    buffer.add({
      state,
      action,
      reward: r.reward,
      nextState: r.state,
      done: r.terminated,
    });
    state = r.state;
    stepsInEpisode += 1;
    if (r.terminated || r.truncated || stepsInEpisode >= spec.max_steps) {
      episodeSeed += 1;
      state = await env.reset(episodeSeed);
      stepsInEpisode = 0;
    }

    if (buffer.size >= opts.batchSize) {
      agent.update(buffer.sample(opts.batchSize, rng), rng);
    }

    if (step % opts.evalEvery === 0 || step === opts.steps) {
      const rate = await evaluate(
        agent, env, opts.evalEpisodes, opts.evalSeedBase,
        spec.success_reward, spec.max_steps
      );
      curve.push({ step, successRate: rate });
      log(`step ${step}: eval success rate ${(100 * rate).toFixed(1)}%`);
      if (opts.curveFile) {
        writeCurve(opts.curveFile, curve);
      }
      // Evaluation shares the connection: start a fresh training episode.
      episodeSeed += 1;
      state = await env.reset(episodeSeed);
      stepsInEpisode = 0;
    }
  }
  env.close();
  return { agent, curve };
}

export function writeCurve(path: string, curve: CurvePoint[]): void {
  const rows = ["step\tsuccess_rate"];
  for (const p of curve) {
    rows.push(`${p.step}\t${p.successRate.toFixed(4)}`);
  }
  fs.writeFileSync(path, rows.join("\n") + "\n");
}
