// Core trainer invariants: deterministic construction, the exact reduction
// of the cloning variant to plain TD3, and buffer behavior.

import { beforeAll, describe, expect, it } from "vitest";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "../src/backend";
import { Rng } from "../src/rng";
import { ReplayBuffer, Transition } from "../src/replayBuffer";
import { DEFAULT_CONFIG, Td3, Td3Config } from "../src/td3";

const SMALL: Td3Config = {
  ...DEFAULT_CONFIG,
  stateDim: 12,
  actionDim: 3,
  actionScale: 0.25,
  hidden: [16, 16],
  seed: 7,
};

function fakeBatch(n: number, cfg: Td3Config, seed = 5): Transition[] {
  const rng = new Rng(seed);
  const out: Transition[] = [];
  for (let i = 0; i < n; i++) {
    const state = new Float32Array(cfg.stateDim);
    const nextState = new Float32Array(cfg.stateDim);
    const action = new Float32Array(cfg.actionDim);
    for (let j = 0; j < cfg.stateDim; j++) {
      state[j] = rng.normal();
      nextState[j] = rng.normal();
    }
    for (let j = 0; j < cfg.actionDim; j++) {
      action[j] = rng.uniform(-cfg.actionScale, cfg.actionScale);
    }
    out.push({ state, action, reward: rng.uniform(0, 2), nextState, done: false });
  }
  return out;
}

beforeAll(async () => {
  await initBackend();
});

describe("rng", () => {
  it("is deterministic per seed", () => {
    const a = new Rng(42);
    const b = new Rng(42);
    for (let i = 0; i < 50; i++) {
      expect(a.next()).toBe(b.next());
    }
  });
});

describe("replay buffer", () => {
  it("caps its size and overwrites oldest", () => {
    const buf = new ReplayBuffer(4);
    const batch = fakeBatch(6, SMALL);
    batch.forEach((t) => buf.add(t));
    expect(buf.size).toBe(4);
  });

  it("samples uniformly with the provided rng", () => {
    const buf = new ReplayBuffer(8);
    fakeBatch(8, SMALL).forEach((t) => buf.add(t));
    const a = buf.sample(5, new Rng(3)).map((t) => t.reward);
    const b = buf.sample(5, new Rng(3)).map((t) => t.reward);
    expect(a).toEqual(b);
  });
});

describe("td3 core", () => {
  it("same seed gives identical initial weights", () => {
    const a = new Td3(SMALL);
    const b = new Td3(SMALL);
    const wa = a.weightsSnapshot();
    const wb = b.weightsSnapshot();
    expect(wa.length).toBe(wb.length);
    wa.forEach((w, i) => expect(Array.from(w)).toEqual(Array.from(wb[i])));
  });

  it("actions respect the scale", () => {
    const agent = new Td3(SMALL);
    const state = new Float32Array(SMALL.stateDim).fill(0.3);
    const a = agent.act(state);
    a.forEach((x) => expect(Math.abs(x)).toBeLessThanOrEqual(SMALL.actionScale));
  });

  it("updates run and targets move", () => {
    const agent = new Td3(SMALL);
    const before = agent.actorTarget.getWeights().map((w) => w.dataSync()[0]);
    const batch = fakeBatch(16, SMALL);
    const rng = new Rng(1);
    for (let i = 0; i < 4; i++) {
      agent.update(batch, rng);
    }
    const after = agent.actorTarget.getWeights().map((w) => w.dataSync()[0]);
    expect(before.some((v, i) => v !== after[i])).toBe(true);
  });

  it("cloning variant with the term removed performs TD3's exact actor update", () => {
    // Same seeds, one actor update on one fixed batch: bitwise-equal weights.
    const td3 = new Td3({ ...SMALL, useBc: false });
    const reduced = new Td3({ ...SMALL, useBc: true, bcAlpha: 2.5 });
    // Remove the behavioral-cloning modification entirely.
    (reduced as unknown as { cfg: Td3Config }).cfg = {
      ...reduced.cfg,
      useBc: false,
    };
    const batch = fakeBatch(12, SMALL);
    const states = tf.tensor2d(
      batch.flatMap((t) => Array.from(t.state)),
      [batch.length, SMALL.stateDim]
    );
    const actions = tf.tensor2d(
      batch.flatMap((t) => Array.from(t.action)),
      [batch.length, SMALL.actionDim]
    );
    td3.actorUpdate(states, actions);
    reduced.actorUpdate(states, actions);
    const wa = td3.weightsSnapshot();
    const wb = reduced.weightsSnapshot();
    wa.forEach((w, i) => expect(Array.from(w)).toEqual(Array.from(wb[i])));
    states.dispose();
    actions.dispose();
  });

  it("cloning term changes the update when enabled", () => {
    const plain = new Td3({ ...SMALL, useBc: false });
    const cloning = new Td3({ ...SMALL, useBc: true });
    const batch = fakeBatch(12, SMALL);
    const states = tf.tensor2d(
      batch.flatMap((t) => Array.from(t.state)),
      [batch.length, SMALL.stateDim]
    );
    const actions = tf.tensor2d(
      batch.flatMap((t) => Array.from(t.action)),
      [batch.length, SMALL.actionDim]
    );
    plain.actorUpdate(states, actions);
    cloning.actorUpdate(states, actions);
    const wa = plain.weightsSnapshot();
    const wb = cloning.weightsSnapshot();
    const anyDiff = wa.some(
      (w, i) => !wb[i].every((v, j) => v === w[j])
    );
    expect(anyDiff).toBe(true);
    states.dispose();
    actions.dispose();
  });
});
