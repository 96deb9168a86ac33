// Twin-delayed deterministic actor-critic, plus the behavioral-cloning
// variant used when the replay buffer starts from demonstrations.  The only
// difference is the actor loss: TD3 maximizes Q; the variant maximizes
// lambda*Q and pulls actions toward the batch's, lambda = alpha / mean|Q|.
// Disabling the cloning term (lambda := 1, no pull) recovers TD3 exactly.

import * as tf from "@tensorflow/tfjs";
import { Rng } from "./rng";
import { Transition } from "./replayBuffer";

export interface Td3Config {
  stateDim: number;
  actionDim: number;
  actionScale: number;      // |a| <= scale, symmetric bounds
  hidden: number[];         // e.g. [256, 256, 256]
  actorLr: number;
  criticLr: number;
  discount: number;
  tau: number;              // soft-update coefficient
  policyDelay: number;
  policyNoise: number;      // target smoothing, fraction of scale
  noiseClip: number;        // fraction of scale
  bcAlpha: number;          // behavioral-cloning weight (alpha)
  useBc: boolean;
  seed: number;
}

export const DEFAULT_CONFIG: Omit<Td3Config, "stateDim" | "actionDim" | "actionScale"> = {
  hidden: [256, 256, 256],
  actorLr: 1e-3,
  criticLr: 1e-3,
  discount: 0.99,
  tau: 0.05,
  policyDelay: 2,
  policyNoise: 0.2,
  noiseClip: 0.5,
  bcAlpha: 2.5,
  useBc: false,
  seed: 0,
};

function mlp(
  inputDim: number,
  hidden: number[],
  outputDim: number,
  outputActivation: "tanh" | "linear",
  seed: number
): tf.Sequential {
  const model = tf.sequential();
  let dim = inputDim;
  hidden.forEach((width, i) => {
    model.add(
      tf.layers.dense({
        inputShape: i === 0 ? [dim] : undefined,
        units: width,
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + i }),
        biasInitializer: "zeros",
      })
    );
  });
  model.add(
    tf.layers.dense({
      units: outputDim,
      activation: outputActivation,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 100 }),
      biasInitializer: "zeros",
    })
  );
  return model;
}

function copyWeights(src: tf.LayersModel, dst: tf.LayersModel): void {
  dst.setWeights(src.getWeights().map((w) => w.clone()));
}

export class Td3 {
  readonly cfg: Td3Config;
  actor: tf.Sequential;
  actorTarget: tf.Sequential;
  critic1: tf.Sequential;
  critic2: tf.Sequential;
  critic1Target: tf.Sequential;
  critic2Target: tf.Sequential;
  actorOpt: tf.Optimizer;
  criticOpt: tf.Optimizer;
  updates = 0;

  constructor(cfg: Td3Config) {
    this.cfg = cfg;
    const { stateDim, actionDim, hidden, seed } = cfg;
    this.actor = mlp(stateDim, hidden, actionDim, "tanh", seed);
    this.actorTarget = mlp(stateDim, hidden, actionDim, "tanh", seed);
    this.critic1 = mlp(stateDim + actionDim, hidden, 1, "linear", seed + 1000);
    this.critic2 = mlp(stateDim + actionDim, hidden, 1, "linear", seed + 2000);
    this.critic1Target = mlp(stateDim + actionDim, hidden, 1, "linear", seed + 1000);
    this.critic2Target = mlp(stateDim + actionDim, hidden, 1, "linear", seed + 2000);
    copyWeights(this.actor, this.actorTarget);
    copyWeights(this.critic1, this.critic1Target);
    copyWeights(this.critic2, this.critic2Target);
    this.actorOpt = tf.train.adam(cfg.actorLr);
    this.criticOpt = tf.train.adam(cfg.criticLr);
  }

  /** Normalized policy output in [-1, 1]. */
  policy(state: Float32Array): Float32Array {
    return tf.tidy(() => {
      const s = tf.tensor2d(this.preprocess(state), [1, this.cfg.stateDim]);
      const a = this.actor.predict(s) as tf.Tensor;
      return a.dataSync() as Float32Array;
    });
  }

  act(state: Float32Array): Float32Array {
    const pi = this.policy(state);
    const out = new Float32Array(pi.length);
    for (let i = 0; i < pi.length; i++) out[i] = pi[i] * this.cfg.actionScale;
    return out;
  }

  actNoisy(state: Float32Array, rng: Rng, noiseScale: number): Float32Array {
    const pi = this.policy(state);
    const out = new Float32Array(pi.length);
    for (let i = 0; i < pi.length; i++) {
      const noisy = pi[i] + rng.normal() * noiseScale;
      out[i] = Math.min(1, Math.max(-1, noisy)) * this.cfg.actionScale;
    }
    return out;
  }

  /** Positions in the slot encoding are large compared to the other
      features; a fixed elementwise rescale keeps inputs near unit range. */
  preprocess(state: Float32Array): Float32Array {
    const out = new Float32Array(state.length);
    for (let i = 0; i < state.length; i++) {
      out[i] = i % 5 === 0 ? state[i] / 50.0 : state[i];
    }
    return out;
  }

  private batchTensors(batch: Transition[]) {
    const n = batch.length;
    const s = new Float32Array(n * this.cfg.stateDim);
    const a = new Float32Array(n * this.cfg.actionDim);
    const r = new Float32Array(n);
    const s2 = new Float32Array(n * this.cfg.stateDim);
    const notDone = new Float32Array(n);
    const inv = 1 / this.cfg.actionScale;
    batch.forEach((t, i) => {
      s.set(this.preprocess(t.state), i * this.cfg.stateDim);
      for (let j = 0; j < this.cfg.actionDim; j++) {
        a[i * this.cfg.actionDim + j] = t.action[j] * inv;
      }
      r[i] = t.reward;
      s2.set(this.preprocess(t.nextState), i * this.cfg.stateDim);
      notDone[i] = t.done ? 0 : 1;
    });
    return {
      states: tf.tensor2d(s, [n, this.cfg.stateDim]),
      actions: tf.tensor2d(a, [n, this.cfg.actionDim]),
      rewards: tf.tensor1d(r),
      nextStates: tf.tensor2d(s2, [n, this.cfg.stateDim]),
      notDone: tf.tensor1d(notDone),
    };
  }

  /** One gradient step on the critics and, on the delay schedule, the actor
      and all targets.  Returns the critic loss for logging. */
  update(batch: Transition[], rng: Rng): number {
    const { discount, policyNoise, noiseClip } = this.cfg;
    const t = this.batchTensors(batch);
    const n = batch.length;
    const noise = new Float32Array(n * this.cfg.actionDim);
    for (let i = 0; i < noise.length; i++) {
      const raw = rng.normal() * policyNoise;
      noise[i] = Math.min(noiseClip, Math.max(-noiseClip, raw));
    }

    const target = tf.tidy(() => {
      const smoothed = (this.actorTarget.predict(t.nextStates) as tf.Tensor)
        .add(tf.tensor2d(noise, [n, this.cfg.actionDim]))
        .clipByValue(-1, 1);
      const input = tf.concat([t.nextStates, smoothed], 1);
      const q1 = (this.critic1Target.predict(input) as tf.Tensor).squeeze([1]);
      const q2 = (this.critic2Target.predict(input) as tf.Tensor).squeeze([1]);
      const minQ = tf.minimum(q1, q2);
      return t.rewards.add(minQ.mul(t.notDone).mul(discount));
    });

    const criticIn = tf.concat([t.states, t.actions], 1);
    const criticLoss = this.criticOpt.minimize(
      () => {
        const q1 = (this.critic1.apply(criticIn) as tf.Tensor).squeeze([1]);
        const q2 = (this.critic2.apply(criticIn) as tf.Tensor).squeeze([1]);
        return q1.sub(target).square().mean().add(
          q2.sub(target).square().mean()
        ) as tf.Scalar;
      },
      true,
      [
        ...this.critic1.trainableWeights.map((w) => w.read() as tf.Variable),
        ...this.critic2.trainableWeights.map((w) => w.read() as tf.Variable),
      ]
    ) as tf.Scalar;
    const lossValue = criticLoss.dataSync()[0];
    criticLoss.dispose();

    this.updates += 1;
    if (this.updates % this.cfg.policyDelay === 0) {
      this.actorUpdate(t.states, t.actions);
      this.softUpdate(this.actor, this.actorTarget);
      this.softUpdate(this.critic1, this.critic1Target);
      this.softUpdate(this.critic2, this.critic2Target);
    }

    target.dispose();
    criticIn.dispose();
    Object.values(t).forEach((x) => x.dispose());
    return lossValue;
  }

  /** Actor step; exposed separately so the cloning reduction is testable.
      The Q normalizer is detached: it is read out as a plain number before
      the differentiated pass, exactly like the stop-gradient formulation. */
  actorUpdate(states: tf.Tensor2D, batchActions: tf.Tensor2D): void {
    const { bcAlpha, useBc } = this.cfg;
    let lambdaValue = 1.0;
    if (useBc) {
      lambdaValue = tf.tidy(() => {
        const pi = this.actor.apply(states) as tf.Tensor;
        const q = (this.critic1.apply(tf.concat([states, pi], 1)) as tf.Tensor)
          .squeeze([1]);
        return bcAlpha / (q.abs().mean().dataSync()[0] + 1e-8);
      });
    }
    const loss = this.actorOpt.minimize(
      () => {
        const pi = this.actor.apply(states) as tf.Tensor;
        const q = (this.critic1.apply(tf.concat([states, pi], 1)) as tf.Tensor)
          .squeeze([1]);
        const base = q.mean().mul(-lambdaValue);
        if (!useBc) {
          return base as tf.Scalar;
        }
        const clone = pi.sub(batchActions).square().mean();
        return base.add(clone) as tf.Scalar;
      },
      false,
      this.actor.trainableWeights.map((w) => w.read() as tf.Variable)
    );
    loss?.dispose();
  }

  private softUpdate(src: tf.LayersModel, dst: tf.LayersModel): void {
    const tau = this.cfg.tau;
    const sw = src.getWeights();
    const dw = dst.getWeights();
    const mixed = sw.map((w, i) => tf.tidy(() => w.mul(tau).add(dw[i].mul(1 - tau))));
    dst.setWeights(mixed);
    mixed.forEach((m) => m.dispose());
  }

  weightsSnapshot(): Float32Array[] {
    return this.actor.getWeights().map((w) => w.dataSync() as Float32Array);
  }
}
