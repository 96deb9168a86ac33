// Seeded-versus-scratch comparison at desk scale: the cloning variant with a
// demonstration-filled buffer against plain TD3 starting empty, same budget.
// Prints one verdict line per requirement.

import { train } from "./train";
import { initBackend } from "./backend";

interface ExperimentArgs {
  dataset: string;
  steps: number;
  pretrain: number;
  evalEvery: number;
  evalEpisodes: number;
  seed: number;
  curvePrefix?: string;
}

function parseArgs(argv: string[]): ExperimentArgs {
  const args: ExperimentArgs = {
    dataset: "",
    steps: 20_000,
    pretrain: 0,
    evalEvery: 2_000,
    evalEpisodes: 40,
    seed: 1,
  };
  for (let i = 0; i < argv.length; i++) {
    const next = () => argv[++i];
    switch (argv[i]) {
      case "--dataset": args.dataset = next(); break;
      case "--steps": args.steps = parseInt(next(), 10); break;
      case "--pretrain": args.pretrain = parseInt(next(), 10); break;
      case "--eval-every": args.evalEvery = parseInt(next(), 10); break;
      case "--eval-episodes": args.evalEpisodes = parseInt(next(), 10); break;
      case "--seed": args.seed = parseInt(next(), 10); break;
      case "--curve-prefix": args.curvePrefix = next(); break;
      default: throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!args.dataset) throw new Error("--dataset is required");
  return args;
}

async function main(): Promise<void> {
  console.error(`backend: ${await initBackend()}`);
  const args = parseArgs(process.argv.slice(2));

  console.error(`=== cloning variant, buffer seeded from ${args.dataset} ===`);
  const seeded = await train({
    algo: "td3bc",
    dataset: args.dataset,
    steps: args.steps,
    pretrainSteps: args.pretrain,
    batchSize: 128,
    evalEvery: args.evalEvery,
    evalEpisodes: args.evalEpisodes,
    explorationNoise: 0.1,
    warmupSteps: 0,
    bufferCapacity: 400_000,
    seed: args.seed,
    curveFile: args.curvePrefix ? `${args.curvePrefix}-td3bc.tsv` : undefined,
    envCommand: ["roadsynth", "serve-env"],
    trainSeedBase: 100_000,
    evalSeedBase: 900_000,
  });

  console.error("=== plain TD3 from scratch, same budget ===");
  const scratch = await train({
    algo: "td3",
    steps: args.steps,
    pretrainSteps: 0,
    batchSize: 128,
    evalEvery: args.evalEvery,
    evalEpisodes: args.evalEpisodes,
    explorationNoise: 0.1,
    warmupSteps: 500,
    bufferCapacity: 400_000,
    seed: args.seed,
    curveFile: args.curvePrefix ? `${args.curvePrefix}-td3.tsv` : undefined,
    envCommand: ["roadsynth", "serve-env"],
    trainSeedBase: 100_000,
    evalSeedBase: 900_000,
  });

  const bestSeeded = Math.max(...seeded.curve.map((p) => p.successRate), 0);
  const bestScratch = Math.max(...scratch.curve.map((p) => p.successRate), 0);
  console.log(`seeded best success rate:  ${(100 * bestSeeded).toFixed(1)}%`);
  console.log(`scratch best success rate: ${(100 * bestScratch).toFixed(1)}%`);

  const seededOk = bestSeeded > 0.05;
  const scratchOk = bestScratch < 0.01;
  console.log(`[${seededOk ? "PASS" : "FAIL"}] seeded buffer exceeds 5% success`);
  console.log(`[${scratchOk ? "PASS" : "FAIL"}] scratch stays under 1% success`);
  process.exit(seededOk && scratchOk ? 0 : 1);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
