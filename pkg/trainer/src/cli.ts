// Command line for one training run.

import { DESK_DEFAULTS, train, TrainOptions } from "./train";
import { initBackend } from "./backend";

function parseArgs(argv: string[]): TrainOptions {
  const opts: TrainOptions = { ...DESK_DEFAULTS, algo: "td3bc" };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => argv[++i];
    switch (arg) {
      case "--algo":
        opts.algo = next() as "td3" | "td3bc";
        break;
      case "--dataset":
        opts.dataset = next();
        break;
      case "--steps":
        opts.steps = parseInt(next(), 10);
        break;
      case "--pretrain":
        opts.pretrainSteps = parseInt(next(), 10);
        break;
      case "--batch-size":
        opts.batchSize = parseInt(next(), 10);
        break;
      case "--eval-every":
        opts.evalEvery = parseInt(next(), 10);
        break;
      case "--eval-episodes":
        opts.evalEpisodes = parseInt(next(), 10);
        break;
      case "--seed":
        opts.seed = parseInt(next(), 10);
        break;
      case "--curve":
        opts.curveFile = next();
        break;
      case "--env-cmd":
        opts.envCommand = next().split(" ");
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  if (opts.algo !== "td3" && opts.algo !== "td3bc") {
    throw new Error(`unknown algorithm ${opts.algo}`);
  }
  return opts;
}

async function main(): Promise<void> {
  console.error(`backend: ${await initBackend()}`);
  const opts = parseArgs(process.argv.slice(2));
  const { curve } = await train(opts);
  const last = curve[curve.length - 1];
  console.log(
    `finished ${opts.steps} steps; final success rate ` +
    `${last ? (100 * last.successRate).toFixed(1) : "0.0"}%`
  );
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
