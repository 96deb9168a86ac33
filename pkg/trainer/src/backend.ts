// Numeric backend selection: the WASM kernels are several times faster than
// the plain JS ones for these layer sizes; fall back silently when missing.

import * as tf from "@tensorflow/tfjs";

export async function initBackend(): Promise<string> {
  try {
    require("@tensorflow/tfjs-backend-wasm");
    await tf.setBackend("wasm");
  } catch {
    await tf.setBackend("cpu");
  }
  await tf.ready();
  return tf.getBackend();
}
