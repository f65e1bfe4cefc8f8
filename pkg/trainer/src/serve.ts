/**
 * Stdio serve loop. Spawned by the engine as
 *   opennas ... --evaluator extern:"node dist/serve.js"
 *
 * Emits the hello handshake, then answers one request per line, strictly
 * in order (max_parallelism 1). Exits 0 when stdin closes.
 */

import "./quiet"; // must precede any tfjs import
import * as readline from "readline";
import { HELLO, handleLine } from "./protocol";

function main(): void {
  process.stdout.write(JSON.stringify(HELLO) + "\n");

  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  let chain: Promise<void> = Promise.resolve();

  rl.on("line", (line: string) => {
    chain = chain.then(async () => {
      const response = await handleLine(line);
      if (response !== null) {
        process.stdout.write(JSON.stringify(response) + "\n");
      }
    });
  });

  rl.on("close", () => {
    void chain.then(() => process.exit(0));
  });
}

main();
