/** Entry point: serve the wire protocol over stdio (default) or TCP.
 *
 *   ampr-bridge [--transport stdio|tcp:<port>] [--threshold N] [--seek-radius N]
 */
import { createInterface } from "node:readline";
import { createServer } from "node:net";
import process from "node:process";

import { FixtureBackend, defaultFixtureOptions } from "./backend.js";
import { BridgeServer } from "./server.js";

function parseArgs(argv: string[]) {
  const opts = {
    transport: "stdio",
    threshold: defaultFixtureOptions.threshold,
    seekRadius: defaultFixtureOptions.seekRadius,
  };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--transport":
        opts.transport = argv[++i];
        break;
      case "--threshold":
        opts.threshold = Number(argv[++i]);
        break;
      case "--seek-radius":
        opts.seekRadius = Number(argv[++i]);
        break;
      default:
        process.stderr.write(`unknown argument ${argv[i]}\n`);
        process.exit(2);
    }
  }
  return opts;
}

function main() {
  const opts = parseArgs(process.argv.slice(2));
  const backend = new FixtureBackend({
    threshold: opts.threshold,
    seekRadius: opts.seekRadius,
  });
  const server = new BridgeServer(backend);

  if (opts.transport === "stdio") {
    const rl = createInterface({ input: process.stdin, terminal: false });
    rl.on("line", (line) => {
      const reply = server.handleLine(line);
      if (reply) process.stdout.write(reply + "\n");
    });
    rl.on("close", () => process.exit(0));
    return;
  }
  if (opts.transport.startsWith("tcp:")) {
    const port = Number(opts.transport.slice(4));
    const net = createServer((socket) => {
      const rl = createInterface({ input: socket, terminal: false });
      rl.on("line", (line) => {
        const reply = server.handleLine(line);
        if (reply) socket.write(reply + "\n");
      });
    });
    net.listen(port, "127.0.0.1", () => {
      const address = net.address();
      const bound = typeof address === "object" && address ? address.port : port;
      process.stderr.write(`listening on 127.0.0.1:${bound}\n`);
    });
    return;
  }
  process.stderr.write(`unknown transport ${opts.transport}\n`);
  process.exit(2);
}

main();
