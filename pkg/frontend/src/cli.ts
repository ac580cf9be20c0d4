/**
 * Command line entry point.
 *
 *   node dist/cli.js --stub [--port N] [--host H]
 *
 * Prints "listening on http://HOST:PORT" once the socket is bound (with
 * --port 0 the OS picks a free port, so callers should parse this line).
 * A real model backend is a deployment concern; without --stub the
 * process exits with an explanatory error.
 */

import { parseArgs } from "node:util";
import { createServer, stubBackend } from "./server";

export function main(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      stub: { type: "boolean", default: false },
      port: { type: "string", default: "8765" },
      host: { type: "string", default: "127.0.0.1" },
    },
  });
  if (!values.stub) {
    process.stderr.write(
      "no model backend is bundled; run with --stub for the " +
        "deterministic test backend\n",
    );
    process.exit(2);
  }
  const port = Number(values.port);
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    process.stderr.write(`invalid port: ${values.port}\n`);
    process.exit(2);
  }
  const server = createServer(stubBackend());
  server.listen(port, values.host, () => {
    const addr = server.address();
    const bound = typeof addr === "object" && addr ? addr.port : port;
    process.stdout.write(`listening on http://${values.host}:${bound}\n`);
  });
}

if (require.main === module) {
  main(process.argv.slice(2));
}
