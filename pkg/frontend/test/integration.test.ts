// End-to-end against the real Python service over its TCP protocol.
// Skips when the sonotrap package is not importable on this machine.

import { spawn, spawnSync } from "node:child_process";
import { createServer } from "node:net";
import { describe, expect, it } from "vitest";

import { SteerClient } from "../src/client.js";
import { TcpJsonlTransport } from "../src/transport.js";

function pythonAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import sonotrap"], { timeout: 30_000 });
  return probe.status === 0;
}

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no address"));
      }
    });
  });
}

async function waitForPort(port: number, deadlineMs: number): Promise<void> {
  const net = await import("node:net");
  const deadline = Date.now() + deadlineMs;
  while (Date.now() < deadline) {
    const ok = await new Promise<boolean>((resolve) => {
      const sock = net.createConnection({ host: "127.0.0.1", port }, () => {
        sock.end();
        resolve(true);
      });
      sock.on("error", () => resolve(false));
    });
    if (ok) return;
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service did not open port ${port}`);
}

describe.skipIf(!pythonAvailable())("live service integration", () => {
  it("moves the focus and sees it in telemetry", { timeout: 60_000 }, async () => {
    const port = await freePort();
    const proc = spawn("python3", ["-m", "sonotrap.cli", "serve", "--port", String(port)], {
      stdio: "ignore",
    });
    try {
      await waitForPort(port, 30_000);
      const transport = await TcpJsonlTransport.connect("127.0.0.1", port);
      const client = new SteerClient(transport);

      client.moveFocus([12, -8, 95]);
      client.subscribe(20, { plane: "xz", offset: -8, extent: 20, cells: 12 });

      const focusSeen = await new Promise<boolean>((resolve) => {
        const timer = setTimeout(() => resolve(false), 20_000);
        client.onChange((state) => {
          const focus = state.telemetry?.focus;
          if (focus && focus[0] === 12 && focus[1] === -8 && focus[2] === 95) {
            clearTimeout(timer);
            resolve(true);
          }
        });
      });
      expect(focusSeen).toBe(true);
      expect(client.state.seqViolations).toBe(0);
      expect(client.state.telemetry?.slice?.shape).toEqual([12, 12]);
      client.close();
    } finally {
      proc.kill("SIGTERM");
    }
  });
});
