// Transports carry JSON lines to and from the service. The console core
// only sees this interface; node tests use MockTransport or the TCP
// transport, browsers use a WebSocket bridge in front of the TCP port.

import type { CommandEnvelope, ServerMessage } from "./protocol.js";

export interface Transport {
  send(envelope: CommandEnvelope): void;
  onMessage(handler: (message: ServerMessage) => void): void;
  onStateChange(handler: (connected: boolean) => void): void;
  close(): void;
}

type MessageHandler = (message: ServerMessage) => void;
type StateHandler = (connected: boolean) => void;

export class MockTransport implements Transport {
  sent: CommandEnvelope[] = [];
  autoRespond = true;
  private messageHandlers: MessageHandler[] = [];
  private stateHandlers: StateHandler[] = [];

  send(envelope: CommandEnvelope): void {
    this.sent.push(envelope);
    if (this.autoRespond) {
      this.emit({
        v: 1,
        seq: envelope.seq,
        kind: "response",
        payload: { ok: true },
        ts: Date.now() / 1000,
      });
    }
  }

  emit(message: ServerMessage): void {
    for (const handler of this.messageHandlers) {
      handler(message);
    }
  }

  setConnected(connected: boolean): void {
    for (const handler of this.stateHandlers) {
      handler(connected);
    }
  }

  onMessage(handler: MessageHandler): void {
    this.messageHandlers.push(handler);
  }

  onStateChange(handler: StateHandler): void {
    this.stateHandlers.push(handler);
  }

  close(): void {
    this.setConnected(false);
  }
}

/** Raw TCP JSON-lines transport (node only; used by tests and tooling). */
export class TcpJsonlTransport implements Transport {
  private socket: import("node:net").Socket;
  private buffer = "";
  private messageHandlers: MessageHandler[] = [];
  private stateHandlers: StateHandler[] = [];

  private constructor(socket: import("node:net").Socket) {
    this.socket = socket;
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => {
      this.buffer += chunk;
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (!line) continue;
        let message: ServerMessage;
        try {
          message = JSON.parse(line);
        } catch {
          continue;
        }
        for (const handler of this.messageHandlers) {
          handler(message);
        }
      }
    });
    socket.on("close", () => this.stateHandlers.forEach((h) => h(false)));
  }

  static async connect(host: string, port: number): Promise<TcpJsonlTransport> {
    const net = await import("node:net");
    const socket = net.createConnection({ host, port });
    await new Promise<void>((resolve, reject) => {
      socket.once("connect", () => resolve());
      socket.once("error", reject);
    });
    const transport = new TcpJsonlTransport(socket);
    queueMicrotask(() => transport.stateHandlers.forEach((h) => h(true)));
    return transport;
  }

  send(envelope: CommandEnvelope): void {
    this.socket.write(JSON.stringify(envelope) + "\n");
  }

  onMessage(handler: MessageHandler): void {
    this.messageHandlers.push(handler);
  }

  onStateChange(handler: StateHandler): void {
    this.stateHandlers.push(handler);
  }

  close(): void {
    this.socket.end();
  }
}

/** WebSocket transport for browsers, expecting a TCP bridge (for example
 * `websockify` or `websocketd`) in front of the service port. */
export class WsJsonlTransport implements Transport {
  private ws: WebSocket;
  private messageHandlers: MessageHandler[] = [];
  private stateHandlers: StateHandler[] = [];
  private buffer = "";

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.addEventListener("open", () => this.stateHandlers.forEach((h) => h(true)));
    this.ws.addEventListener("close", () => this.stateHandlers.forEach((h) => h(false)));
    this.ws.addEventListener("message", (event) => {
      this.buffer += String(event.data);
      let idx;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (!line) continue;
        try {
          const message = JSON.parse(line) as ServerMessage;
          this.messageHandlers.forEach((h) => h(message));
        } catch {
          // skip malformed lines
        }
      }
    });
  }

  send(envelope: CommandEnvelope): void {
    this.ws.send(JSON.stringify(envelope) + "\n");
  }

  onMessage(handler: MessageHandler): void {
    this.messageHandlers.push(handler);
  }

  onStateChange(handler: StateHandler): void {
    this.stateHandlers.push(handler);
  }

  close(): void {
    this.ws.close();
  }
}
