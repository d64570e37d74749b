// Node-only TCP byte stream (tests and scripting drive the service
// directly; browsers go through the WebSocket bridge instead).

import * as net from "node:net";

import type { ByteStream } from "./session.js";

export function tcpStream(host: string, port: number): Promise<ByteStream> {
  return new Promise((resolve, reject) => {
    const socket = net.connect({ host, port, noDelay: true });
    socket.once("error", reject);
    socket.once("connect", () => {
      socket.removeListener("error", reject);
      const stream: ByteStream = {
        send(data) {
          socket.write(data);
        },
        onData(handler) {
          socket.on("data", (chunk: Buffer) => handler(new Uint8Array(chunk)));
        },
        onClose(handler) {
          socket.on("close", handler);
          socket.on("error", () => socket.destroy());
        },
        close() {
          socket.destroy();
        },
      };
      resolve(stream);
    });
  });
}
