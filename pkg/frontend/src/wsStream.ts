// Browser byte stream over the WebSocket <-> TCP bridge (bridge/relay.mjs).

import type { ByteStream } from "./session.js";

export function wsStream(bridgeUrl: string, target: string): Promise<ByteStream> {
  return new Promise((resolve, reject) => {
    const url = `${bridgeUrl}?target=${encodeURIComponent(target)}`;
    const ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";
    ws.onerror = () => reject(new Error(`bridge unreachable at ${url}`));
    ws.onopen = () => {
      const stream: ByteStream = {
        send(data) {
          ws.send(data);
        },
        onData(handler) {
          ws.onmessage = (event) => {
            if (event.data instanceof ArrayBuffer) {
              handler(new Uint8Array(event.data));
            }
          };
        },
        onClose(handler) {
          ws.onclose = () => handler();
        },
        close() {
          ws.close();
        },
      };
      resolve(stream);
    };
  });
}
