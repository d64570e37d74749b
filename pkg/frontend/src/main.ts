// Browser entry: service address from the query string or the settings
// panel; everything else is ConsoleApp.

import { ConsoleApp } from "./app.js";
import { wsStream } from "./wsStream.js";

function currentTargets(): { bridge: string; service: string } {
  const params = new URLSearchParams(window.location.search);
  return {
    bridge: params.get("bridge") ?? `ws://${window.location.hostname || "127.0.0.1"}:7461`,
    service: params.get("service") ?? "127.0.0.1:7460",
  };
}

function mountSettings(root: HTMLElement, onApply: (bridge: string, service: string) => void): void {
  const { bridge, service } = currentTargets();
  const bar = document.createElement("div");
  bar.className = "settings";
  const bridgeInput = document.createElement("input");
  bridgeInput.value = bridge;
  bridgeInput.size = 28;
  const serviceInput = document.createElement("input");
  serviceInput.value = service;
  serviceInput.size = 20;
  const apply = document.createElement("button");
  apply.textContent = "connect";
  apply.addEventListener("click", () => onApply(bridgeInput.value, serviceInput.value));
  bar.append("bridge ", bridgeInput, " service ", serviceInput, apply);
  root.appendChild(bar);
}

let app: ConsoleApp | null = null;

function boot(bridge: string, service: string): void {
  app?.close();
  document.querySelector(".console")?.remove();
  app = new ConsoleApp(document, () => wsStream(bridge, service));
  document.body.appendChild(app.panel.root);
  void app.connect();
}

window.addEventListener("DOMContentLoaded", () => {
  const host = document.createElement("div");
  document.body.appendChild(host);
  mountSettings(host, boot);
  const { bridge, service } = currentTargets();
  boot(bridge, service);
});
