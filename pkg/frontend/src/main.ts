import { SessionClient } from "./client.js";
import { GazeTracker, PressDiscriminator, bindDom } from "./input.js";
import { defaultTheme } from "./theme.js";
import { render } from "./view.js";

const root = document.getElementById("overlay") as HTMLElement;
const theme = defaultTheme;

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const params = new URLSearchParams(location.search);
const client = new SessionClient(
  wsUrl,
  (model) => render(model, theme, root),
  params.get("session") ?? undefined,
  params.get("token") ?? undefined,
);

const gaze = new GazeTracker(theme.hoverSettleMs, undefined, undefined, (target) => {
  for (const node of root.querySelectorAll(".gazed")) node.classList.remove("gazed");
  if (target) {
    const el = root.querySelector(`[data-target="${CSS.escape(target)}"]`);
    el?.classList.add("gazed");
  }
});
const presses = new PressDiscriminator(client, theme.doubleClickMs);
bindDom(root, gaze, presses, client);
client.connect();

// Demo speech player: streams the bundled trace through the server so
// the whole loop runs without any external service.
const playButton = document.getElementById("play-demo");
const speedInput = document.getElementById("play-speed") as HTMLInputElement | null;
playButton?.addEventListener("click", () => {
  const speed = speedInput ? Number(speedInput.value) || 1 : 1;
  client.playTrace("demo", speed);
});
