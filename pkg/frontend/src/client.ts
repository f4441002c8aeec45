// Session connection: one WebSocket, snapshot-then-stream. Optimistic
// updates are forbidden; the model changes only on server messages.

import { ViewModel } from "./model.js";
import { command, hello, parseServerMessage } from "./protocol.js";
import { InputSink } from "./input.js";

export class SessionClient implements InputSink {
  model = new ViewModel();
  private socket: WebSocket | null = null;

  constructor(
    private url: string,
    private onChange: (model: ViewModel) => void,
    private session?: string,
    private token?: string,
  ) {}

  connect(): void {
    this.socket = new WebSocket(this.url);
    this.socket.onopen = () => this.socket?.send(hello(this.session, this.token));
    this.socket.onmessage = (event) => {
      const message = parseServerMessage(String(event.data));
      this.model.apply(message);
      if (message.kind === "welcome") this.session = message.session;
      this.onChange(this.model);
    };
    this.socket.onclose = () => {
      // Reconnect with the same session id: the fresh snapshot rebuilds
      // the identical view.
      setTimeout(() => this.connect(), 1000);
    };
  }

  private send(line: string): void {
    if (this.socket && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(line);
    }
  }

  sendClick(target: string): void {
    this.send(command("click", [["target", target]]));
  }

  sendDoubleClick(target: string): void {
    this.send(command("dblclick", [["target", target]]));
  }

  sendTouch(on: boolean): void {
    this.send(command("touch", [["on", on ? "1" : "0"]]));
  }

  playTrace(name = "demo", speed = 1): void {
    this.send(
      command("play_trace", [
        ["name", name],
        ["speed", String(speed)],
      ]),
    );
  }
}
