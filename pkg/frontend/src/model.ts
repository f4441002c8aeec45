// Client view model: nothing but the last rendering of each surface as
// sent by the server. The server is authoritative; reconnecting and
// taking a fresh snapshot rebuilds exactly this structure.

import { Fields, ServerMessage } from "./protocol.js";

export interface Diagnostic {
  seq: number;
  code: string;
  detail: string;
}

export class ViewModel {
  session = "";
  surfaces = new Map<string, Fields>();
  diagnostics: Diagnostic[] = [];
  lastSeq = 0;

  apply(message: ServerMessage): void {
    if (message.seq > 0 && message.seq <= this.lastSeq) {
      return; // ordering guard; the server never regresses
    }
    if (message.seq > 0) this.lastSeq = message.seq;
    switch (message.kind) {
      case "welcome":
        this.session = message.session;
        break;
      case "update":
        this.surfaces.set(message.surface, message.fields);
        break;
      case "diagnostic":
        this.diagnostics.push({
          seq: message.seq,
          code: message.code,
          detail: message.detail,
        });
        if (this.diagnostics.length > 50) this.diagnostics.shift();
        break;
      case "error":
        this.diagnostics.push({ seq: 0, code: "protocol_error", detail: message.message });
        break;
    }
  }

  surface(name: string): Fields {
    return this.surfaces.get(name) ?? {};
  }

  /** Canonical comparison form: surface name -> its raw fields. */
  snapshotObject(): Record<string, Fields> {
    const out: Record<string, Fields> = {};
    for (const [name, fields] of this.surfaces) out[name] = { ...fields };
    return out;
  }
}
