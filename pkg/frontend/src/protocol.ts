// Wire codec for the session protocol (see ../PROTOCOL.md).
//
// A frame is one line of space-separated key=value fields, values
// percent-encoded. List fields join percent-encoded items with ",";
// structured items (keywords, notes, transcripts) are ":"-separated
// tuples whose text member is percent-encoded one level deeper.

export type Fields = Record<string, string>;

export function decodeFields(line: string): Fields {
  const fields: Fields = {};
  if (line.trim() === "") return fields;
  for (const part of line.trim().split(" ")) {
    const eq = part.indexOf("=");
    if (eq <= 0) throw new Error(`bad field: ${part}`);
    fields[part.slice(0, eq)] = decodeURIComponent(part.slice(eq + 1));
  }
  return fields;
}

export function encodeFields(fields: [string, string][]): string {
  return fields
    .map(([key, value]) => `${key}=${encodeURIComponent(value)}`)
    .join(" ");
}

export function decodeList(raw: string): string[] {
  if (raw === "") return [];
  return raw.split(",").map((item) => decodeURIComponent(item));
}

export interface KeywordItem {
  id: number;
  word: string;
  selected: boolean;
  underlined: boolean;
}

export function decodeKeywordItem(item: string): KeywordItem {
  const [id, word, selected, underlined] = item.split(":");
  return {
    id: Number(id),
    word: decodeURIComponent(word),
    selected: selected === "1",
    underlined: underlined === "1",
  };
}

export function decodeKeywordList(raw: string): KeywordItem[] {
  return decodeList(raw).map(decodeKeywordItem);
}

export function decodeSentenceList(raw: string): string[] {
  return decodeList(raw).map((item) => decodeURIComponent(item));
}

export interface NoteItem {
  id: number;
  kind: string;
  text: string;
}

export function decodeNoteList(raw: string): NoteItem[] {
  return decodeList(raw).map((item) => {
    const [id, kind, text] = item.split(":");
    return { id: Number(id), kind, text: decodeURIComponent(text) };
  });
}

export interface TranscriptItem {
  keywordId: number;
  sentenceId: number;
  text: string;
}

export function decodeTranscriptList(raw: string): TranscriptItem[] {
  return decodeList(raw).map((item) => {
    const [kw, sent, text] = item.split(":");
    return {
      keywordId: Number(kw),
      sentenceId: Number(sent),
      text: decodeURIComponent(text),
    };
  });
}

export type ServerMessage =
  | { kind: "welcome"; seq: number; session: string; version: string }
  | { kind: "update"; seq: number; surface: string; fields: Fields }
  | { kind: "diagnostic"; seq: number; code: string; detail: string }
  | { kind: "error"; seq: number; message: string };

export function parseServerMessage(line: string): ServerMessage {
  const fields = decodeFields(line);
  const seq = Number(fields.seq ?? "0");
  switch (fields.kind) {
    case "welcome":
      return { kind: "welcome", seq, session: fields.session, version: fields.version };
    case "update": {
      const { seq: _s, kind: _k, surface, ...rest } = fields;
      return { kind: "update", seq, surface, fields: rest };
    }
    case "diagnostic":
      return { kind: "diagnostic", seq, code: fields.code, detail: fields.detail };
    case "error":
      return { kind: "error", seq, message: fields.message };
    default:
      throw new Error(`unknown server message kind: ${fields.kind}`);
  }
}

let commandCounter = 0;

export function command(kind: string, extra: [string, string][] = []): string {
  commandCounter += 1;
  const fields: [string, string][] = [
    ["cmd", `c${Date.now().toString(36)}-${commandCounter}`],
    ["kind", kind],
    ...extra,
  ];
  return encodeFields(fields);
}

export const hello = (session?: string, token?: string): string => {
  const extra: [string, string][] = [["version", "1"]];
  if (session) extra.push(["session", session]);
  if (token) extra.push(["token", token]);
  return command("hello", extra);
};
