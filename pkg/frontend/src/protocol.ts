// Wire codec for the viewsim TCP protocol. All integers are little-endian.
// A message is a 1-byte opcode, a u32 body length, then the body.

import { gunzipSync } from "node:zlib";
import { endianness } from "node:os";

export const MAGIC = "SAIL";
export const VERSION = 1;
export const HELLO = Buffer.concat([Buffer.from(MAGIC, "ascii"), Buffer.from([VERSION])]);

export const MAX_BODY = 64 * 1024 * 1024;
export const HEADER_SIZE = 5;

export const OP_REGISTER = 0x01;
export const OP_CHANGE_SCENE = 0x02;
export const OP_GET_FRAME = 0x03;
export const OP_SET_POSITION = 0x04;
export const OP_SET_ROTATION = 0x05;
export const OP_TOGGLE_FOLLOW = 0x06;
export const OP_DELETE = 0x07;
export const RESPONSE_FLAG = 0x80;
export const OP_ERROR = 0xff;

export const ERR_BAD_REQUEST = 1;
export const ERR_UNKNOWN_SCENE = 2;
export const ERR_INTERNAL = 3;

export const COMPRESSION_RAW = 0;
export const COMPRESSION_GZIP = 1;

export const VIEW_ORDER = ["main", "category", "object", "flow", "depth"] as const;
export type ViewName = (typeof VIEW_ORDER)[number];

export const VIEW_IDS: Record<ViewName, number> = {
  main: 1,
  category: 2,
  object: 3,
  flow: 4,
  depth: 5,
};

const VIEW_BY_ID = new Map<number, ViewName>(
  VIEW_ORDER.map((name) => [VIEW_IDS[name], name]),
);

export const ALL_VIEWS_MASK = 0x1f;

export class ProtocolError extends Error {}

export interface Message {
  opcode: number;
  body: Buffer;
}

export function encodeMessage(opcode: number, body: Buffer = Buffer.alloc(0)): Buffer {
  if (body.length > MAX_BODY) {
    throw new ProtocolError(`body of ${body.length} bytes exceeds the ${MAX_BODY} limit`);
  }
  const header = Buffer.alloc(HEADER_SIZE);
  header.writeUInt8(opcode, 0);
  header.writeUInt32LE(body.length, 1);
  return Buffer.concat([header, body]);
}

// Returns null while `data` holds less than one complete message; the caller
// keeps accumulating. `rest` is a view onto the bytes after the message.
export function tryDecodeMessage(data: Buffer): { message: Message; rest: Buffer } | null {
  if (data.length < HEADER_SIZE) {
    return null;
  }
  const opcode = data.readUInt8(0);
  const length = data.readUInt32LE(1);
  if (length > MAX_BODY) {
    throw new ProtocolError(`declared body of ${length} bytes exceeds the ${MAX_BODY} limit`);
  }
  if (data.length < HEADER_SIZE + length) {
    return null;
  }
  return {
    message: { opcode, body: data.subarray(HEADER_SIZE, HEADER_SIZE + length) },
    rest: data.subarray(HEADER_SIZE + length),
  };
}

// Sequential reader over a reply body; every read checks bounds so corrupt
// or truncated bodies surface as ProtocolError rather than garbage values.
class Cursor {
  private offset = 0;

  constructor(private readonly buf: Buffer) {}

  private need(count: number): void {
    if (this.offset + count > this.buf.length) {
      throw new ProtocolError("body is shorter than its layout requires");
    }
  }

  u8(): number {
    this.need(1);
    return this.buf.readUInt8(this.offset++);
  }

  u16(): number {
    this.need(2);
    const value = this.buf.readUInt16LE(this.offset);
    this.offset += 2;
    return value;
  }

  u32(): number {
    this.need(4);
    const value = this.buf.readUInt32LE(this.offset);
    this.offset += 4;
    return value;
  }

  take(count: number): Buffer {
    this.need(count);
    const chunk = this.buf.subarray(this.offset, this.offset + count);
    this.offset += count;
    return chunk;
  }

  // u16 length prefix followed by UTF-8 bytes.
  text(): string {
    return this.take(this.u16()).toString("utf-8");
  }

  expectEnd(): void {
    if (this.offset !== this.buf.length) {
      throw new ProtocolError(`${this.buf.length - this.offset} trailing bytes in body`);
    }
  }
}

export function encodeRegister(
  width: number,
  height: number,
  viewMask = ALL_VIEWS_MASK,
  compression = COMPRESSION_RAW,
): Buffer {
  const body = Buffer.alloc(10);
  body.writeUInt32LE(width, 0);
  body.writeUInt32LE(height, 4);
  body.writeUInt8(viewMask, 8);
  body.writeUInt8(compression, 9);
  return encodeMessage(OP_REGISTER, body);
}

export function encodeChangeScene(sceneIndex: number): Buffer {
  return encodeMessage(OP_CHANGE_SCENE, Buffer.from([sceneIndex]));
}

export function encodeGetFrame(): Buffer {
  return encodeMessage(OP_GET_FRAME);
}

function encodeVec3(opcode: number, vec: readonly [number, number, number]): Buffer {
  const body = Buffer.alloc(12);
  body.writeFloatLE(vec[0], 0);
  body.writeFloatLE(vec[1], 4);
  body.writeFloatLE(vec[2], 8);
  return encodeMessage(opcode, body);
}

export function encodeSetPosition(position: readonly [number, number, number]): Buffer {
  return encodeVec3(OP_SET_POSITION, position);
}

export function encodeSetRotation(rotation: readonly [number, number, number]): Buffer {
  return encodeVec3(OP_SET_ROTATION, rotation);
}

export function encodeToggleFollow(): Buffer {
  return encodeMessage(OP_TOGGLE_FOLLOW);
}

export function encodeDelete(): Buffer {
  return encodeMessage(OP_DELETE);
}

export interface RegisterReply {
  agentId: number;
  sceneNames: string[];
  categories: Array<[number, string]>;
}

function decodeCategoryTable(cursor: Cursor): Array<[number, string]> {
  const count = cursor.u16();
  const table: Array<[number, string]> = [];
  for (let i = 0; i < count; i++) {
    const id = cursor.u8();
    table.push([id, cursor.text()]);
  }
  return table;
}

export function decodeRegisterReply(body: Buffer): RegisterReply {
  const cursor = new Cursor(body);
  const agentId = cursor.u32();
  const sceneCount = cursor.u8();
  const sceneNames: string[] = [];
  for (let i = 0; i < sceneCount; i++) {
    sceneNames.push(cursor.text());
  }
  const categories = decodeCategoryTable(cursor);
  cursor.expectEnd();
  return { agentId, sceneNames, categories };
}

export function decodeChangeSceneReply(body: Buffer): Array<[number, string]> {
  const cursor = new Cursor(body);
  const categories = decodeCategoryTable(cursor);
  cursor.expectEnd();
  return categories;
}

export function decodeFollowReply(body: Buffer): boolean {
  const cursor = new Cursor(body);
  const value = cursor.u8();
  cursor.expectEnd();
  if (value !== 0 && value !== 1) {
    throw new ProtocolError(`follow flag must be 0 or 1, got ${value}`);
  }
  return value === 1;
}

export function decodeError(body: Buffer): { code: number; message: string } {
  const cursor = new Cursor(body);
  const code = cursor.u8();
  const message = cursor.text();
  cursor.expectEnd();
  return { code, message };
}

export function decodeAck(body: Buffer): void {
  new Cursor(body).expectEnd();
}

// Per-view element sizes in bytes, for a frame of width*height pixels.
function viewByteLength(name: ViewName, width: number, height: number): number {
  const pixels = width * height;
  switch (name) {
    case "main":
    case "object":
      return pixels * 3;
    case "category":
    case "depth":
      return pixels;
    case "flow":
      return pixels * 8;
  }
}

export type ViewArray = Uint8Array | Float32Array;

export type DecodedViews = Partial<Record<ViewName, ViewArray>>;

function viewFromBytes(name: ViewName, raw: Buffer): ViewArray {
  if (name !== "flow") {
    return new Uint8Array(raw);
  }
  // Flow is packed little-endian float32; Float32Array reads in host order,
  // so refuse the rare big-endian host rather than decode garbage.
  if (endianness() !== "LE") {
    throw new ProtocolError("flow decoding requires a little-endian host");
  }
  // Copy into a fresh buffer: `raw` is a view into the socket buffer and is
  // not guaranteed to be 4-byte aligned.
  const aligned = new ArrayBuffer(raw.length);
  new Uint8Array(aligned).set(raw);
  return new Float32Array(aligned);
}

export function decodeFrameReply(body: Buffer, width: number, height: number): DecodedViews {
  const cursor = new Cursor(body);
  const count = cursor.u8();
  const views: DecodedViews = {};
  for (let i = 0; i < count; i++) {
    const viewId = cursor.u8();
    const compression = cursor.u8();
    const uncompressedLength = cursor.u32();
    const payloadLength = cursor.u32();
    const payload = cursor.take(payloadLength);

    const name = VIEW_BY_ID.get(viewId);
    if (name === undefined) {
      throw new ProtocolError(`unknown view id ${viewId}`);
    }
    let raw: Buffer;
    if (compression === COMPRESSION_RAW) {
      raw = payload;
    } else if (compression === COMPRESSION_GZIP) {
      try {
        raw = gunzipSync(payload);
      } catch (err) {
        throw new ProtocolError(`corrupt gzip payload for view ${name}: ${String(err)}`);
      }
    } else {
      throw new ProtocolError(`unknown compression mode ${compression}`);
    }
    if (raw.length !== uncompressedLength) {
      throw new ProtocolError(
        `view ${name} declares ${uncompressedLength} bytes but payload holds ${raw.length}`,
      );
    }
    const expected = viewByteLength(name, width, height);
    if (raw.length !== expected) {
      throw new ProtocolError(
        `view ${name} holds ${raw.length} bytes, expected ${expected} for ${width}x${height}`,
      );
    }
    views[name] = viewFromBytes(name, raw);
  }
  cursor.expectEnd();
  return views;
}
