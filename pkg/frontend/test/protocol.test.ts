import { gzipSync } from "node:zlib";
import { describe, expect, it } from "vitest";

import {
  ALL_VIEWS_MASK,
  COMPRESSION_GZIP,
  COMPRESSION_RAW,
  HELLO,
  OP_GET_FRAME,
  OP_REGISTER,
  ProtocolError,
  VIEW_IDS,
  decodeError,
  decodeFollowReply,
  decodeFrameReply,
  decodeRegisterReply,
  encodeChangeScene,
  encodeMessage,
  encodeRegister,
  encodeSetPosition,
  tryDecodeMessage,
} from "../src/protocol.js";

function text(value: string): Buffer {
  const bytes = Buffer.from(value, "utf-8");
  const prefix = Buffer.alloc(2);
  prefix.writeUInt16LE(bytes.length, 0);
  return Buffer.concat([prefix, bytes]);
}

describe("message framing", () => {
  it("prefixes the body with opcode and little-endian length", () => {
    const message = encodeMessage(0x42, Buffer.from([1, 2, 3]));
    expect([...message]).toEqual([0x42, 3, 0, 0, 0, 1, 2, 3]);
  });

  it("returns null until a full message has arrived", () => {
    const message = encodeRegister(64, 48);
    for (let cut = 0; cut < message.length; cut++) {
      expect(tryDecodeMessage(message.subarray(0, cut))).toBeNull();
    }
    const tail = Buffer.from([7, 7]);
    const parsed = tryDecodeMessage(Buffer.concat([message, tail]));
    expect(parsed).not.toBeNull();
    expect(parsed!.message.opcode).toBe(OP_REGISTER);
    expect(parsed!.message.body.length).toBe(10);
    expect([...parsed!.rest]).toEqual([7, 7]);
  });

  it("rejects a declared body length above the limit", () => {
    const header = Buffer.from([0x03, 0xff, 0xff, 0xff, 0xff]);
    expect(() => tryDecodeMessage(header)).toThrow(ProtocolError);
  });
});

describe("request encoders", () => {
  it("packs register as two u32 dimensions, mask, and compression", () => {
    const message = encodeRegister(640, 480, ALL_VIEWS_MASK, COMPRESSION_GZIP);
    const expected = Buffer.alloc(15);
    expected.writeUInt8(OP_REGISTER, 0);
    expected.writeUInt32LE(10, 1);
    expected.writeUInt32LE(640, 5);
    expected.writeUInt32LE(480, 9);
    expected.writeUInt8(ALL_VIEWS_MASK, 13);
    expected.writeUInt8(COMPRESSION_GZIP, 14);
    expect(message.equals(expected)).toBe(true);
  });

  it("packs scene index as a single byte", () => {
    expect([...encodeChangeScene(2)]).toEqual([0x02, 1, 0, 0, 0, 2]);
  });

  it("packs vectors as three little-endian float32", () => {
    const message = encodeSetPosition([1.5, -2, 0.25]);
    expect(message.readUInt8(0)).toBe(0x04);
    expect(message.readUInt32LE(1)).toBe(12);
    expect(message.readFloatLE(5)).toBeCloseTo(1.5, 6);
    expect(message.readFloatLE(9)).toBeCloseTo(-2, 6);
    expect(message.readFloatLE(13)).toBeCloseTo(0.25, 6);
  });

  it("hello is the magic plus a version byte", () => {
    expect([...HELLO]).toEqual([0x53, 0x41, 0x49, 0x4c, 0x01]);
  });
});

describe("reply decoders", () => {
  it("reads the register reply with names and category table", () => {
    const body = Buffer.concat([
      (() => {
        const head = Buffer.alloc(5);
        head.writeUInt32LE(7, 0);
        head.writeUInt8(2, 4);
        return head;
      })(),
      text("room"),
      text("café 汉"),
      Buffer.from([2, 0]),
      Buffer.from([0]),
      text("background"),
      Buffer.from([3]),
      text("cube"),
    ]);
    const reply = decodeRegisterReply(body);
    expect(reply.agentId).toBe(7);
    expect(reply.sceneNames).toEqual(["room", "café 汉"]);
    expect(reply.categories).toEqual([
      [0, "background"],
      [3, "cube"],
    ]);
  });

  it("rejects trailing bytes after a reply", () => {
    const body = Buffer.concat([Buffer.from([1]), Buffer.from([9])]);
    expect(() => decodeFollowReply(body)).toThrow(ProtocolError);
  });

  it("reads error replies as a code and text", () => {
    const body = Buffer.concat([Buffer.from([2]), text("unknown scene")]);
    expect(decodeError(body)).toEqual({ code: 2, message: "unknown scene" });
  });
});

describe("frame reply decoding", () => {
  const width = 3;
  const height = 2;

  function viewEntry(viewId: number, raw: Buffer, compression: number): Buffer {
    const payload = compression === COMPRESSION_GZIP ? gzipSync(raw) : raw;
    const head = Buffer.alloc(10);
    head.writeUInt8(viewId, 0);
    head.writeUInt8(compression, 1);
    head.writeUInt32LE(raw.length, 2);
    head.writeUInt32LE(payload.length, 6);
    return Buffer.concat([head, payload]);
  }

  function sampleRaw(): Record<string, Buffer> {
    const pixels = width * height;
    const flow = Buffer.alloc(pixels * 8);
    for (let i = 0; i < pixels * 2; i++) {
      flow.writeFloatLE(i - 3.5, i * 4);
    }
    return {
      main: Buffer.from(Array.from({ length: pixels * 3 }, (_, i) => i)),
      category: Buffer.from([0, 1, 2, 3, 4, 5]),
      object: Buffer.from(Array.from({ length: pixels * 3 }, (_, i) => 255 - i)),
      flow,
      depth: Buffer.from([255, 200, 150, 100, 50, 0]),
    };
  }

  function sampleBody(compression: number): Buffer {
    const raw = sampleRaw();
    const entries = Object.entries(raw).map(([name, bytes]) =>
      viewEntry(VIEW_IDS[name as keyof typeof VIEW_IDS], bytes, compression),
    );
    return Buffer.concat([Buffer.from([entries.length]), ...entries]);
  }

  it("decodes raw views into typed arrays", () => {
    const views = decodeFrameReply(sampleBody(COMPRESSION_RAW), width, height);
    expect(views.main).toBeInstanceOf(Uint8Array);
    expect([...views.category!]).toEqual([0, 1, 2, 3, 4, 5]);
    expect(views.flow).toBeInstanceOf(Float32Array);
    expect(views.flow!.length).toBe(width * height * 2);
    expect(views.flow![0]).toBeCloseTo(-3.5, 6);
    expect(views.flow![11]).toBeCloseTo(7.5, 6);
    expect([...views.depth!]).toEqual([255, 200, 150, 100, 50, 0]);
  });

  it("decodes gzip views to the same arrays as raw", () => {
    const raw = decodeFrameReply(sampleBody(COMPRESSION_RAW), width, height);
    const zipped = decodeFrameReply(sampleBody(COMPRESSION_GZIP), width, height);
    for (const name of ["main", "category", "object", "depth"] as const) {
      expect([...zipped[name]!]).toEqual([...raw[name]!]);
    }
    expect([...(zipped.flow as Float32Array)]).toEqual([...(raw.flow as Float32Array)]);
  });

  it("rejects unknown view ids", () => {
    const body = Buffer.concat([
      Buffer.from([1]),
      viewEntry(9, Buffer.alloc(width * height), COMPRESSION_RAW),
    ]);
    expect(() => decodeFrameReply(body, width, height)).toThrow(/unknown view id/);
  });

  it("rejects size mismatches against the registered resolution", () => {
    const body = Buffer.concat([
      Buffer.from([1]),
      viewEntry(VIEW_IDS.depth, Buffer.alloc(width * height), COMPRESSION_RAW),
    ]);
    expect(() => decodeFrameReply(body, width + 1, height)).toThrow(ProtocolError);
  });

  it("rejects corrupt gzip payloads", () => {
    const raw = Buffer.alloc(width * height);
    const payload = gzipSync(raw);
    payload[payload.length - 1] ^= 0xff;
    const head = Buffer.alloc(10);
    head.writeUInt8(VIEW_IDS.depth, 0);
    head.writeUInt8(COMPRESSION_GZIP, 1);
    head.writeUInt32LE(raw.length, 2);
    head.writeUInt32LE(payload.length, 6);
    const body = Buffer.concat([Buffer.from([1]), head, payload]);
    expect(() => decodeFrameReply(body, width, height)).toThrow(ProtocolError);
  });

  it("rejects a declared uncompressed length that disagrees", () => {
    const raw = Buffer.alloc(width * height);
    const head = Buffer.alloc(10);
    head.writeUInt8(VIEW_IDS.category, 0);
    head.writeUInt8(COMPRESSION_RAW, 1);
    head.writeUInt32LE(raw.length + 1, 2);
    head.writeUInt32LE(raw.length, 6);
    const body = Buffer.concat([Buffer.from([1]), head, raw]);
    expect(() => decodeFrameReply(body, width, height)).toThrow(/declares/);
  });

  it("get_frame requests have an empty body", () => {
    const parsed = tryDecodeMessage(Buffer.from([OP_GET_FRAME, 0, 0, 0, 0]));
    expect(parsed!.message.opcode).toBe(OP_GET_FRAME);
    expect(parsed!.message.body.length).toBe(0);
  });
});
