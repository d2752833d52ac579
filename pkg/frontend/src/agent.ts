// Blocking-style client for the viewsim frame server. One request may be in
// flight at a time, mirroring the remote API's strict request/reply cycle.

import { Socket } from "node:net";

import {
  ALL_VIEWS_MASK,
  COMPRESSION_GZIP,
  COMPRESSION_RAW,
  HELLO,
  OP_CHANGE_SCENE,
  OP_DELETE,
  OP_ERROR,
  OP_GET_FRAME,
  OP_REGISTER,
  OP_SET_POSITION,
  OP_SET_ROTATION,
  OP_TOGGLE_FOLLOW,
  ProtocolError,
  RESPONSE_FLAG,
  VIEW_ORDER,
  decodeAck,
  decodeChangeSceneReply,
  decodeError,
  decodeFollowReply,
  decodeFrameReply,
  decodeRegisterReply,
  encodeChangeScene,
  encodeDelete,
  encodeGetFrame,
  encodeRegister,
  encodeSetPosition,
  encodeSetRotation,
  encodeToggleFollow,
  tryDecodeMessage,
  type Message,
} from "./protocol.js";

// The server rejected a request; `code` is the wire error code.
export class ServerError extends Error {
  constructor(
    readonly code: number,
    message: string,
  ) {
    super(message);
    this.name = "ServerError";
  }
}

// The client was used out of order (before register, after delete, or with
// a request already in flight). Nothing was sent to the server.
export class StateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StateError";
  }
}

export type Vec3 = readonly [number, number, number];

export interface FrameViews {
  main: Uint8Array; // height*width*3, BGR
  category: Uint8Array; // height*width
  object: Uint8Array; // height*width*3, BGR-packed instance ids
  flow: Float32Array; // height*width*2, (dx, dy) in px/s
  depth: Uint8Array; // height*width, 255 near, 0 far
}

type Waiter =
  | { kind: "bytes"; count: number; resolve: (chunk: Buffer) => void; reject: (err: Error) => void }
  | { kind: "message"; resolve: (msg: Message) => void; reject: (err: Error) => void };

export class Agent {
  readonly width: number;
  readonly height: number;
  readonly host: string;
  readonly port: number;

  agentId: number | null = null;
  scenes: string[] = [];
  categories = new Map<number, string>();

  private readonly compression: number;
  private socket: Socket | null = null;
  private received: Buffer = Buffer.alloc(0);
  private waiter: Waiter | null = null;
  private deleted = false;

  constructor(width: number, height: number, host = "127.0.0.1", port = 8085, gzip = false) {
    this.width = width;
    this.height = height;
    this.host = host;
    this.port = port;
    this.compression = gzip ? COMPRESSION_GZIP : COMPRESSION_RAW;
  }

  // Connect, exchange the hello, and register for all five views. On any
  // failure the agent is left unregistered and may be retried.
  async register(): Promise<void> {
    if (this.deleted) {
      throw new StateError("agent was deleted");
    }
    if (this.socket !== null) {
      throw new StateError("already registered");
    }
    const socket = new Socket();
    socket.setNoDelay(true);
    try {
      await new Promise<void>((resolve, reject) => {
        socket.once("error", reject);
        socket.connect(this.port, this.host, () => {
          socket.removeListener("error", reject);
          resolve();
        });
      });
      this.socket = socket;
      socket.on("data", (chunk: Buffer) => this.onData(chunk));
      socket.on("error", (err: Error) => this.onSocketDown(err));
      socket.on("close", () => this.onSocketDown(new Error("connection closed by server")));

      socket.write(HELLO);
      const echo = await this.readBytes(HELLO.length);
      if (!echo.equals(HELLO)) {
        throw new ProtocolError("server hello did not echo the handshake");
      }
      const body = await this.request(
        encodeRegister(this.width, this.height, ALL_VIEWS_MASK, this.compression),
        OP_REGISTER | RESPONSE_FLAG,
      );
      const reply = decodeRegisterReply(body);
      this.agentId = reply.agentId;
      this.scenes = reply.sceneNames;
      this.categories = new Map(reply.categories);
    } catch (err) {
      this.teardown();
      throw err;
    }
  }

  async change_scene(sceneIndex: number): Promise<void> {
    this.requireRegistered();
    const body = await this.request(
      encodeChangeScene(sceneIndex),
      OP_CHANGE_SCENE | RESPONSE_FLAG,
    );
    this.categories = new Map(decodeChangeSceneReply(body));
  }

  async get_frame(): Promise<FrameViews> {
    this.requireRegistered();
    const body = await this.request(encodeGetFrame(), OP_GET_FRAME | RESPONSE_FLAG);
    const views = decodeFrameReply(body, this.width, this.height);
    for (const name of VIEW_ORDER) {
      if (views[name] === undefined) {
        throw new ProtocolError(`frame reply is missing the ${name} view`);
      }
    }
    return views as unknown as FrameViews;
  }

  async set_position(position: Vec3): Promise<void> {
    this.requireRegistered();
    decodeAck(await this.request(encodeSetPosition(position), OP_SET_POSITION | RESPONSE_FLAG));
  }

  async set_rotation(rotation: Vec3): Promise<void> {
    this.requireRegistered();
    decodeAck(await this.request(encodeSetRotation(rotation), OP_SET_ROTATION | RESPONSE_FLAG));
  }

  // Returns the follow state now in effect.
  async toggle_follow(): Promise<boolean> {
    this.requireRegistered();
    const body = await this.request(encodeToggleFollow(), OP_TOGGLE_FOLLOW | RESPONSE_FLAG);
    return decodeFollowReply(body);
  }

  // Unregister from the server and close the connection. The agent cannot
  // be used afterwards.
  async delete(): Promise<void> {
    this.requireRegistered();
    decodeAck(await this.request(encodeDelete(), OP_DELETE | RESPONSE_FLAG));
    this.deleted = true;
    this.teardown();
  }

  // Drop the connection without unregistering; for cleanup paths.
  close(): void {
    this.deleted = true;
    this.teardown();
  }

  private requireRegistered(): void {
    if (this.deleted) {
      throw new StateError("agent was deleted");
    }
    if (this.socket === null || this.agentId === null) {
      throw new StateError("call register() first");
    }
  }

  private teardown(): void {
    const socket = this.socket;
    this.socket = null;
    this.agentId = null;
    if (socket !== null) {
      socket.removeAllListeners("close");
      socket.removeAllListeners("error");
      socket.on("error", () => undefined);
      socket.destroy();
    }
    if (this.waiter !== null) {
      const waiter = this.waiter;
      this.waiter = null;
      waiter.reject(new StateError("connection was closed"));
    }
  }

  private onData(chunk: Buffer): void {
    this.received = this.received.length === 0 ? chunk : Buffer.concat([this.received, chunk]);
    this.pump();
  }

  private onSocketDown(err: Error): void {
    if (this.waiter !== null) {
      const waiter = this.waiter;
      this.waiter = null;
      waiter.reject(err);
    }
  }

  private pump(): void {
    if (this.waiter === null) {
      return;
    }
    const waiter = this.waiter;
    if (waiter.kind === "bytes") {
      if (this.received.length < waiter.count) {
        return;
      }
      const chunk = this.received.subarray(0, waiter.count);
      this.received = this.received.subarray(waiter.count);
      this.waiter = null;
      waiter.resolve(chunk);
      return;
    }
    let parsed;
    try {
      parsed = tryDecodeMessage(this.received);
    } catch (err) {
      this.waiter = null;
      waiter.reject(err as Error);
      return;
    }
    if (parsed === null) {
      return;
    }
    this.received = parsed.rest;
    this.waiter = null;
    waiter.resolve(parsed.message);
  }

  private readBytes(count: number): Promise<Buffer> {
    return new Promise<Buffer>((resolve, reject) => {
      this.waiter = { kind: "bytes", count, resolve, reject };
      this.pump();
    });
  }

  private readMessage(): Promise<Message> {
    return new Promise<Message>((resolve, reject) => {
      this.waiter = { kind: "message", resolve, reject };
      this.pump();
    });
  }

  private async request(message: Buffer, expectedOpcode: number): Promise<Buffer> {
    if (this.socket === null) {
      throw new StateError("not connected");
    }
    if (this.waiter !== null) {
      throw new StateError("a request is already in flight");
    }
    // Claim the reply slot before writing so a concurrent call fails fast
    // instead of interleaving its bytes with ours.
    const pending = this.readMessage();
    this.socket.write(message);
    const reply = await pending;
    if (reply.opcode === OP_ERROR) {
      const { code, message: text } = decodeError(reply.body);
      throw new ServerError(code, text);
    }
    if (reply.opcode !== expectedOpcode) {
      throw new ProtocolError(
        `expected reply opcode 0x${expectedOpcode.toString(16)}, got 0x${reply.opcode.toString(16)}`,
      );
    }
    return reply.body;
  }
}
