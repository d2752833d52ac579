export { Agent, ServerError, StateError, type FrameViews, type Vec3 } from "./agent.js";
export * as protocol from "./protocol.js";
