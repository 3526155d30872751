/** Protocol server: dispatches newline-delimited JSON requests onto a video
 * backend. Every input line gets exactly one response line; malformed input
 * never kills the process. */
import { loadGray, type GrayImage } from "./image.js";
import type { BoxPrompt, PointPrompt, PromptSet, VideoBackend } from "./backend.js";
import { encodeRle } from "./rle.js";

export const PROTOCOL_VERSION = 1;

interface Session {
  framePaths: string[];
  width: number;
  height: number;
  targetId: number;
}

type Json = Record<string, unknown>;

function errorResponse(message: string, retryable = false, id?: unknown): Json {
  const doc: Json = { ok: false, error: { message, retryable } };
  if (id !== undefined) doc.id = id;
  return doc;
}

function okResponse(id: unknown, extra: Json = {}): Json {
  const doc: Json = { ok: true, ...extra };
  if (id !== undefined) doc.id = id;
  return doc;
}

function asInt(value: unknown, name: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new Error(`${name} must be an integer`);
  }
  return value;
}

function parsePoints(value: unknown, width: number, height: number): PointPrompt[] {
  if (!Array.isArray(value)) throw new Error("points must be an array");
  return value.map((p) => {
    const x = asInt((p as Json).x, "point.x");
    const y = asInt((p as Json).y, "point.y");
    if (x < 0 || x >= width || y < 0 || y >= height) {
      throw new Error(`point (${x},${y}) out of bounds for ${width}x${height}`);
    }
    const polarity = ((p as Json).polarity ?? "positive") as PointPrompt["polarity"];
    if (polarity !== "positive" && polarity !== "negative") {
      throw new Error(`bad polarity ${polarity}`);
    }
    return { x, y, polarity };
  });
}

function parseBox(value: unknown): BoxPrompt | null {
  if (value === null || value === undefined) return null;
  if (!Array.isArray(value) || value.length !== 4) {
    throw new Error("box must be [x0, y0, x1, y1] or null");
  }
  const [x0, y0, x1, y1] = value.map((v, i) => asInt(v, `box[${i}]`));
  if (x0 > x1 || y0 > y1) throw new Error("box corners out of order");
  return { x0, y0, x1, y1 };
}

export class BridgeServer {
  private sessions = new Map<string, Session>();
  /** one decoded clip cached at a time; propagation backends hold big state */
  private frameCache: { key: string; frames: GrayImage[] } | null = null;

  constructor(private backend: VideoBackend) {}

  handleLine(line: string): string {
    const trimmed = line.trim();
    if (!trimmed) return "";
    let request: Json;
    try {
      const parsed = JSON.parse(trimmed);
      if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
        throw new Error("request must be a JSON object");
      }
      request = parsed as Json;
    } catch (exc) {
      return JSON.stringify(errorResponse(`malformed request: ${(exc as Error).message}`));
    }
    let response: Json;
    try {
      response = this.dispatch(request);
    } catch (exc) {
      response = errorResponse((exc as Error).message, false, request.id);
    }
    return JSON.stringify(response);
  }

  private dispatch(request: Json): Json {
    const id = request.id;
    switch (request.op) {
      case "hello":
        return okResponse(id, { version: PROTOCOL_VERSION });
      case "open_session": {
        const framePaths = request.frames;
        if (!Array.isArray(framePaths) || framePaths.length === 0) {
          throw new Error("frames must be a nonempty array of paths");
        }
        const width = asInt(request.width, "width");
        const height = asInt(request.height, "height");
        if (width < 1 || height < 1) throw new Error("bad session dimensions");
        const session: Session = {
          framePaths: framePaths.map(String),
          width,
          height,
          targetId: asInt(request.target_id ?? 0, "target_id"),
        };
        this.sessions.set(String(request.session), session);
        return okResponse(id);
      }
      case "close_session":
        this.sessions.delete(String(request.session));
        return okResponse(id);
      case "segment_frame": {
        const session = this.session(request);
        const frames = this.frames(session, String(request.session));
        const frameIndex = asInt(request.frame_index, "frame_index");
        if (frameIndex < 0 || frameIndex >= frames.length) {
          throw new Error(`frame_index ${frameIndex} out of range`);
        }
        const points = parsePoints(request.points ?? [], session.width, session.height);
        const box = parseBox(request.box);
        const mask = this.backend.segmentFrame(frames, frameIndex, points, box);
        return okResponse(id, { mask: encodeRle(mask) });
      }
      case "propagate_video": {
        const session = this.session(request);
        const frames = this.frames(session, String(request.session));
        const rawSets = request.prompt_sets;
        if (!Array.isArray(rawSets) || rawSets.length === 0) {
          throw new Error("prompt_sets must be a nonempty array");
        }
        const sets: PromptSet[] = rawSets.map((raw) => {
          const doc = raw as Json;
          const frameIndex = asInt(doc.frame_index, "frame_index");
          if (frameIndex < 0 || frameIndex >= frames.length) {
            throw new Error(`frame_index ${frameIndex} out of range`);
          }
          return {
            frame_index: frameIndex,
            target_id: asInt(doc.target_id ?? 0, "target_id"),
            points: parsePoints(doc.points ?? [], session.width, session.height),
            box: parseBox(doc.box),
          };
        });
        const seen = new Set(sets.map((s) => s.frame_index));
        if (seen.size !== sets.length) throw new Error("prompt frames must be distinct");
        const masks = this.backend.propagate(frames, sets);
        return okResponse(id, { masks: masks.map(encodeRle) });
      }
      default:
        throw new Error(`unknown op ${String(request.op)}`);
    }
  }

  private session(request: Json): Session {
    const sid = String(request.session);
    const session = this.sessions.get(sid);
    if (!session) throw new Error(`unknown session ${sid}`);
    return session;
  }

  private frames(session: Session, key: string): GrayImage[] {
    if (this.frameCache?.key !== key) {
      const frames = session.framePaths.map(loadGray);
      for (const f of frames) {
        if (f.width !== session.width || f.height !== session.height) {
          throw new Error(
            `frame is ${f.width}x${f.height}, session expects ${session.width}x${session.height}`,
          );
        }
      }
      this.frameCache = { key, frames };
    }
    return this.frameCache.frames;
  }
}
