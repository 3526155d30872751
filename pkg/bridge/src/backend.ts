/** Segmentation backends. The fixture backend segments bright connected
 * regions by intensity threshold and tracks them across frames by seeding
 * each unprompted frame from the nearest known mask's centroid. It exists so
 * the protocol surface can be driven end-to-end on trivially segmentable
 * clips; a real model plugs in behind the same interface. */
import type { GrayImage } from "./image.js";
import { emptyMask, type Mask } from "./rle.js";

export interface PointPrompt {
  x: number;
  y: number;
  polarity?: "positive" | "negative";
}

export interface BoxPrompt {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface PromptSet {
  frame_index: number;
  target_id: number;
  points: PointPrompt[];
  box: BoxPrompt | null;
}

export interface VideoBackend {
  segmentFrame(
    frames: GrayImage[],
    frameIndex: number,
    points: PointPrompt[],
    box: BoxPrompt | null,
  ): Mask;
  propagate(frames: GrayImage[], promptSets: PromptSet[]): Mask[];
}

export interface FixtureOptions {
  threshold: number;
  seekRadius: number;
}

export const defaultFixtureOptions: FixtureOptions = { threshold: 127, seekRadius: 6 };

function component(img: GrayImage, seedX: number, seedY: number, threshold: number): Mask {
  const { width, height, data } = img;
  const mask = emptyMask(width, height);
  if (data[seedY * width + seedX] <= threshold) return mask;
  const stack = [seedY * width + seedX];
  mask.data[stack[0]] = 1;
  while (stack.length) {
    const off = stack.pop()!;
    const y = Math.floor(off / width);
    const x = off % width;
    for (let dy = -1; dy <= 1; dy++) {
      for (let dx = -1; dx <= 1; dx++) {
        if (!dy && !dx) continue;
        const ny = y + dy;
        const nx = x + dx;
        if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
        const noff = ny * width + nx;
        if (!mask.data[noff] && data[noff] > threshold) {
          mask.data[noff] = 1;
          stack.push(noff);
        }
      }
    }
  }
  return mask;
}

function clipToBox(mask: Mask, box: BoxPrompt | null): Mask {
  if (!box) return mask;
  const { width, height } = mask;
  const out = emptyMask(width, height);
  const y0 = Math.max(0, box.y0);
  const y1 = Math.min(height - 1, box.y1);
  const x0 = Math.max(0, box.x0);
  const x1 = Math.min(width - 1, box.x1);
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      out.data[y * width + x] = mask.data[y * width + x];
    }
  }
  return out;
}

function centroid(mask: Mask): { x: number; y: number } | null {
  let sx = 0;
  let sy = 0;
  let n = 0;
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i]) {
      sy += Math.floor(i / mask.width);
      sx += i % mask.width;
      n++;
    }
  }
  if (!n) return null;
  return { x: Math.round(sx / n), y: Math.round(sy / n) };
}

export class FixtureBackend implements VideoBackend {
  constructor(private opts: FixtureOptions = defaultFixtureOptions) {}

  segmentFrame(
    frames: GrayImage[],
    frameIndex: number,
    points: PointPrompt[],
    box: BoxPrompt | null,
  ): Mask {
    const img = frames[frameIndex];
    const union = emptyMask(img.width, img.height);
    for (const p of points) {
      if ((p.polarity ?? "positive") !== "positive") continue;
      const comp = component(img, p.x, p.y, this.opts.threshold);
      for (let i = 0; i < union.data.length; i++) union.data[i] |= comp.data[i];
    }
    for (const p of points) {
      if ((p.polarity ?? "positive") === "positive") continue;
      const comp = component(img, p.x, p.y, this.opts.threshold);
      for (let i = 0; i < union.data.length; i++) {
        if (comp.data[i]) union.data[i] = 0;
      }
    }
    return clipToBox(union, box);
  }

  /** Segment a frame from a seed carried over from a neighbouring frame's
   * mask; scans a small window around the seed when it misses the object. */
  private segmentFromSeed(img: GrayImage, seed: { x: number; y: number }): Mask {
    const { threshold, seekRadius } = this.opts;
    for (let r = 0; r <= seekRadius; r++) {
      for (let dy = -r; dy <= r; dy++) {
        for (let dx = -r; dx <= r; dx++) {
          if (Math.max(Math.abs(dy), Math.abs(dx)) !== r) continue;
          const x = seed.x + dx;
          const y = seed.y + dy;
          if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
          if (img.data[y * img.width + x] > threshold) {
            return component(img, x, y, threshold);
          }
        }
      }
    }
    return emptyMask(img.width, img.height);
  }

  propagate(frames: GrayImage[], promptSets: PromptSet[]): Mask[] {
    const results: (Mask | null)[] = frames.map(() => null);
    for (const ps of promptSets) {
      results[ps.frame_index] = this.segmentFrame(frames, ps.frame_index, ps.points, ps.box);
    }
    const prompted = promptSets.map((p) => p.frame_index).sort((a, b) => a - b);
    const first = prompted[0];
    // forward from the first prompted frame, then backward to cover the head
    for (let t = first + 1; t < frames.length; t++) {
      if (results[t]) continue;
      results[t] = this.carry(frames, results[t - 1]!, t);
    }
    for (let t = first - 1; t >= 0; t--) {
      results[t] = this.carry(frames, results[t + 1]!, t);
    }
    return results.map((m) => m!);
  }

  private carry(frames: GrayImage[], from: Mask, t: number): Mask {
    const seed = centroid(from);
    if (!seed) return emptyMask(frames[t].width, frames[t].height);
    return this.segmentFromSeed(frames[t], seed);
  }
}
