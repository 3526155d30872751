/** Text RLE mask codec: "W H r0 r1 ...", runs alternate background/foreground
 * row-major, starting with background (r0 may be 0), summing to W*H. */

export interface Mask {
  width: number;
  height: number;
  /** row-major, values 0 | 1 */
  data: Uint8Array;
}

export function emptyMask(width: number, height: number): Mask {
  return { width, height, data: new Uint8Array(width * height) };
}

export function encodeRle(mask: Mask): string {
  const { width, height, data } = mask;
  const parts: number[] = [];
  let value = 0;
  let run = 0;
  for (let i = 0; i < data.length; i++) {
    const v = data[i] ? 1 : 0;
    if (v === value) {
      run++;
    } else {
      parts.push(run);
      value = v;
      run = 1;
    }
  }
  parts.push(run);
  return `${width} ${height} ${parts.join(" ")}`;
}

export function decodeRle(text: string): Mask {
  const fields = text.trim().split(/\s+/);
  if (fields.length < 2) throw new Error("RLE text must start with 'W H'");
  const values = fields.map((f) => {
    const n = Number(f);
    if (!Number.isInteger(n)) throw new Error(`bad RLE token ${f}`);
    return n;
  });
  const [width, height, ...runs] = values;
  if (width < 1 || height < 1) throw new Error(`bad RLE dimensions ${width}x${height}`);
  if (runs.some((r) => r < 0)) throw new Error("RLE runs must be >= 0");
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== width * height) {
    throw new Error(`RLE runs sum to ${total}, expected ${width * height}`);
  }
  const data = new Uint8Array(width * height);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (value) data.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return { width, height, data };
}

export function maskIou(a: Mask, b: Mask): number {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error("mask dimension mismatch");
  }
  let inter = 0;
  let union = 0;
  for (let i = 0; i < a.data.length; i++) {
    const av = a.data[i] ? 1 : 0;
    const bv = b.data[i] ? 1 : 0;
    inter += av & bv;
    union += av | bv;
  }
  if (union === 0) return 1.0;
  return inter / union;
}
