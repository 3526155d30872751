/** Grayscale frame loading: binary/ASCII PGM and non-interlaced 8-bit
 * grayscale PNG (the formats the engine's tooling writes). */
import { readFileSync } from "node:fs";
import { inflateSync } from "node:zlib";

export interface GrayImage {
  width: number;
  height: number;
  data: Uint8Array; // row-major intensities
}

export function loadGray(path: string): GrayImage {
  const buf = readFileSync(path);
  if (buf.length >= 8 && buf.readUInt32BE(0) === 0x89504e47) return decodePng(buf);
  const magic = buf.subarray(0, 2).toString("ascii");
  if (magic === "P5" || magic === "P2") return decodePgm(buf, magic);
  throw new Error(`unsupported image format in ${path}`);
}

function decodePgm(buf: Buffer, magic: string): GrayImage {
  // header: magic, width, height, maxval as whitespace-separated tokens,
  // comments start with '#'
  let pos = 2;
  const tokens: number[] = [];
  while (tokens.length < 3) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    tokens.push(Number(buf.subarray(start, pos).toString("ascii")));
  }
  const [width, height, maxval] = tokens;
  if (!(width > 0 && height > 0) || maxval > 255) {
    throw new Error("unsupported PGM header");
  }
  const data = new Uint8Array(width * height);
  if (magic === "P5") {
    pos++; // single whitespace after maxval
    buf.copy(data, 0, pos, pos + width * height);
  } else {
    const text = buf.subarray(pos).toString("ascii").trim().split(/\s+/);
    for (let i = 0; i < width * height; i++) data[i] = Number(text[i]);
  }
  return { width, height, data };
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function decodePng(buf: Buffer): GrayImage {
  let pos = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = -1;
  let interlace = 0;
  const idat: Buffer[] = [];
  while (pos + 8 <= buf.length) {
    const length = buf.readUInt32BE(pos);
    const type = buf.subarray(pos + 4, pos + 8).toString("ascii");
    const body = buf.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body[8];
      colorType = body[9];
      interlace = body[12];
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length; // length + type + crc
  }
  if (bitDepth !== 8 || colorType !== 0 || interlace !== 0) {
    throw new Error(
      `only 8-bit non-interlaced grayscale PNG supported (depth=${bitDepth}, color=${colorType})`,
    );
  }
  const raw = inflateSync(Buffer.concat(idat));
  const stride = width; // one byte per pixel
  const data = new Uint8Array(width * height);
  let prev = new Uint8Array(stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const line = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = new Uint8Array(stride);
    for (let x = 0; x < stride; x++) {
      const left = x > 0 ? out[x - 1] : 0;
      const up = prev[x];
      const upLeft = x > 0 ? prev[x - 1] : 0;
      let v = line[x];
      switch (filter) {
        case 0: break;
        case 1: v = (v + left) & 0xff; break;
        case 2: v = (v + up) & 0xff; break;
        case 3: v = (v + ((left + up) >> 1)) & 0xff; break;
        case 4: v = (v + paeth(left, up, upLeft)) & 0xff; break;
        default: throw new Error(`unknown PNG filter ${filter}`);
      }
      out[x] = v;
    }
    data.set(out, y * width);
    prev = out;
  }
  return { width, height, data };
}

export function encodePgm(img: GrayImage): Buffer {
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.data)]);
}
