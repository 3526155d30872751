import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { after, test } from "node:test";

import { decodeRle, maskIou } from "../src/rle.js";
import { BridgeProcess, fixturesDir, makeClip } from "./helpers.js";

const procs: BridgeProcess[] = [];

function start(args: string[] = []): BridgeProcess {
  const p = new BridgeProcess(args);
  procs.push(p);
  return p;
}

after(() => {
  for (const p of procs) p.close();
});

test("handshake fixtures", async () => {
  const bridge = start();
  const cases = JSON.parse(readFileSync(join(fixturesDir, "handshake.json"), "utf-8"));
  for (const c of cases) {
    const reply = await bridge.request(c.send);
    for (const [key, value] of Object.entries(c.expect)) {
      assert.deepEqual(reply[key], value);
    }
  }
});

test("malformed-input fuzz: one error response per line, zero crashes", async () => {
  const bridge = start();
  const lines = readFileSync(join(fixturesDir, "malformed.jsonl"), "utf-8")
    .split("\n")
    .filter((l) => l.trim());
  for (const line of lines) {
    bridge.sendRaw(line);
    const reply = JSON.parse(await bridge.readLine());
    assert.equal(reply.ok, false, `line ${line} must be refused`);
    assert.equal(typeof reply.error.message, "string");
  }
  // random junk after the fixtures; the server must keep answering
  let state = 7;
  const rand = () => (state = (state * 1103515245 + 12345) & 0x7fffffff) / 0x7fffffff;
  for (let i = 0; i < 100; i++) {
    const len = 1 + Math.floor(rand() * 40);
    let junk = "";
    for (let j = 0; j < len; j++) junk += String.fromCharCode(33 + Math.floor(rand() * 90));
    bridge.sendRaw(junk.replace(/\s/g, "_"));
    const reply = JSON.parse(await bridge.readLine());
    assert.equal(typeof reply.ok, "boolean");
  }
  assert.ok(bridge.alive);
  const hello = await bridge.request({ op: "hello", version: 1 });
  assert.equal(hello.ok, true);
});

test("session flow: segment, clip to box, structured errors", async () => {
  const bridge = start();
  const clip = makeClip({
    frames: 4, width: 48, height: 36, size: 10, startX: 6, startY: 12, stepX: 2,
  });
  assert.equal((await bridge.request({ op: "hello", version: 1 })).ok, true);
  const open = await bridge.request({
    op: "open_session", session: "s1", frames: clip.paths,
    width: 48, height: 36, target_id: 1,
  });
  assert.equal(open.ok, true);

  const [x0, y0, x1, y1] = clip.boxes[0];
  const seg = await bridge.request({
    op: "segment_frame", session: "s1", frame_index: 0,
    points: [{ x: x0 + 2, y: y0 + 2, polarity: "positive" }], box: null, id: 10,
  });
  assert.equal(seg.ok, true);
  const mask = decodeRle(seg.mask as string);
  let area = 0;
  for (const v of mask.data) area += v;
  assert.equal(area, 100); // the full 10x10 object
  assert.equal(mask.data[y0 * 48 + x0], 1);

  // a box smaller than the object clips the response
  const clipped = await bridge.request({
    op: "segment_frame", session: "s1", frame_index: 0,
    points: [{ x: x0 + 2, y: y0 + 2 }], box: [x0, y0, x0 + 4, y1], id: 11,
  });
  const clippedMask = decodeRle(clipped.mask as string);
  let clippedArea = 0;
  for (const v of clippedMask.data) clippedArea += v;
  assert.equal(clippedArea, 50);

  // a miss produces an empty mask, not an error
  const miss = await bridge.request({
    op: "segment_frame", session: "s1", frame_index: 0,
    points: [{ x: 1, y: 1 }], box: null, id: 12,
  });
  assert.equal(miss.ok, true);
  assert.ok((miss.mask as string).endsWith(`${48 * 36}`));

  // out-of-bounds point: structured error, session stays usable
  const oob = await bridge.request({
    op: "segment_frame", session: "s1", frame_index: 0,
    points: [{ x: 480, y: 2 }], box: null, id: 13,
  });
  assert.equal(oob.ok, false);
  assert.match((oob.error as { message: string }).message, /out of bounds/);
  const again = await bridge.request({
    op: "segment_frame", session: "s1", frame_index: 1,
    points: [{ x: x0 + 4, y: y0 + 4 }], box: null, id: 14,
  });
  assert.equal(again.ok, true);
});

test("propagation agrees with single-frame queries on prompted frames (IoU >= 0.5)", async () => {
  const bridge = start();
  const clip = makeClip({
    frames: 10, width: 64, height: 48, size: 12, startX: 4, startY: 18, stepX: 4,
  });
  await bridge.request({ op: "hello", version: 1 });
  await bridge.request({
    op: "open_session", session: "v", frames: clip.paths,
    width: 64, height: 48, target_id: 1,
  });

  const promptFrames = [2, 5, 8];
  const single: Record<number, ReturnType<typeof decodeRle>> = {};
  for (const t of promptFrames) {
    const [bx0, by0] = clip.boxes[t];
    const reply = await bridge.request({
      op: "segment_frame", session: "v", frame_index: t,
      points: [{ x: bx0 + 6, y: by0 + 6 }], box: null,
    });
    assert.equal(reply.ok, true);
    single[t] = decodeRle(reply.mask as string);
  }

  const prop = await bridge.request({
    op: "propagate_video", session: "v",
    prompt_sets: promptFrames.map((t) => ({
      frame_index: t, target_id: 1,
      points: [{ x: clip.boxes[t][0] + 6, y: clip.boxes[t][1] + 6 }],
      box: clip.boxes[t],
    })),
  });
  assert.equal(prop.ok, true);
  const masks = (prop.masks as string[]).map(decodeRle);
  assert.equal(masks.length, 10);
  for (const t of promptFrames) {
    assert.ok(maskIou(masks[t], single[t]) >= 0.5, `frame ${t} disagrees`);
  }
  // propagation covers frames before and after the prompted ones
  for (let t = 0; t < 10; t++) {
    let area = 0;
    for (const v of masks[t].data) area += v;
    assert.equal(area, 144, `frame ${t} should track the whole object`);
  }
});

test("propagate validations", async () => {
  const bridge = start();
  const clip = makeClip({
    frames: 3, width: 32, height: 24, size: 6, startX: 4, startY: 8, stepX: 1,
  });
  await bridge.request({
    op: "open_session", session: "v", frames: clip.paths,
    width: 32, height: 24, target_id: 1,
  });
  const dup = await bridge.request({
    op: "propagate_video", session: "v",
    prompt_sets: [
      { frame_index: 0, target_id: 1, points: [{ x: 5, y: 9 }], box: null },
      { frame_index: 0, target_id: 1, points: [{ x: 5, y: 9 }], box: null },
    ],
  });
  assert.equal(dup.ok, false);
  const empty = await bridge.request({ op: "propagate_video", session: "v", prompt_sets: [] });
  assert.equal(empty.ok, false);
  const unknown = await bridge.request({
    op: "propagate_video", session: "nope",
    prompt_sets: [{ frame_index: 0, target_id: 1, points: [], box: null }],
  });
  assert.equal(unknown.ok, false);
});
