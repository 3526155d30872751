"""Minimal scripted peer for client-side protocol tests: answers hello with a
configurable version and every segment/propagate request with a fixed RLE
mask. --die-after N exits abruptly after N responses."""
import argparse
import json
import sys


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--version", type=int, default=1)
    parser.add_argument("--rle", default="4 3 9 1 2")
    parser.add_argument("--frames", type=int, default=3)
    parser.add_argument("--die-after", type=int, default=0)
    args = parser.parse_args()

    sent = 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        rid = req.get("id")
        op = req.get("op")
        if op == "hello":
            reply = {"ok": True, "version": args.version}
        elif op == "open_session":
            reply = {"ok": True}
        elif op == "segment_frame":
            reply = {"ok": True, "mask": args.rle}
        elif op == "propagate_video":
            reply = {"ok": True, "masks": [args.rle] * args.frames}
        else:
            reply = {"ok": False, "error": {"message": f"unexpected op {op}",
                                            "retryable": False}}
        if rid is not None:
            reply["id"] = rid
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
        sent += 1
        if args.die_after and sent >= args.die_after:
            sys.exit(1)


if __name__ == "__main__":
    main()
