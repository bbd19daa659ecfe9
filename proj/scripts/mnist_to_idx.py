#!/usr/bin/env python3
"""Convert the digit JSON files of the npm `mnist` package to IDX files.

Usage: mnist_to_idx.py DIGITS_DIR OUT_DIR

DIGITS_DIR holds 0.json .. 9.json, each {"data": [...]} with the images of one
digit concatenated as 784 floats in 0..1 per image.
Rows are shuffled with a fixed seed so the classes are interleaved.
"""

import json
import random
import struct
import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    rows = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"{digit}.json: {len(data)} values is not a multiple of 784")
        for start in range(0, len(data), 784):
            flat = data[start:start + 784]
            rows.append((digit, bytes(min(255, max(0, round(v * 255))) for v in flat)))
    random.Random(0).shuffle(rows)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for _, pixels in rows:
            f.write(pixels)
    with open(out / "labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for label, _ in rows))
    print(f"wrote {len(rows)} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
