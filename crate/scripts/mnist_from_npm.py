#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into IDX files.

Usage: mnist_from_npm.py <package/src/digits dir> <out prefix> [count]

Digits are interleaved by class (0,1,...,9,0,1,...) so any prefix of the
output is roughly class balanced. Pixels are stored as round(v * 255).
"""
import json
import struct
import sys


def main():
    src, prefix = sys.argv[1], sys.argv[2]
    count = int(sys.argv[3]) if len(sys.argv) > 3 else None
    per_class = []
    for digit in range(10):
        with open(f"{src}/{digit}.json") as f:
            data = json.load(f)["data"]
        per_class.append([data[i:i + 784] for i in range(0, len(data), 784)])

    images, labels = [], []
    row = 0
    while any(row < len(c) for c in per_class):
        for digit, imgs in enumerate(per_class):
            if row < len(imgs):
                images.append(imgs[row])
                labels.append(digit)
        row += 1
    if count is not None:
        images, labels = images[:count], labels[:count]

    with open(f"{prefix}-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))
    with open(f"{prefix}-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {prefix}-*")


if __name__ == "__main__":
    main()
