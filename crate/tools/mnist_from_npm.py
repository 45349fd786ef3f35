#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package (10,000
MNIST digits, 28x28, pixels in [0,1] rounded to 3 decimals) into gzipped IDX
files plus a manifest entry.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist10k

Samples are interleaved with a fixed seed so that any prefix is class-balanced
enough to serve as a training split.
"""
import gzip
import hashlib
import json
import random
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    samples = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for i in range(len(flat) // 784):
            px = bytes(round(v * 255) for v in flat[i * 784:(i + 1) * 784])
            samples.append((px, digit))
    random.Random(20220101).shuffle(samples)
    n = len(samples)

    dst.mkdir(parents=True, exist_ok=True)
    images = struct.pack(">IIII", 0x803, n, 28, 28) + b"".join(p for p, _ in samples)
    labels = struct.pack(">II", 0x801, n) + bytes(d for _, d in samples)
    # mtime=0 keeps the gzip bytes reproducible
    with gzip.GzipFile(dst / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(images)
    with gzip.GzipFile(dst / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(labels)
    print(json.dumps({
        "n": n,
        "images_sha256": hashlib.sha256((dst / "images-idx3-ubyte.gz").read_bytes()).hexdigest(),
        "labels_sha256": hashlib.sha256((dst / "labels-idx1-ubyte.gz").read_bytes()).hexdigest(),
    }, indent=2))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
