"""Builds the digits-0/1 MNIST subset in IDX format.

Source: the `mnist` npm package (version 1.1.0), whose `src/digits/<d>.json`
files hold `{"data": [...]}` with 784 grayscale values per image scaled to
[0, 1] and rounded to three decimals. Pixels are mapped back to bytes with
round(v * 255).

Usage: python3 make_mnist01.py <path-to-package/src/digits> <out-dir>
"""

import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 512
TEST_PER_CLASS = 128


def load_digit(src: Path, d: int) -> list[bytes]:
    values = json.loads((src / f"{d}.json").read_text())["data"]
    images = []
    for i in range(len(values) // 784):
        px = values[i * 784 : (i + 1) * 784]
        images.append(bytes(max(0, min(255, round(v * 255))) for v in px))
    return images


def write_idx(out: Path, name: str, images: list[bytes], labels: list[int]) -> None:
    with open(out / f"{name}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with open(out / f"{name}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main() -> None:
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    zeros, ones = load_digit(src, 0), load_digit(src, 1)
    need = TRAIN_PER_CLASS + TEST_PER_CLASS
    assert len(zeros) >= need and len(ones) >= need
    for name, lo, hi in (("train", 0, TRAIN_PER_CLASS), ("test", TRAIN_PER_CLASS, need)):
        images, labels = [], []
        for i in range(lo, hi):
            images += [zeros[i], ones[i]]
            labels += [0, 1]
        write_idx(out, name, images, labels)


if __name__ == "__main__":
    main()
