#!/usr/bin/env python3
"""Convert a MedMNIST .npz archive (e.g. breastmnist.npz) to IDX files.

Writes <split>-images.idx and <split>-labels.idx for train, val and test.
"""

import argparse
import pathlib
import struct

import numpy as np


def write_idx(path, magic, array):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(np.ascontiguousarray(array, dtype=np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("npz", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    args = parser.parse_args()

    data = np.load(args.npz)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for split in ("train", "val", "test"):
        images = data[f"{split}_images"]
        labels = data[f"{split}_labels"].reshape(-1)
        if images.ndim != 3:
            raise SystemExit(f"{split}_images: expected grayscale (N, H, W), got {images.shape}")
        if not np.isin(labels, (0, 1)).all():
            raise SystemExit(f"{split}_labels: expected binary labels")
        write_idx(args.out_dir / f"{split}-images.idx", 0x00000803, images)
        write_idx(args.out_dir / f"{split}-labels.idx", 0x00000801, labels)
        print(f"{split}: {len(labels)} images {images.shape[1]}x{images.shape[2]}, {int(labels.sum())} positive")


if __name__ == "__main__":
    main()
