#!/usr/bin/env python3
"""Convert a local copy of the USPS digits into the dynef dataset CSV.

Accepted inputs:
  * the HDF5 release (`usps.h5`, groups `train`/`test` with `data` and `target`),
  * the LIBSVM text release (`usps`, `usps.t`: label then index:value pairs,
    pixels in [-1, 1], labels 1..10 for digits 0..9).

Only the requested digits are kept; the label column is the position of the
digit in --digits, so `--digits 1,7` gives labels 0 and 1. Pixels are written
in row-major order scaled to [0, 1].
"""
import argparse
import csv
import sys

import numpy as np


def read_libsvm(path, n_pixels):
    images, digits = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            row = np.zeros(n_pixels)
            for item in parts[1:]:
                k, v = item.split(":")
                row[int(k) - 1] = float(v)
            images.append((row + 1.0) / 2.0)
            digits.append(int(float(parts[0])) - 1)
    return np.array(images), np.array(digits)


def read_h5(path, split):
    import h5py

    with h5py.File(path, "r") as f:
        return np.asarray(f[split]["data"], dtype=float), np.asarray(f[split]["target"], dtype=int)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--split", default="train", help="HDF5 group to read (train or test)")
    ap.add_argument("--digits", default="1,7", help="comma-separated digits to keep")
    ap.add_argument("--per-class", type=int, default=0, help="keep at most this many images per digit (0 = all)")
    ap.add_argument("--size", type=int, default=16, help="image side length")
    args = ap.parse_args()

    n_pixels = args.size * args.size
    if args.input.endswith((".h5", ".hdf5")):
        images, digits = read_h5(args.input, args.split)
    else:
        images, digits = read_libsvm(args.input, n_pixels)
    if images.shape[1] != n_pixels:
        sys.exit(f"expected {n_pixels} pixels per image, found {images.shape[1]}")
    images = np.clip(images, 0.0, 1.0)

    keep = [int(d) for d in args.digits.split(",")]
    counts = {d: 0 for d in keep}
    with open(args.output, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"p{i}" for i in range(n_pixels)] + ["label"])
        for img, d in zip(images, digits):
            if d not in counts or (args.per_class and counts[d] >= args.per_class):
                continue
            counts[d] += 1
            w.writerow([f"{v:.6g}" for v in img] + [keep.index(d)])
    print(", ".join(f"digit {d}: {n}" for d, n in counts.items()), file=sys.stderr)


if __name__ == "__main__":
    main()
