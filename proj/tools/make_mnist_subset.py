#!/usr/bin/env python3
# Copyright 2026 The flchain-sim Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Build the desk-scale MNIST subset (6,000 train / 1,000 test) as IDX files.

The source is the `mnist` npm package, which ships 10,000 MNIST digits as
per-class JSON arrays of 784 floats in [0, 1]. Fetch it with

    npm pack mnist && tar xzf mnist-*.tgz

then run

    tools/make_mnist_subset.py package/src/digits data/mnist-subset
"""

import argparse
import json
import pathlib
import struct

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--train", type=int, default=6000)
    parser.add_argument("--test", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    images, labels = [], []
    for digit in range(10):
        flat = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        pixels = np.asarray(flat, dtype=np.float64).reshape(-1, 784)
        images.append(np.rint(pixels * 255.0).clip(0, 255))
        labels.append(np.full(pixels.shape[0], digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.default_rng(args.seed).permutation(labels.shape[0])
    if args.train + args.test > order.shape[0]:
        raise SystemExit(f"only {order.shape[0]} samples available")
    train = order[: args.train]
    test = order[args.train : args.train + args.test]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx_images(args.out_dir / "train-images-idx3-ubyte", images[train])
    write_idx_labels(args.out_dir / "train-labels-idx1-ubyte", labels[train])
    write_idx_images(args.out_dir / "t10k-images-idx3-ubyte", images[test])
    write_idx_labels(args.out_dir / "t10k-labels-idx1-ubyte", labels[test])
    print(f"train={train.shape[0]} test={test.shape[0]} -> {args.out_dir}")
    print("train class counts:", np.bincount(labels[train], minlength=10).tolist())
    print("test class counts:", np.bincount(labels[test], minlength=10).tolist())


if __name__ == "__main__":
    main()
