#!/usr/bin/env python3
"""Fetch MNIST into IDX files that the dasmc CLI and tests can load.

Tries the canonical IDX mirrors first. When those are unreachable (e.g. a
sandboxed machine whose only egress is a package-manager mirror), it falls
back to the `mnist` npm package, which bundles 10,010 real MNIST digits as
JSON, and rebuilds IDX files from it: 9,010 training and 1,000 test images
with balanced classes. Pixel values in that package are bytes scaled by
1/255 and rounded to three decimals, so the original bytes are recovered
exactly.

Usage: python3 tools/fetch_mnist.py [output_dir]   (default: data/mnist)
"""

import json
import os
import shutil
import struct
import subprocess
import sys
import tempfile
import urllib.request

MIRRORS = [
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
]
FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def have_all(out_dir):
    return all(os.path.exists(os.path.join(out_dir, f)) for f in FILES)


def try_mirrors(out_dir):
    import gzip

    for mirror in MIRRORS:
        try:
            for name in FILES:
                url = mirror + name + ".gz"
                print(f"downloading {url}")
                with urllib.request.urlopen(url, timeout=30) as resp:
                    payload = gzip.decompress(resp.read())
                with open(os.path.join(out_dir, name), "wb") as out:
                    out.write(payload)
            return True
        except Exception as err:  # noqa: BLE001 - try the next mirror
            print(f"mirror failed: {err}")
    return False


def write_idx(out_dir, prefix, images, labels):
    n = len(images)
    with open(os.path.join(out_dir, f"{prefix}-images-idx3-ubyte"), "wb") as out:
        out.write(struct.pack(">IIII", 0x803, n, 28, 28))
        for img in images:
            out.write(bytes(img))
    with open(os.path.join(out_dir, f"{prefix}-labels-idx1-ubyte"), "wb") as out:
        out.write(struct.pack(">II", 0x801, n))
        out.write(bytes(labels))


def from_npm_package(out_dir):
    tmp = tempfile.mkdtemp(prefix="mnist_npm_")
    try:
        print("fetching the `mnist` npm package")
        subprocess.run(["npm", "pack", "mnist"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        tarball = next(f for f in os.listdir(tmp) if f.endswith(".tgz"))
        subprocess.run(["tar", "xzf", tarball], cwd=tmp, check=True)
        digits_dir = os.path.join(tmp, "package", "src", "digits")

        per_digit = []
        for d in range(10):
            with open(os.path.join(digits_dir, f"{d}.json")) as f:
                flat = json.load(f)["data"]
            count = len(flat) // 784
            imgs = [
                [min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784]]
                for i in range(count)
            ]
            per_digit.append(imgs)
            print(f"digit {d}: {count} images")

        test_per_class = 100
        train_images, train_labels, test_images, test_labels = [], [], [], []
        # Interleave classes so any prefix of either file is balanced.
        max_train = max(len(imgs) - test_per_class for imgs in per_digit)
        for i in range(max_train):
            for d in range(10):
                if i < len(per_digit[d]) - test_per_class:
                    train_images.append(per_digit[d][i])
                    train_labels.append(d)
        for i in range(test_per_class):
            for d in range(10):
                test_images.append(per_digit[d][len(per_digit[d]) - test_per_class + i])
                test_labels.append(d)

        write_idx(out_dir, "train", train_images, train_labels)
        write_idx(out_dir, "t10k", test_images, test_labels)
        print(f"wrote {len(train_images)} train / {len(test_images)} test images")
        return True
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "data/mnist"
    os.makedirs(out_dir, exist_ok=True)
    if have_all(out_dir):
        print(f"IDX files already present in {out_dir}")
        return 0
    if try_mirrors(out_dir) or from_npm_package(out_dir):
        print(f"MNIST ready in {out_dir}")
        return 0
    print("could not obtain MNIST from any source", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
