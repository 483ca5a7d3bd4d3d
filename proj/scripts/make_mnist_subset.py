#!/usr/bin/env python3
"""Convert the 5000-digit MNIST subset shipped with mlxtend into gzipped IDX files.

Usage:
    pip download mlxtend --no-deps -d /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    wheel, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode().splitlines()
    pixels, labels = bytearray(), bytearray()
    for row in rows:
        values = [int(float(v)) for v in row.split(",")]
        pixels.extend(values[:-1])
        labels.append(values[-1])
    count = len(rows)
    images = struct.pack(">IIII", 0x00000803, count, 28, 28) + bytes(pixels)
    label_bytes = struct.pack(">II", 0x00000801, count) + bytes(labels)
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(out_dir / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(images)
    with gzip.GzipFile(out_dir / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(label_bytes)
    print(f"wrote {count} digits to {out_dir}")


if __name__ == "__main__":
    main()
