#!/usr/bin/env python3
"""Builds the CSV files under data/ used by the experiments and acceptance tests.

Sources:
  * MNIST digits from the `mnist` npm package (1001 images per digit), reduced
    to 14x14 by 2x2 mean pooling. 500 train + 300 test images per class.
  * UCI Statlog Landsat (sat.trn / sat.tst), turned into the tabular outlier
    sets `satellite` (classes 2, 4, 5 are outliers) and `satimage-2` (class 2
    subsampled to 71 outliers, every other class normal).

Each source is read from a local copy when given, otherwise downloaded.
The thyroid and cardio tables are not redistributed here; drop them into
data/odds/ as thyroid.csv and cardio.csv (columns x0.., label with +1 normal
and -1 anomaly) to enable those benchmarks.
"""

import argparse
import io
import json
import pathlib
import tarfile
import urllib.request

import numpy as np

MNIST_URL = "https://registry.npmjs.org/mnist/-/mnist-1.1.0.tgz"
LANDSAT_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/satimage/{}"
SATIMAGE2_OUTLIERS = 71
SATIMAGE2_SEED = 0


def fetch(url):
    with urllib.request.urlopen(url, timeout=60) as r:
        return r.read()


def mnist_digits(local):
    """Returns {digit: uint8 array (k, 784)}."""
    out = {}
    if local:
        for d in range(10):
            raw = json.loads((pathlib.Path(local) / f"{d}.json").read_text())["data"]
            out[d] = np.asarray(raw, dtype=np.float64).reshape(-1, 784)
        return out
    with tarfile.open(fileobj=io.BytesIO(fetch(MNIST_URL))) as tar:
        for d in range(10):
            raw = json.load(tar.extractfile(f"package/src/digits/{d}.json"))["data"]
            out[d] = np.asarray(raw, dtype=np.float64).reshape(-1, 784)
    return out


def pool14(x):
    return x.reshape(-1, 14, 2, 14, 2).mean(axis=(2, 4)).reshape(-1, 196)


def write_csv(path, features, extra_name, extra):
    path.parent.mkdir(parents=True, exist_ok=True)
    d = features.shape[1]
    with open(path, "w") as f:
        f.write(",".join([f"x{j}" for j in range(d)] + [extra_name]) + "\n")
        for row, e in zip(features, extra):
            f.write(",".join(f"{v:.6g}" for v in row) + f",{int(e)}\n")


def build_mnist(local, out_dir, n_train, n_test):
    digits = mnist_digits(local)
    tr_x, tr_y, te_x, te_y = [], [], [], []
    for d in range(10):
        x = pool14(digits[d])
        tr_x.append(x[:n_train])
        tr_y += [d] * n_train
        te_x.append(x[n_train:n_train + n_test])
        te_y += [d] * n_test
    write_csv(out_dir / "mnist14_train.csv", np.vstack(tr_x), "class", tr_y)
    write_csv(out_dir / "mnist14_test.csv", np.vstack(te_x), "class", te_y)


def landsat(local):
    parts = []
    for name, local_name in (("sat.trn", "sat.trn.txt"), ("sat.tst", "sat.tst.txt")):
        if local:
            text = (pathlib.Path(local) / local_name).read_text()
        else:
            text = fetch(LANDSAT_URL.format(name)).decode()
        parts.append(np.loadtxt(io.StringIO(text)))
    data = np.vstack(parts)
    return data[:, :-1], data[:, -1].astype(int)


def build_landsat(local, out_dir):
    x, y = landsat(local)
    outlier = np.isin(y, [2, 4, 5])
    write_csv(out_dir / "satellite.csv", x, "label", np.where(outlier, -1, 1))

    rng = np.random.default_rng(SATIMAGE2_SEED)
    twos = np.flatnonzero(y == 2)
    keep = np.sort(rng.choice(twos, SATIMAGE2_OUTLIERS, replace=False))
    rows = np.sort(np.concatenate([np.flatnonzero(y != 2), keep]))
    write_csv(out_dir / "satimage-2.csv", x[rows], "label", np.where(y[rows] == 2, -1, 1))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", type=pathlib.Path)
    ap.add_argument("--mnist-dir", help="directory holding the npm package's digits/{0..9}.json")
    ap.add_argument("--landsat-dir", help="directory holding sat.trn.txt and sat.tst.txt")
    ap.add_argument("--train-per-class", type=int, default=500)
    ap.add_argument("--test-per-class", type=int, default=300)
    args = ap.parse_args()
    build_mnist(args.mnist_dir, args.out, args.train_per_class, args.test_per_class)
    build_landsat(args.landsat_dir, args.out / "odds")


if __name__ == "__main__":
    main()
