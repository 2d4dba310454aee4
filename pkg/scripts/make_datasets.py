"""Regenerate the bundled LIBSVM fixtures under datasets/ (fixed seeds).

blobs.libsvm  two Gaussian clusters, dense features, labels {-1, +1}
bits.libsvm   sparse binary features with a planted linear rule, labels {0, 1}
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "datasets"


def write_libsvm(path, X, y, fmt="%.5f"):
    with open(path, "w", encoding="utf-8") as f:
        for row, label in zip(X, y):
            pairs = [f"{j + 1}:{fmt % v}" for j, v in enumerate(row) if v != 0.0]
            f.write(" ".join([("%g" % label)] + pairs) + "\n")


def make_blobs(seed=7, n=600, dim=12, margin=0.9):
    rng = np.random.default_rng(seed)
    y = rng.choice([-1.0, 1.0], size=n)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    X = rng.standard_normal((n, dim)) + (margin * y)[:, None] * direction[None, :]
    return np.round(X, 5), y


def make_bits(seed=11, n=500, dim=40, active=7, flip=0.08):
    rng = np.random.default_rng(seed)
    w_star = rng.choice([-1.0, 1.0], size=dim)
    X = np.zeros((n, dim))
    for row in range(n):
        idx = rng.choice(dim, size=active, replace=False)
        X[row, idx] = 1.0
    y = np.sign(X @ w_star)
    y[y == 0] = rng.choice([-1.0, 1.0], size=int(np.sum(y == 0)))
    flips = rng.random(n) < flip
    y[flips] = -y[flips]
    return X, (y + 1) / 2  # labels {0, 1}


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    X, y = make_blobs()
    write_libsvm(OUT / "blobs.libsvm", X, y)
    X, y = make_bits()
    write_libsvm(OUT / "bits.libsvm", X, y, fmt="%g")
    print("wrote", sorted(p.name for p in OUT.iterdir()))
