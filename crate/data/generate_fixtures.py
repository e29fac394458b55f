"""Regenerates the CSV fixtures under data/.

wdbc comes from the copy bundled with scikit-learn. The hdlss-* sets are
synthetic high-dimension/low-sample-size problems shaped like expression
data: features come in correlated blocks driven by one latent factor each,
a few factors shift with the class, and every feature gets its own
log-normal scale and offset.
"""
import csv

import numpy as np
from sklearn.datasets import load_breast_cancer


def write(path, x, labels, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + ["class"])
        for row, lab in zip(x, labels):
            w.writerow([repr(float(v)) for v in row] + [lab])


def wdbc():
    d = load_breast_cancer()
    labels = ["M" if t == 0 else "B" for t in d.target]
    header = [n.replace(" ", "_") for n in d.feature_names]
    write("wdbc.csv", d.data, labels, header)


def synthetic(name, n, m, c, seed, block=25, n_informative=8, shift=1.0, noise=1.0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % c
    rng.shuffle(y)
    n_blocks = m // block
    mu = np.zeros((c, n_blocks))
    informative = rng.choice(n_blocks, n_informative, replace=False)
    mu[:, informative] = rng.normal(0, shift, size=(c, n_informative))
    z = mu[y] + rng.normal(size=(n, n_blocks))
    loading = rng.uniform(0.5, 1.5, size=m) * rng.choice([-1, 1], size=m)
    x = z[:, np.arange(m) // block] * loading + noise * rng.normal(size=(n, m))
    scale = np.exp(rng.normal(0, 1.0, size=m))
    offset = rng.normal(5, 2, size=m)
    x = np.round(x * scale + offset, 5)
    header = [f"f{i}" for i in range(m)]
    write(f"{name}.csv", x, [f"c{t}" for t in y], header)


if __name__ == "__main__":
    wdbc()
    synthetic("hdlss-a", 60, 2500, 2, 11)
    synthetic("hdlss-b", 90, 1500, 3, 23)
    synthetic("hdlss-c", 80, 1000, 2, 37)
