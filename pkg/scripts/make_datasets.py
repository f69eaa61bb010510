#!/usr/bin/env python3
"""Regenerate the CSV datasets committed under data/.

Writes the UCI distribution of the Iris dataset (scikit-learn ships the
corrected Fisher values; the UCI file differs in rows 35 and 38) and the
Wine dataset. Requires scikit-learn, which is a tooling dependency only --
the package itself never imports it.
"""

from __future__ import annotations

import csv
from pathlib import Path

from sklearn.datasets import load_iris, load_wine

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def write_iris(path: Path) -> None:
    iris = load_iris()
    values = iris.data.copy()
    # UCI iris.data vs Fisher: row 35 has petal_width 0.1 (not 0.2),
    # row 38 has sepal_width 3.1 and petal_length 1.5 (not 3.6 / 1.4).
    values[34][3] = 0.1
    values[37][1] = 3.1
    values[37][2] = 1.5
    labels = ["Iris-" + iris.target_names[t] for t in iris.target]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sepal_length", "sepal_width", "petal_length", "petal_width", "species"])
        for row, label in zip(values, labels):
            writer.writerow([f"{v:.1f}" for v in row] + [label])


def write_wine(path: Path) -> None:
    wine = load_wine()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(wine.feature_names) + ["class"])
        for row, target in zip(wine.data, wine.target):
            writer.writerow([f"{v:.10g}" for v in row] + [str(target + 1)])


if __name__ == "__main__":
    DATA_DIR.mkdir(exist_ok=True)
    write_iris(DATA_DIR / "iris.csv")
    write_wine(DATA_DIR / "wine.csv")
    print(f"wrote {DATA_DIR / 'iris.csv'} and {DATA_DIR / 'wine.csv'}")
