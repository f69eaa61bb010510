#!/usr/bin/env python3
"""Standalone nearest-centroid baseline over a raw CSV. Stdlib only.

Independent of the lmldap package: reads the CSV itself, synthesizes the
test set with the same pinned protocol (per class, in first-appearance
order, one random.Random(seed): draw 2*d rows where d = min(ceil(fraction
* n), cap), without replacement unless 2*d > n, average consecutive
pairs), and classifies each synthesized row by the nearest per-class mean
under span-normalized squared distance, ties to the lexicographically
smaller label.

Usage: centroid_baseline.py data.csv label_column [seed] > predictions.json
"""

from __future__ import annotations

import csv
import json
import math
import random
import sys


def is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def main() -> int:
    path, label_column = sys.argv[1], sys.argv[2]
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 42
    fraction, cap = 0.2, 10

    with open(path, newline="", encoding="utf-8") as fh:
        records = list(csv.reader(fh))
    header, rows = records[0], records[1:]
    label_idx = header.index(label_column)
    numeric_cols = [
        j
        for j in range(len(header))
        if j != label_idx and all(is_number(r[j]) for r in rows if r[j] != "")
        and any(r[j] != "" for r in rows)
    ]

    by_label: dict[str, list[list[str]]] = {}
    order: list[str] = []
    for row in rows:
        label = row[label_idx]
        if label not in by_label:
            by_label[label] = []
            order.append(label)
        by_label[label].append(row)

    # per-class means and global spans over the numeric columns
    means: dict[str, dict[int, float]] = {}
    for label in order:
        means[label] = {}
        for j in numeric_cols:
            vals = [float(r[j]) for r in by_label[label] if r[j] != ""]
            if vals:
                means[label][j] = sum(vals) / len(vals)
    spans: dict[int, float] = {}
    for j in numeric_cols:
        vals = [float(r[j]) for r in rows if r[j] != ""]
        spans[j] = max(vals) - min(vals)

    rng = random.Random(seed)
    test_rows: list[tuple[list[float | None], str]] = []
    for label in order:
        members = by_label[label]
        desired = min(math.ceil(fraction * len(members)), cap)
        k = 2 * desired
        if k <= len(members):
            picks = rng.sample(range(len(members)), k)
        else:
            picks = rng.choices(range(len(members)), k=k)
        for p in range(0, k, 2):
            a, b = members[picks[p]], members[picks[p + 1]]
            values: list[float | None] = []
            for j in numeric_cols:
                if a[j] == "" and b[j] == "":
                    values.append(None)
                elif a[j] == "":
                    values.append(float(b[j]))
                elif b[j] == "":
                    values.append(float(a[j]))
                else:
                    values.append((float(a[j]) + float(b[j])) / 2)
            test_rows.append((values, label))

    predictions = []
    for values, truth in test_rows:
        best: tuple[float, str] | None = None
        for label in sorted(order):
            dist = 0.0
            for value, j in zip(values, numeric_cols):
                if value is None or spans[j] == 0 or j not in means[label]:
                    continue
                dist += ((value - means[label][j]) / spans[j]) ** 2
            if best is None or dist < best[0]:
                best = (dist, label)
        assert best is not None
        predictions.append({"truth": truth, "predicted": best[1]})

    correct = sum(1 for p in predictions if p["truth"] == p["predicted"])
    json.dump(
        {
            "seed": seed,
            "count": len(predictions),
            "correct": correct,
            "accuracy": correct / len(predictions),
            "predictions": predictions,
        },
        sys.stdout,
        indent=2,
    )
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
