#!/usr/bin/env python3
"""Independent post-hoc audit of a selection list.

Checks that no two selected points lie closer than the radius while having a
feature cosine similarity above the threshold. Reads the files directly and
shares no code with the library.

usage: audit_selection.py CLOUD.ply FEATURES.mtx SELECTION.txt --radius R --tau T
exit status 0 on pass, 1 on a violation, 2 on bad input.
"""

import argparse
import struct
import sys

import numpy as np


def read_ply_positions(path):
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().split("\n")
    names, count, i = [], None, 0
    in_vertex = False
    while lines[i].strip() != "end_header":
        tok = lines[i].split()
        if tok[:2] == ["element", "vertex"]:
            count, in_vertex = int(tok[2]), True
        elif tok and tok[0] == "element":
            in_vertex = False
        elif tok and tok[0] == "property" and in_vertex:
            names.append(tok[-1])
        i += 1
    rows = [l.split() for l in lines[i + 1:i + 1 + count]]
    cols = [names.index(a) for a in ("x", "y", "z")]
    return np.array([[float(r[c]) for c in cols] for r in rows], dtype=np.float64)


def read_matrix(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != b"HPALMTRX":
        raise ValueError("bad magic")
    _, dtype, rows, cols = struct.unpack("<IBII", data[8:21])
    kind = "<f4" if dtype == 0 else "<u4"
    return np.frombuffer(data[21:], dtype=kind, count=rows * cols).reshape(rows, cols)


def audit(positions, feats, selected, radius, tau):
    """Returns the violating pairs as (i, j, distance, similarity)."""
    bad = []
    f = feats.astype(np.float64)
    for a in range(len(selected)):
        for b in range(a + 1, len(selected)):
            i, j = selected[a], selected[b]
            d = float(np.sqrt(np.sum((positions[i] - positions[j]) ** 2)))
            if d >= radius:
                continue
            ni, nj = np.linalg.norm(f[i]), np.linalg.norm(f[j])
            sim = 0.0 if ni == 0 or nj == 0 else float(f[i] @ f[j] / (ni * nj))
            if sim > tau:
                bad.append((i, j, d, sim))
    return bad


def main(argv):
    p = argparse.ArgumentParser()
    p.add_argument("cloud")
    p.add_argument("features")
    p.add_argument("selection")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    args = p.parse_args(argv)
    try:
        positions = read_ply_positions(args.cloud)
        feats = read_matrix(args.features)
        with open(args.selection, encoding="ascii") as f:
            selected = [int(l) for l in f.read().split("\n") if l]
    except (OSError, ValueError, IndexError) as e:
        print(f"audit: bad input: {e}", file=sys.stderr)
        return 2
    if len(set(selected)) != len(selected):
        print("audit: duplicate index in selection", file=sys.stderr)
        return 1
    bad = audit(positions, feats, selected, args.radius, args.tau)
    for i, j, d, s in bad:
        print(f"audit: violation {i} {j} distance {d:.6f} similarity {s:.6f}")
    print(f"audit: {len(selected)} selected, {len(bad)} violations")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
