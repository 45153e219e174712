#!/usr/bin/env python3
"""Regenerate the example scenarios under scenarios/.

Every scenario directory gets its mesh, rig data, animation.json and
config.json. Output is deterministic.
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay


def write_obj(path, V, F):
    with open(path, "w") as f:
        for v in V:
            z = v[2] if len(v) > 2 else 0.0
            f.write(f"v {v[0]:.17g} {v[1]:.17g} {z:.17g}\n")
        for t in F:
            f.write("f " + " ".join(str(i + 1) for i in t) + "\n")


def write_dmat(path, W):
    W = np.atleast_2d(W)
    with open(path, "w") as f:
        f.write(f"{W.shape[1]} {W.shape[0]}\n")
        for c in range(W.shape[1]):
            for r in range(W.shape[0]):
                f.write(f"{W[r, c]:.17g}\n")


def write_tetgen(stem, V, T):
    with open(f"{stem}.node", "w") as f:
        f.write(f"{len(V)} 3 0 0\n")
        for i, v in enumerate(V):
            f.write(f"{i} {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    with open(f"{stem}.ele", "w") as f:
        f.write(f"{len(T)} 4 0\n")
        for i, t in enumerate(T):
            f.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def orient2d(V, F):
    F = np.array(F)
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = area < 0
    F[flip, 0], F[flip, 1] = F[flip, 1].copy(), F[flip, 0].copy()
    return F


def disc(radius, rings):
    pts = [(0.0, 0.0)]
    for r in range(1, rings + 1):
        count = 6 * r
        for k in range(count):
            a = 2 * math.pi * k / count
            pts.append((radius * r / rings * math.cos(a), radius * r / rings * math.sin(a)))
    V = np.array(pts)
    return V, orient2d(V, Delaunay(V).simplices)


def grid2d(nx, ny, width, height):
    xs = np.linspace(0, width, nx + 1)
    ys = np.linspace(0, height, ny + 1)
    V = np.array([(x, y) for y in ys for x in xs])
    idx = lambda i, j: j * (nx + 1) + i
    F = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            # alternate the diagonal so the grid has no preferred direction
            if (i + j) % 2 == 0:
                F += [(a, b, c), (a, c, d)]
            else:
                F += [(a, b, d), (b, c, d)]
    return V, orient2d(V, F)


def cube_grid_tets(nx, ny, nz, size):
    """Cube grid split into 6 tets per cube sharing the main diagonal."""
    h = size
    V = np.array([(i * h, j * h, k * h) for k in range(nz + 1) for j in range(ny + 1) for i in range(nx + 1)])
    idx = lambda i, j, k: (k * (ny + 1) + j) * (nx + 1) + i
    T = []
    paths = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                for path in paths:
                    cur = [i, j, k]
                    tet = [idx(*cur)]
                    for axis in path:
                        cur[axis] += 1
                        tet.append(idx(*cur))
                    a, b, c, d = (V[t] for t in tet)
                    if np.linalg.det(np.array([b - a, c - a, d - a])) < 0:
                        tet[0], tet[1] = tet[1], tet[0]
                    T.append(tet)
    return V, np.array(T)


def affine_pose_2d(A, t):
    return [A[0][0], A[0][1], t[0], A[1][0], A[1][1], t[1]]


def affine_pose_3d(A, t):
    return [A[0][0], A[0][1], A[0][2], t[0], A[1][0], A[1][1], A[1][2], t[1], A[2][0], A[2][1], A[2][2], t[2]]


def rot2(a):
    return [[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]]


def smoothstep(x):
    x = min(max(x, 0.0), 1.0)
    return x * x * (3 - 2 * x)


def config(name, mesh, model, rig, extra=None):
    cfg = {
        "name": name,
        "mesh": mesh,
        "density": 1.0,
        "model": model,
        "rig": rig,
        "animation": "animation.json",
        "sim": {"h": 1.0 / 60.0, "cancellation": True},
        "momentum_leak": {"mode": "identity"},
        "forces": [],
        "output": "out",
    }
    if extra:
        for k, v in extra.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    return cfg


def make_amoeba(root, frames=90):
    d = root / "amoeba"
    d.mkdir(parents=True, exist_ok=True)
    V, F = disc(1.0, 5)
    write_obj(d / "disc.obj", V, F)
    anim = []
    for k in range(frames):
        t = k / 60.0
        squash = 1.0 + 0.25 * math.sin(2 * math.pi * 1.5 * t)
        A = [[squash, 0.2 * math.sin(2 * math.pi * t)], [0.0, 1.0 / squash]]
        anim.append({"t": t, "p": affine_pose_2d(A, [1.5 * math.sin(2 * math.pi * 0.75 * t), 0.0])})
    write_json(d / "animation.json", {"m": 6, "rig": "affine", "frames": anim})
    write_json(d / "config.json", config(
        "amoeba", {"obj": "disc.obj"}, {"kind": "linear", "youngs": 300.0, "poisson": 0.35}, {"kind": "affine"},
        {"sim": {"cancellation": False},
         "forces": [{"kind": "wind", "direction": [1.0, 0.3], "amplitude": 3.0, "frequency": 2.0, "phase": 0.0}]}))


def make_lbs_2d(root, frames=90):
    d = root / "lbs_2d"
    d.mkdir(parents=True, exist_ok=True)
    V, F = grid2d(16, 4, 4.0, 1.0)
    write_obj(d / "bar.obj", V, F)
    # bone 0 owns the left half, bone 1 the right, blended across the joint at x = 2
    w1 = np.array([smoothstep((x - 1.5) / 1.0) for x in V[:, 0]])
    W = np.stack([1.0 - w1, w1], axis=1)
    write_dmat(d / "weights.dmat", W)
    joint = np.array([2.0, 0.5])
    anim = []
    for k in range(frames):
        t = k / 60.0
        angle = 0.8 * math.sin(2 * math.pi * 0.8 * t)
        R = np.array(rot2(angle))
        tr = joint - R @ joint
        p = affine_pose_2d([[1, 0], [0, 1]], [0, 0]) + affine_pose_2d(R.tolist(), tr.tolist())
        anim.append({"t": t, "p": p})
    write_json(d / "animation.json", {"m": 12, "rig": "lbs", "frames": anim})
    write_json(d / "config.json", config(
        "lbs_2d", {"obj": "bar.obj"}, {"kind": "arap", "stiffness": 200.0}, {"kind": "lbs", "weights": "weights.dmat"},
        {"sim": {"solver": "newton", "cancellation": False}, "forces": [{"kind": "gravity", "g": [0.0, -9.8]}]}))


def make_carpet(root, frames=90):
    d = root / "carpet"
    d.mkdir(parents=True, exist_ok=True)
    V, F = grid2d(20, 5, 4.0, 1.0)
    write_obj(d / "sheet.obj", V, F)
    # keyframes (time, angle, translation), linearly interpolated per frame
    keys = [(0.0, 0.0, (0.0, 0.0)), (0.5, 0.0, (0.0, 1.0)), (1.0, 0.6, (1.0, 1.0)), (1.5, 0.0, (2.0, 0.0))]
    anim = []
    for k in range(frames):
        t = k / 60.0
        for (t0, a0, p0), (t1, a1, p1) in zip(keys, keys[1:]):
            if t <= t1 or (t1, a1, p1) == keys[-1]:
                s = min(max((t - t0) / (t1 - t0), 0.0), 1.0)
                break
        angle = a0 + s * (a1 - a0)
        tr = [p0[i] + s * (p1[i] - p0[i]) for i in range(2)]
        anim.append({"t": t, "p": affine_pose_2d(rot2(angle), tr)})
    write_json(d / "animation.json", {"m": 6, "rig": "affine", "frames": anim})
    write_json(d / "config.json", config(
        "carpet", {"obj": "sheet.obj"}, {"kind": "mass_spring", "stiffness": 400.0}, {"kind": "affine"},
        {"sim": {"local_global_iters": 20, "cancellation": False}, "forces": [{"kind": "gravity", "g": [0.0, -9.8]}]}))


def make_bar_3d(root, frames=60):
    d = root / "bar_3d"
    d.mkdir(parents=True, exist_ok=True)
    V, T = cube_grid_tets(10, 3, 3, 0.2)
    write_tetgen(d / "bar", V, T)
    anim = []
    for k in range(frames):
        t = k / 60.0
        angle = 0.5 * math.sin(2 * math.pi * t)
        c, s = math.cos(angle), math.sin(angle)
        A = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        anim.append({"t": t, "p": affine_pose_3d(A, [0.0, 0.5 * math.sin(2 * math.pi * 0.5 * t), 0.0])})
    write_json(d / "animation.json", {"m": 12, "rig": "affine", "frames": anim})
    write_json(d / "config.json", config(
        "bar_3d", {"node": "bar.node", "ele": "bar.ele"}, {"kind": "neohookean", "youngs": 2000.0, "poisson": 0.3},
        {"kind": "affine"},
        {"momentum_leak": {"mode": "poisson", "value": 0.0}, "forces": [{"kind": "gravity", "g": [0.0, -9.8, 0.0]}]}))


def make_worm(root, frames=60):
    d = root / "worm"
    d.mkdir(parents=True, exist_ok=True)
    V, F = grid2d(44, 9, 8.8, 1.8)  # 45 x 10 = 450 vertices
    write_obj(d / "worm.obj", V, F)
    anim = []
    for k in range(frames):
        t = k / 60.0
        stretch = 1.0 + 0.15 * math.sin(2 * math.pi * 1.2 * t)
        anim.append({"t": t, "p": affine_pose_2d([[stretch, 0.0], [0.0, 1.0]], [0.6 * t, 0.0])})
    write_json(d / "animation.json", {"m": 6, "rig": "affine", "frames": anim})
    write_json(d / "config.json", config(
        "worm", {"obj": "worm.obj"}, {"kind": "linear", "youngs": 500.0, "poisson": 0.3}, {"kind": "affine"},
        {"sim": {"cancellation": False}}))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "scenarios"))
    args = ap.parse_args()
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    make_amoeba(root)
    make_lbs_2d(root)
    make_carpet(root)
    make_bar_3d(root)
    make_worm(root)


if __name__ == "__main__":
    main()
