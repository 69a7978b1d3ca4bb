"""Disk reconstruction experiment: fast scheme vs inverse Born series vs eta_proj.

Writes per-order curves for both inclusion strengths and prints the error
table plus the forward-model grid-refinement check.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from fastborn import io
from fastborn.born_inversion import eta_projection, fast_iterate, ibs_iterate, newton_iterate
from fastborn.linalg import truncated_pinv
from fastborn.radial_model import ModelParams, assemble_model, forward_exact, ground_truth


def run(eta_a, rank, order, out):
    params = ModelParams(eta_a=eta_a)
    model = assemble_model(params)
    pinv = truncated_pinv(model.k1_matrix, rank=rank)
    phi = forward_exact(params).values
    proj = eta_projection(pinv, model, ground_truth(params, model.grid).values)
    r = model.grid.nodes
    traces = {
        "fast": fast_iterate(model, pinv, phi, order),
        "ibs": ibs_iterate(model, pinv, phi, order),
        "newton": newton_iterate(model, pinv, phi, order),
    }
    tag = f"eta{eta_a:g}"
    io.write_curve(out / f"{tag}_eta_proj.csv", r, proj)
    print(f"\neta_a = {eta_a}: ||eta(n) - eta_proj||_2")
    print("order " + "".join(f"{name:>12}" for name in traces))
    for n in range(1, order + 1):
        errs = [np.linalg.norm(t.iterates[n] - proj) for t in traces.values()]
        print(f"{n:5d} " + "".join(f"{e:12.4e}" for e in errs))
    for name, t in traces.items():
        io.write_curve(out / f"{tag}_{name}_{order}.csv", r, t.final)
    gap = np.max(np.abs(traces["fast"].final - traces["ibs"].final)) / np.max(np.abs(proj))
    print(f"max|fast - ibs| / max|eta_proj| at order {order}: {gap:.4f}")
    ms = {k: 1e3 * t.wall_times[-1] for k, t in traces.items()}
    print("wall ms: " + ", ".join(f"{k} {v:.2f}" for k, v in ms.items()))


def refinement():
    print("\nforward_map vs forward_exact (relative l2)")
    prev = None
    for n in (45, 90, 180, 360):
        params = ModelParams(grid_n=n)
        model = assemble_model(params)
        exact = forward_exact(params).values
        approx = model.forward_map(ground_truth(params, model.grid).values)
        d = np.linalg.norm(approx - exact) / np.linalg.norm(exact)
        ratio = "" if prev is None else f"  ratio {prev / d:.2f}"
        print(f"  N_r = {n:4d}: {d:.4e}{ratio}")
        prev = d


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("disk_out"))
    ap.add_argument("--rank", type=int, default=23)
    ap.add_argument("--order", type=int, default=5)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    for eta_a in (0.2, 0.4):
        run(eta_a, args.rank, args.order, args.out)
    refinement()
    print(f"\ntotal {time.perf_counter() - t0:.1f} s; curves in {args.out}/")


if __name__ == "__main__":
    main()
