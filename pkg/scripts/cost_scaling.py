"""Per-order cost of the inverse Born series vs the fast scheme on the disk problem."""

import argparse
import time

from fastborn.born_inversion import fast_iterate, ibs_iterate
from fastborn.linalg import truncated_pinv
from fastborn.radial_model import ModelParams, assemble_model, forward_exact


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-order", type=int, default=6)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    params = ModelParams()
    model = assemble_model(params)
    pinv = truncated_pinv(model.k1_matrix, rank=23)
    phi = forward_exact(params).values

    def best(fn):
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            trace = fn()
            times.append(time.perf_counter() - t0)
        return min(times), trace

    print(f"{'order':>5} {'fast ms':>10} {'ibs ms':>10} {'ratio':>8} {'ibs comps':>10} {'model passes':>13}")
    for n in range(1, args.max_order + 1):
        tf, _ = best(lambda: fast_iterate(model, pinv, phi, n))
        ti, tr = best(lambda: ibs_iterate(model, pinv, phi, n))
        print(f"{n:5d} {1e3 * tf:10.2f} {1e3 * ti:10.2f} {ti / tf:8.1f} "
              f"{tr.kernel_applications[-1]:10d} {tr.model_kernel_passes[-1]:13d}")


if __name__ == "__main__":
    main()
