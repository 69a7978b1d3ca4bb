"""Regenerate the self-golden files under tests/golden.

Run only after the checks in reproduce_disk.py look right; the tests then
pin these outputs against regressions.
"""

import argparse
import hashlib
from pathlib import Path

from fastborn import io
from fastborn.born_inversion import diagnostics, eta_projection
from fastborn.linalg import truncated_pinv
from fastborn.radial_model import ModelParams, assemble_model, forward_exact, ground_truth


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dest", default=Path(__file__).resolve().parents[1] / "tests" / "golden")
    args = ap.parse_args()
    dest = Path(args.dest)

    params = ModelParams()
    phi = forward_exact(params).values
    phi_path = io.write_phi(dest / "phi.csv", phi)

    model = assemble_model(params)
    pinv = truncated_pinv(model.k1_matrix, rank=23)
    proj = eta_projection(pinv, model, ground_truth(params, model.grid).values)
    io.write_curve(dest / "eta_proj.csv", model.grid.nodes, proj)

    diag = diagnostics(model, pinv, phi).as_dict()
    diag["phi_csv_sha256"] = hashlib.sha256(phi_path.read_bytes()).hexdigest()
    io.write_json(dest / "diagnostics.json", diag)
    for k, v in sorted(diag.items()):
        print(f"{k:>20}: {v}")


if __name__ == "__main__":
    main()
