"""Command-line driver: toy example, forward data, inversion runs, cost benchmark.

Subcommands::

    fastborn toy     [--order N] [--matrix FILE] [--x X1,X2,...]
    fastborn forward [model flags] [--noise S --seed N] --out DIR
    fastborn invert  [model flags] [--method M --order N --rank R] [--phi FILE] --out DIR
    fastborn bench   [model flags] [--order N] --out DIR

Settings resolve as command-line flag, then ``--config FILE`` (flat
``key = value`` lines using :class:`RunConfig` field names), then defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .born_inversion import (
    InversionConfig,
    IterationError,
    Method,
    eta_projection,
    fast_iterate,
    ibs_iterate,
    invert,
    reduced_iterate,
)
from .finite_model import TOY_A, TOY_X, FiniteBornModel
from .linalg import truncated_pinv
from .radial_model import (
    ForwardSolveError,
    ModelParams,
    assemble_model,
    forward_exact,
    ground_truth,
)

METHODS = {
    "fast": Method.FAST,
    "ibs": Method.IBS,
    "reduced": Method.REDUCED,
    "hoskins": Method.HOSKINS,
    "newton": Method.NEWTON,
}

# printed iterates of the 2x2 example; the IBS partial sums coincide with them
TOY_REFERENCE = np.array([
    [0.0684578, 0.0759273],
    [0.0699660, 0.0797927],
    [0.0699993, 0.0799895],
    [0.0700000, 0.0799995],
    [0.0700000, 0.0800000],
])
TOY_TOLERANCE = 1e-6
EQUIVALENCE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RunConfig:
    k: float = 1.0
    radius_r: float = 3.0
    radius_a: float = 1.5
    eta_a: float = 0.2
    beta: float = 3.0
    modes: int = 90
    grid_n: int = 90
    rank: int = 23
    order: int = 5
    method: str = "fast"
    seed: int = 0
    noise_sigma: float = 0.0
    output_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not 1 <= self.rank <= min(self.modes, self.grid_n):
            raise ValueError(f"rank must lie in [1, {min(self.modes, self.grid_n)}], got {self.rank}")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        self.model_params()

    def model_params(self) -> ModelParams:
        return ModelParams(k=self.k, radius_r=self.radius_r, radius_a=self.radius_a,
                           eta_a=self.eta_a, beta=self.beta, modes=self.modes,
                           grid_n=self.grid_n)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "k": "k", "radius_r": "radius_r", "radius_a": "radius_a", "eta_a": "eta_a",
    "beta": "beta", "modes": "modes", "grid": "grid_n", "rank": "rank",
    "order": "order", "method": "method", "noise": "noise_sigma", "seed": "seed",
    "threads": "threads", "out": "output_dir",
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    casts = {"float": float, "int": int, "str": str}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in types:
            raise ValueError(f"{path}:{lineno}: expected '<field> = <value>' with a RunConfig field, got {raw!r}")
        values[key] = casts[types[key]](val)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for dest, name in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    return RunConfig(**values)


# --- toy ---------------------------------------------------------------------

def _print_table(title: str, rows) -> None:
    print(title)
    for i, row in enumerate(rows, 1):
        print(f"  {i:2d}  " + "  ".join(f"{v: .7f}" for v in row))


def cmd_toy(order: int = 5, matrix=None, x=None) -> int:
    custom = matrix is not None
    model = FiniteBornModel(matrix if custom else TOY_A)
    n = model.dimension
    if x is None:
        x = TOY_X if not custom else np.full(n, 0.05)
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x has {x.size} entries for a {n}x{n} matrix")
    y = model.forward_map(x)
    pinv = truncated_pinv(model.k1_matrix, rank=n)
    fast = fast_iterate(model, pinv, y, order).iterates[1:]
    ibs = ibs_iterate(model, pinv, y, order).iterates[1:]
    hoskins = reduced_iterate(model, pinv, y, order, variant="hoskins").iterates[1:]
    _print_table("fast iterates x^(n):", fast)
    _print_table("inverse Born partial sums x_1 + ... + x_n:", ibs)

    failures = []
    for i in range(order):
        gap = max(np.max(np.abs(ibs[i] - fast[i])), np.max(np.abs(hoskins[i] - fast[i])))
        if gap > EQUIVALENCE_TOLERANCE:
            failures.append(("equivalence", i + 1, gap))
        if not custom and i < len(TOY_REFERENCE):
            for name, it in (("fast", fast[i]), ("ibs", ibs[i])):
                dev = float(np.max(np.abs(it - TOY_REFERENCE[i])))
                if dev > TOY_TOLERANCE:
                    failures.append((name, i + 1, dev))
    if failures:
        print("FAIL")
        print("  check        order  deviation")
        for name, i, dev in failures:
            print(f"  {name:<12} {i:5d}  {dev:.3e}")
        return 1
    matched = 2 * min(order, len(TOY_REFERENCE)) if not custom else 0
    print(f"PASS ({matched} vectors matched reference digits; schemes agree to {EQUIVALENCE_TOLERANCE:g})")
    return 0


# --- radial runs -------------------------------------------------------------

def generate_phi(cfg: RunConfig) -> np.ndarray:
    phi = forward_exact(cfg.model_params()).values
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        phi = phi + rng.normal(0.0, cfg.noise_sigma, phi.size)
    return phi


def cmd_forward(cfg: RunConfig) -> int:
    path = io.write_phi(cfg.out / "phi.csv", generate_phi(cfg))
    print(f"wrote {path}")
    return 0


def cmd_invert(cfg: RunConfig, phi_path=None) -> int:
    params = cfg.model_params()
    phi = io.read_phi(phi_path) if phi_path else generate_phi(cfg)
    if phi.size != params.modes:
        raise ValueError(f"phi has {phi.size} modes but the model uses {params.modes}")
    model = assemble_model(params, threads=cfg.threads)
    pinv = truncated_pinv(model.k1_matrix, rank=cfg.rank)
    method = METHODS[cfg.method]
    trace = invert(model, pinv, phi, InversionConfig(method=method, order=cfg.order, rank=cfg.rank),
                   residuals=True)
    r = model.grid.nodes
    for n, eta in enumerate(trace.iterates[1:], 1):
        io.write_curve(cfg.out / f"recon_{cfg.method}_{n}.csv", r, eta)
    proj = eta_projection(pinv, model, ground_truth(params, model.grid).values)
    io.write_curve(cfg.out / "eta_proj.csv", r, proj)
    io.write_json(cfg.out / "trace.json", trace.to_json())
    err = np.linalg.norm(trace.final - proj)
    print(f"{cfg.method} order {trace.order}: ||eta - eta_proj||_2 = {err:.6e}")
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def ibs_law(order: int) -> int:
    """Cumulative top-level composition count of the inverse Born series."""
    return sum(2 ** (j - 1) - 1 for j in range(1, order + 1))


def cmd_bench(cfg: RunConfig) -> int:
    params = cfg.model_params()
    phi = generate_phi(cfg)
    model = assemble_model(params, threads=cfg.threads)
    pinv = truncated_pinv(model.k1_matrix, rank=cfg.rank)
    rows = []
    violations = []
    for name, runner in (("fast", fast_iterate), ("ibs", ibs_iterate)):
        t0 = time.perf_counter()
        trace = runner(model, pinv, phi, cfg.order)
        total_ms = 1e3 * (time.perf_counter() - t0)
        law = (lambda n: n - 1) if name == "fast" else ibs_law
        for n, (count, wall) in enumerate(zip(trace.kernel_applications, trace.wall_times), 1):
            rows.append((name, n, count, 1e3 * wall))
            if count != law(n):
                violations.append((name, n, count, law(n)))
        print(f"{name}: order {cfg.order} in {total_ms:.2f} ms")
    io.write_columns(cfg.out / "bench.csv", ["method", "order", "kernel_applications", "wall_ms"],
                     [[r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                      [r[3] for r in rows]])
    fast_ms = rows[cfg.order - 1][3]
    ibs_ms = rows[-1][3]
    if fast_ms > 0:
        print(f"wall-time ratio ibs/fast at order {cfg.order}: {ibs_ms / fast_ms:.1f}")
    if violations:
        for name, n, got, want in violations:
            print(f"counter law violated: {name} order {n}: {got} != {want}", file=sys.stderr)
        return 1
    return 0


# --- argument parsing --------------------------------------------------------

def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=float)
    p.add_argument("--radius-r", type=float)
    p.add_argument("--radius-a", type=float)
    p.add_argument("--eta-a", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--modes", type=int)
    p.add_argument("--grid", type=int, help="radial grid nodes")
    p.add_argument("--rank", type=int, help="retained singular values")
    p.add_argument("--order", type=int)
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--noise", type=float, help="std of additive Gaussian noise on phi")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key = value settings file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastborn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    toy = sub.add_parser("toy", help="2x2 example with reference digits")
    toy.add_argument("--order", type=int, default=5)
    toy.add_argument("--matrix", help="square matrix file (rows of numbers)")
    toy.add_argument("--x", help="comma-separated true unknown for --matrix")

    for name, text in (("forward", "write phi.csv from the exact transmission solution"),
                       ("invert", "reconstruct eta and write per-order curves"),
                       ("bench", "time fast vs inverse Born series and check counters")):
        p = sub.add_parser(name, help=text)
        _model_flags(p)
        if name == "invert":
            p.add_argument("--phi", help="read data from this phi.csv instead of generating it")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "toy":
            if args.order < 1:
                raise ValueError("order must be at least 1")
            matrix = io.read_matrix(args.matrix) if args.matrix else None
            x = [float(v) for v in args.x.split(",")] if args.x else None
            return cmd_toy(args.order, matrix, x)
        cfg = resolve_config(args)
        if args.command == "forward":
            return cmd_forward(cfg)
        if args.command == "invert":
            return cmd_invert(cfg, args.phi)
        return cmd_bench(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ForwardSolveError, IterationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
