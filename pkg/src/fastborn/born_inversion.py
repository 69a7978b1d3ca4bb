"""Inversion schemes for the Born series.

All schemes share the first iterate ``K1^+ phi`` and work with any model that
provides ``k1_matrix``, ``apply_kj(fields)``, ``k2_matrix(second)``,
``forward_map(field)``, ``kernel_counter`` and ``green_sup_norms()``.

* ``fast``: two-term recurrence needing only the pseudoinverse and K2,
  ``eta(n+1) = eta(n) + B (eta(n) - eta(n-1))`` with ``B = -K1^+ K2(. x eta(1))``
  assembled once.
* ``ibs``: the classical inverse Born series, evaluated through its full
  composition recursion (exponential cost in the order).
* ``reduced_ibs`` / ``hoskins_reduced``: the two reduced series keeping one
  dominant composition per order.
* ``newton``: ``eta(n+1) = eta(n) - K1^+ (K eta(n) - phi)`` with the full
  nonlinear forward map.
"""

from __future__ import annotations

import enum
import itertools
import time
import warnings
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .linalg import RegularizedInverse, operator_norm


class ForwardModel(Protocol):
    k1_matrix: np.ndarray
    kernel_counter: object

    def apply_kj(self, fields: Sequence) -> np.ndarray: ...

    def k2_matrix(self, second) -> np.ndarray: ...

    def forward_map(self, field) -> np.ndarray: ...

    def green_sup_norms(self) -> tuple[float, float]: ...


class Method(str, enum.Enum):
    FAST = "fast"
    IBS = "ibs"
    REDUCED = "reduced_ibs"
    HOSKINS = "hoskins_reduced"
    NEWTON = "newton"


class IterationError(RuntimeError):
    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class DivergenceWarning(RuntimeWarning):
    pass


DEFAULT_MAX_IBS_ORDER = 8


@dataclass(frozen=True)
class InversionConfig:
    """How to invert: scheme, order, truncation rank and Newton forward model.

    ``newton_forward`` is ``"exact"`` for the full forward map or an integer J
    to use the Born series truncated after J terms.  ``tolerance > 0`` stops
    early once the sup-norm update falls below it.
    """

    method: Method = Method.FAST
    order: int = 5
    rank: int = 23
    newton_forward: str | int = "exact"
    tolerance: float = 0.0
    max_ibs_order: int = DEFAULT_MAX_IBS_ORDER

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.order < 1:
            raise ValueError(f"order must be at least 1, got {self.order}")
        if self.rank < 1:
            raise ValueError(f"rank must be at least 1, got {self.rank}")
        nf = self.newton_forward
        if not (nf == "exact" or (isinstance(nf, int) and nf >= 1)):
            raise ValueError(f"newton_forward must be 'exact' or a positive int, got {nf!r}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")


@dataclass
class IterationTrace:
    """Iterates ``eta(0) = 0, eta(1), ...`` (or series partial sums) plus cost data.

    ``kernel_applications[i]`` and ``wall_times[i]`` are cumulative at order
    ``i + 1``.  For ``fast``/``reduced``/``hoskins`` the count is K2-equivalent
    applications, for ``ibs`` top-level compositions, for ``newton`` forward
    map evaluations.
    """

    method: str
    iterates: list[np.ndarray] = field(default_factory=list)
    update_norms: list[float] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    kernel_applications: list[int] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    model_kernel_passes: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "order": self.order,
            "update_norms": [float(x) for x in self.update_norms],
            "residual_norms": [float(x) for x in self.residual_norms],
            "kernel_applications": [int(x) for x in self.kernel_applications],
            "wall_ms": [1e3 * float(x) for x in self.wall_times],
            "warnings": list(self.warnings),
        }


def sup_norm(x) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


class _Recorder:
    def __init__(self, method, model, phi, residuals):
        self.trace = IterationTrace(method=str(Method(method).value))
        self.model = model
        self.phi = phi
        self.residuals = residuals
        self.t0 = time.perf_counter()
        self.passes0 = model.kernel_counter.value
        self.trace.iterates.append(np.zeros(model.k1_matrix.shape[1]))

    def push(self, eta, count):
        tr = self.trace
        tr.update_norms.append(sup_norm(eta - tr.iterates[-1]))
        tr.iterates.append(eta)
        tr.kernel_applications.append(count)
        tr.wall_times.append(time.perf_counter() - self.t0)
        tr.model_kernel_passes.append(self.model.kernel_counter.value - self.passes0)

    def finish(self):
        tr = self.trace
        if self.residuals:
            tr.residual_norms = [float(np.linalg.norm(self.model.forward_map(e) - self.phi))
                                 for e in tr.iterates[1:]]
        u = tr.update_norms
        for i in range(3, len(u)):
            if u[i] > u[i - 1] > u[i - 2] > u[i - 3]:
                msg = f"{tr.method}: update norm grew over three consecutive orders ending at order {i + 1}"
                tr.warnings.append(msg)
                warnings.warn(msg, DivergenceWarning, stacklevel=3)
                break
        return tr


def _stop(tol, trace):
    return tol > 0 and trace.update_norms and trace.update_norms[-1] < tol


# --- fast scheme -------------------------------------------------------------

def fast_matrix(model: ForwardModel, pinv: RegularizedInverse, eta1) -> np.ndarray:
    """B with ``B delta = -K1^+ K2(delta x eta1)``; one pass of inner integrals."""
    return -(pinv.pinv @ model.k2_matrix(eta1))


def fast_iterate(model: ForwardModel, pinv: RegularizedInverse, phi, order: int, *,
                 tolerance: float = 0.0, residuals: bool = False) -> IterationTrace:
    """Fast iterative scheme: one K2-equivalent matrix-vector product per order."""
    phi = np.asarray(phi, dtype=float)
    rec = _Recorder(Method.FAST, model, phi, residuals)
    eta1 = pinv(phi)
    rec.push(eta1, 0)
    if order >= 2:
        b = fast_matrix(model, pinv, eta1)
        applications = 0
        for _ in range(order - 1):
            if _stop(tolerance, rec.trace):
                break
            prev, cur = rec.trace.iterates[-2], rec.trace.iterates[-1]
            applications += 1
            rec.push(cur + b @ (cur - prev), applications)
    return rec.finish()


# --- Newton-type scheme ------------------------------------------------------

def truncated_forward(model: ForwardModel, eta, terms: int) -> np.ndarray:
    """Born series ``sum_{j <= terms} K_j eta^j``."""
    return sum(model.apply_kj([eta] * j) for j in range(1, terms + 1))


def newton_iterate(model: ForwardModel, pinv: RegularizedInverse, phi, order: int, *,
                   forward: str | int = "exact", tolerance: float = 0.0,
                   residuals: bool = False) -> IterationTrace:
    """``eta(n+1) = eta(n) - K1^+ (K eta(n) - phi)`` starting from ``eta(0) = 0``."""
    phi = np.asarray(phi, dtype=float)
    if forward == "exact":
        fwd = model.forward_map
    else:
        fwd = lambda e: truncated_forward(model, e, int(forward))  # noqa: E731
    rec = _Recorder(Method.NEWTON, model, phi, residuals)
    # K(0) = 0, so the first step is K1^+ phi without a forward evaluation
    rec.push(pinv(phi), 0)
    evaluations = 0
    for n in range(1, order):
        if _stop(tolerance, rec.trace):
            break
        cur = rec.trace.iterates[-1]
        try:
            data = fwd(cur)
        except Exception as exc:
            raise IterationError(f"forward evaluation failed at iterate {n}: {exc}", n) from exc
        evaluations += 1
        rec.push(cur - pinv(data - phi), evaluations)
    return rec.finish()


# --- inverse Born series -----------------------------------------------------

def compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


class InverseBornSeries:
    """Evaluator for the inverse operators of the classical inverse Born series.

    ``apply(data)`` evaluates the j-linear inverse operator on ``j`` boundary
    data vectors via its recursion over compositions.  Within one call,
    forward blocks ``K_i`` on the same argument slice are computed once;
    nothing is cached across calls, so cost grows exponentially with order.
    """

    def __init__(self, model: ForwardModel, pinv: RegularizedInverse, *,
                 max_order: int = DEFAULT_MAX_IBS_ORDER):
        self.model = model
        self.pinv = pinv
        self.max_order = max_order
        self.compositions = 0  # every composition visited, at all recursion depths
        self.top_level_compositions = 0
        self.block_applications = 0
        self._depth = 0

    def apply(self, data: Sequence[np.ndarray]) -> np.ndarray:
        j = len(data)
        psi = [self.pinv(d) for d in data]
        if j == 1:
            return psi[0]
        total = np.zeros_like(psi[0])
        blocks: dict[tuple[int, int], np.ndarray] = {}
        for parts in range(1, j):
            for comp in compositions(j, parts):
                args = []
                start = 0
                for size in comp:
                    key = (start, size)
                    if key not in blocks:
                        blocks[key] = self.model.apply_kj(psi[start:start + size])
                        self.block_applications += 1
                    args.append(blocks[key])
                    start += size
                self._depth += 1
                try:
                    total += self.apply(args)
                finally:
                    self._depth -= 1
                self.compositions += 1
                if self._depth == 0:
                    self.top_level_compositions += 1
        return -total

    def term(self, phi, j: int) -> np.ndarray:
        """j-th series term, the inverse operator applied to ``phi`` j times."""
        if j > self.max_order:
            raise ValueError(
                f"inverse Born order {j} exceeds max_order={self.max_order}; "
                "raise max_order explicitly to accept the exponential cost")
        phi = np.asarray(phi, dtype=float)
        return self.apply([phi] * j)


def ibs_terms(model: ForwardModel, pinv: RegularizedInverse, phi, max_order: int, *,
              allow_order: int = DEFAULT_MAX_IBS_ORDER) -> list[np.ndarray]:
    """Terms eta_1..eta_J of the inverse Born series."""
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    series = InverseBornSeries(model, pinv, max_order=allow_order)
    return [series.term(phi, j) for j in range(1, max_order + 1)]


def ibs_iterate(model: ForwardModel, pinv: RegularizedInverse, phi, order: int, *,
                allow_order: int = DEFAULT_MAX_IBS_ORDER, tolerance: float = 0.0,
                residuals: bool = False) -> IterationTrace:
    """Partial sums of the inverse Born series recorded as a trace."""
    phi = np.asarray(phi, dtype=float)
    series = InverseBornSeries(model, pinv, max_order=allow_order)
    rec = _Recorder(Method.IBS, model, phi, residuals)
    for j in range(1, order + 1):
        if _stop(tolerance, rec.trace):
            break
        term = series.term(phi, j)
        rec.push(rec.trace.iterates[-1] + term, series.top_level_compositions)
    return rec.finish()


# --- reduced series ----------------------------------------------------------

def reduced_ibs_terms(model: ForwardModel, pinv: RegularizedInverse, phi, max_order: int, *,
                      variant: str = "reduced") -> list[np.ndarray]:
    """Terms of a reduced inverse Born series.

    ``variant="reduced"`` keeps ``-(K~_{j-1} K2 x K1^{x(j-2)}) (K1^+)^{xj}``;
    ``variant="hoskins"`` uses ``K^_j = -K1^+ K2 (K^_{j-1} x K1^+)``.
    """
    return _reduced(model, pinv, np.asarray(phi, dtype=float), max_order, variant)[0]


def _reduced(model, pinv, phi, max_order, variant):
    if variant not in ("reduced", "hoskins"):
        raise ValueError(f"unknown variant {variant!r}")
    eta1 = pinv(phi)
    terms = [eta1]
    counts = [0]
    if variant == "hoskins":
        # same arithmetic as the fast scheme, so partial sums match it
        if max_order >= 2:
            b = fast_matrix(model, pinv, eta1)
            for j in range(2, max_order + 1):
                terms.append(b @ terms[-1])
                counts.append(j - 1)
        return terms, counts
    # Unrolled recursion: a_l = K2(K1^+ a_{l-1}, K1^+ b_{l-1}), b_l = K1 K1^+ b_{l-1},
    # a_0 = b_0 = phi, and the j-th term is (-1)^(j-1) K1^+ a_{j-1}.
    a_cur, b_cur = phi, phi
    for j in range(2, max_order + 1):
        psi_b = pinv(b_cur)
        a_cur = model.apply_kj([pinv(a_cur), psi_b])
        b_cur = model.k1_matrix @ psi_b
        sign = -1.0 if j % 2 == 0 else 1.0
        terms.append(sign * pinv(a_cur))
        counts.append(j - 1)
    return terms, counts


def reduced_iterate(model: ForwardModel, pinv: RegularizedInverse, phi, order: int, *,
                    variant: str = "reduced", tolerance: float = 0.0,
                    residuals: bool = False) -> IterationTrace:
    phi = np.asarray(phi, dtype=float)
    method = Method.REDUCED if variant == "reduced" else Method.HOSKINS
    rec = _Recorder(method, model, phi, residuals)
    terms, counts = _reduced(model, pinv, phi, order, variant)
    for term, count in zip(terms, counts):
        if _stop(tolerance, rec.trace):
            break
        rec.push(rec.trace.iterates[-1] + term, count)
    return rec.finish()


def invert(model: ForwardModel, pinv: RegularizedInverse, phi,
           config: InversionConfig, *, residuals: bool = False) -> IterationTrace:
    m, n, tol = config.method, config.order, config.tolerance
    if m is Method.FAST:
        return fast_iterate(model, pinv, phi, n, tolerance=tol, residuals=residuals)
    if m is Method.IBS:
        return ibs_iterate(model, pinv, phi, n, allow_order=config.max_ibs_order,
                           tolerance=tol, residuals=residuals)
    if m is Method.REDUCED:
        return reduced_iterate(model, pinv, phi, n, variant="reduced", tolerance=tol,
                               residuals=residuals)
    if m is Method.HOSKINS:
        return reduced_iterate(model, pinv, phi, n, variant="hoskins", tolerance=tol,
                               residuals=residuals)
    return newton_iterate(model, pinv, phi, n, forward=config.newton_forward,
                          tolerance=tol, residuals=residuals)


# --- diagnostics -------------------------------------------------------------

def eta_projection(pinv: RegularizedInverse, model: ForwardModel, eta_true) -> np.ndarray:
    """``K1^+ K1 eta``: the part of eta any of the schemes can recover."""
    return pinv(model.k1_matrix @ np.asarray(eta_true, dtype=float))


@dataclass(frozen=True)
class ConvergenceDiagnostics:
    h: float
    mu: float
    nu: float
    pinv_norm: float
    kk2_norm: float
    reduced_criterion: float
    fast_criterion: float
    fast_matrix_norm: float
    projection_defect: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def _bilinear_norm(tensor: np.ndarray, iters: int = 300, tol: float = 1e-12) -> float:
    """Largest ``|w . T(x, y)|`` over unit vectors, by alternating power steps."""
    n = tensor.shape[1]
    x = np.full(n, 1.0 / np.sqrt(n))
    y = x.copy()
    val = 0.0
    for _ in range(iters):
        w = np.einsum("ijl,j,l->i", tensor, x, y)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        w /= nw
        x = np.einsum("ijl,i,l->j", tensor, w, y)
        x /= np.linalg.norm(x)
        y = np.einsum("ijl,i,j->l", tensor, w, x)
        new = np.linalg.norm(y)
        y /= new
        if abs(new - val) <= tol * new:
            return float(new)
        val = new
    return float(val)


def diagnostics(model: ForwardModel, pinv: RegularizedInverse, phi) -> ConvergenceDiagnostics:
    """Discrete surrogates for the quantities in the convergence conditions.

    ``h = ||K1^+ phi||_sup``; ``mu, nu`` from the model's Green's function;
    ``pinv_norm`` and ``kk2_norm`` (the bilinear map ``(x, y) -> K1^+ K2(x, y)``)
    by power iteration; ``reduced_criterion = mu ||phi|| / nu`` and
    ``fast_criterion = kk2_norm * h`` to be compared with 1.
    ``projection_defect`` is ``||(K1^+ K1 - I) V_r||_2`` on the retained subspace.
    """
    phi = np.asarray(phi, dtype=float)
    p = pinv.pinv
    n = p.shape[0]
    eta1 = p @ phi
    h = sup_norm(eta1)
    mu, nu = model.green_sup_norms()
    pinv_norm = operator_norm(lambda x: p @ x, lambda y: p.T @ y, p.shape[1])
    tensor = np.stack([p @ model.k2_matrix(e) for e in np.eye(n)], axis=2)
    kk2 = _bilinear_norm(tensor)
    b = -np.einsum("ijl,l->ij", tensor, eta1)
    b_norm = operator_norm(lambda x: b @ x, lambda y: b.T @ y, n)
    vr = pinv.right_basis
    defect = float(np.linalg.norm(p @ (model.k1_matrix @ vr) - vr, 2))
    phi_norm = float(np.linalg.norm(phi))
    return ConvergenceDiagnostics(
        h=h,
        mu=mu,
        nu=nu,
        pinv_norm=pinv_norm,
        kk2_norm=kk2,
        reduced_criterion=mu * phi_norm / nu if nu > 0 else float("inf"),
        fast_criterion=kk2 * h,
        fast_matrix_norm=b_norm,
        projection_defect=defect,
    )


def contraction_factor(update_norms: Sequence[float], burn_in: int = 0,
                       floor: float = 0.0) -> float:
    """Largest ratio of successive update norms after ``burn_in`` steps.

    Ratios whose denominator is at or below ``floor`` are skipped, so rounding
    noise at convergence does not masquerade as expansion.
    """
    u = list(update_norms)[burn_in:]
    ratios = [u[i + 1] / u[i] for i in range(len(u) - 1) if u[i] > floor]
    return max(ratios) if ratios else 0.0


def a_posteriori_check(trace: IterationTrace, reference, b: float) -> list[tuple[float, float]]:
    """Pairs ``(||eta(n) - reference||, b ||eta(n+1) - eta(n)||)`` for each n."""
    ref = np.asarray(reference)
    its = trace.iterates
    return [(sup_norm(its[n] - ref), b * sup_norm(its[n + 1] - its[n]))
            for n in range(len(its) - 1)]
