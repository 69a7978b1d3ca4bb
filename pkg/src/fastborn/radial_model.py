"""Two-dimensional radial diffusion testbed.

A disk of radius R with Robin boundary coefficient beta is illuminated by
angular modes ``exp(i m theta)`` placed on the boundary, and the response is
read at ``(R, 0)``.  The perturbation eta depends on r only, so every mode
decouples into a one-dimensional radial problem with Green's function

    g_m(r, r') = K_m(k max) I_m(k min) - D_m I_m(k r) I_m(k r'),
    D_m = (beta K_m(kR) + k K'_m(kR)) / (beta I_m(kR) + k I'_m(kR)).

Radial integrals use the midpoint rule on ``r_j = (j - 1/2) dr`` with weight
``r_j dr``.  Products of I_m and K_m are formed in log space because
``K_m(k r)`` overflows near the origin for the mode counts used here.

Data are normalised so that ``phi(m) = R * (u0(R) - u(R))`` with
``u0 = g_m(., R)``; the forward operators K_j below carry the same factor R.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .special_functions import (
    MAX_ORDER,
    log_derivative_ratios,
    log_i_orders,
    log_i_table,
    log_k_orders,
    log_k_table,
)


class ForwardSolveError(RuntimeError):
    def __init__(self, message: str, mode: int):
        super().__init__(message)
        self.mode = mode


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretisation parameters; defaults reproduce the 90-mode disk experiment."""

    k: float = 1.0
    radius_r: float = 3.0
    radius_a: float = 1.5
    eta_a: float = 0.2
    beta: float = 3.0
    modes: int = 90
    grid_n: int = 90

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not self.radius_r > 0:
            raise ValueError(f"radius_r must be positive, got {self.radius_r}")
        if not 0 < self.radius_a < self.radius_r:
            raise ValueError(f"radius_a must lie in (0, radius_r), got {self.radius_a}")
        if not self.eta_a > -1:
            raise ValueError(f"eta_a must exceed -1, got {self.eta_a}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 1 <= self.modes < MAX_ORDER:
            raise ValueError(f"modes must lie in [1, {MAX_ORDER - 1}], got {self.modes}")
        if self.grid_n < 2:
            raise ValueError(f"grid_n must be at least 2, got {self.grid_n}")

    @property
    def alpha0(self) -> float:
        return self.k * self.k


@dataclass(frozen=True)
class RadialGrid:
    n: int
    dr: float
    nodes: np.ndarray

    @classmethod
    def midpoint(cls, radius: float, n: int) -> "RadialGrid":
        dr = radius / n
        return cls(n=n, dr=dr, nodes=(np.arange(n) + 0.5) * dr)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights ``r_j dr`` for radial integrals."""
        return self.nodes * self.dr

    def same_as(self, other: "RadialGrid") -> bool:
        return self.n == other.n and self.dr == other.dr


@dataclass(frozen=True)
class MaterialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has {v.shape} values for a grid of {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class BoundaryData:
    """Measurements phi(m) for source modes m = 1..M_S."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("boundary data must be a finite 1-D sequence")
        object.__setattr__(self, "values", v)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.values.size + 1)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def ground_truth(params: ModelParams, grid: RadialGrid | None = None) -> MaterialField:
    """Piecewise-constant inclusion: eta_a for r <= a, zero outside."""
    grid = grid or RadialGrid.midpoint(params.radius_r, params.grid_n)
    return MaterialField(grid, np.where(grid.nodes <= params.radius_a, params.eta_a, 0.0))


class KernelCounter:
    """Thread-safe monotone count of kernel applications."""

    def __init__(self):
        self._value = 0
        self._lock = threading.Lock()

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._value += n

    @property
    def value(self) -> int:
        return self._value


# --- closed-form Green's function ------------------------------------------

def _robin_terms(m: int, params: ModelParams):
    """log I_m(kR), log K_m(kR), and the two Robin combinations divided by I, K."""
    x = params.k * params.radius_r
    li = log_i_orders(m, x)[m]
    lk = log_k_orders(m, x)[m]
    ri, rk = log_derivative_ratios(m, x)
    den = params.beta + params.k * ri[m]  # (beta I + k I') / I, always > 0
    num = params.beta + params.k * rk[m]  # (beta K + k K') / K
    return li, lk, den, num


def robin_coefficient(m: int, params: ModelParams) -> float:
    """D_m = (beta K_m(kR) + k K'_m(kR)) / (beta I_m(kR) + k I'_m(kR))."""
    li, lk, den, num = _robin_terms(m, params)
    return math.copysign(math.exp(lk - li + math.log(abs(num) / den)), num)


def greens_radial(m: int, r: float, rp: float, params: ModelParams) -> float:
    """Radial Green's function g_m(r, r') of the background Robin problem."""
    if not (0 < r <= params.radius_r and 0 < rp <= params.radius_r):
        raise ValueError(f"radii must lie in (0, R], got r={r}, r'={rp}")
    m = abs(int(m))
    k = params.k
    lo, hi = min(r, rp), max(r, rp)
    li_lo = log_i_orders(m, k * lo)[m]
    lk_hi = log_k_orders(m, k * hi)[m]
    li_r = log_i_orders(m, k * r)[m]
    li_rp = log_i_orders(m, k * rp)[m]
    li_R, lk_R, den, num = _robin_terms(m, params)
    free = math.exp(lk_hi + li_lo)
    corr = math.copysign(math.exp(lk_R - li_R + math.log(abs(num) / den) + li_r + li_rp), num)
    return free - corr


def greens_boundary(m: int, r, params: ModelParams):
    """Boundary trace g_m(r, R) = I_m(kr) / (R (beta I_m(kR) + k I'_m(kR)))."""
    m = abs(int(m))
    r = np.asarray(r, dtype=float)
    li_R, _, den, _ = _robin_terms(m, params)
    li_r = log_i_table(m, r.ravel())[m].reshape(r.shape)
    out = np.exp(li_r - li_R - math.log(params.radius_r * den))
    return float(out) if out.ndim == 0 else out


def robin_residual(m: int, rp: float, params: ModelParams) -> float:
    """|d_r g_m(R, r') + beta g_m(R, r')| / |g_m(R, r')| from analytic derivatives."""
    m = abs(int(m))
    k, R, beta = params.k, params.radius_r, params.beta
    D = robin_coefficient(m, params)
    ri, rk = log_derivative_ratios(m, k * R)
    li_R = log_i_orders(m, k * R)[m]
    lk_R = log_k_orders(m, k * R)[m]
    i_rp = math.exp(log_i_orders(m, k * rp)[m])
    i_R, k_R = math.exp(li_R), math.exp(lk_R)
    g = (k_R - D * i_R) * i_rp
    dg = (k * rk[m] * k_R - D * k * ri[m] * i_R) * i_rp
    return abs(dg + beta * g) / abs(g)


# --- exact data from the transmission problem ------------------------------

@dataclass(frozen=True)
class TransmissionSolution:
    mode: int
    a: float
    b: float
    c: float
    c_background: float
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def residual(self) -> float:
        x = np.array([self.a, self.b, self.c])
        scale = np.abs(self.matrix) @ np.abs(x) + np.abs(self.rhs)
        return float(np.max(np.abs(self.matrix @ x - self.rhs) / scale))


def _bessel_values(m: int, x: float):
    """I_m, I'_m, K_m, K'_m at x (values must fit in double range)."""
    li = log_i_orders(m + 1, x)
    lk = log_k_orders(m + 1, x)
    lo = abs(m - 1)
    i = np.exp(li)
    kk = np.exp(lk)
    return i[m], 0.5 * (i[lo] + i[m + 1]), kk[m], -0.5 * (kk[lo] + kk[m + 1])


def transmission_solve(m: int, params: ModelParams) -> TransmissionSolution:
    """Coefficients (a_m, b_m, c_m) of the two-region solution for mode m.

    The source sits on r = R, so on r = a the incident field is
    ``I_m(ka) K_m(kR)``.  The system is solved for the departure from the
    background solution (a0, 0, -d_m), which removes the cancellation that
    would otherwise swamp phi(m) at high modes.
    """
    k, a, R, beta = params.k, params.radius_a, params.radius_r, params.beta
    s = math.sqrt(1.0 + params.eta_a)
    Iin, dIin, _, _ = _bessel_values(m, s * k * a)
    Ia, dIa, Ka, dKa = _bessel_values(m, k * a)
    IR, dIR, KR, dKR = _bessel_values(m, k * R)
    matrix = np.array([
        [Iin, -Ka, -Ia],
        [s * k * dIin, -k * dKa, -k * dIa],
        [0.0, beta * KR + k * dKR, beta * IR + k * dIR],
    ])
    # The outgoing boundary condition makes the right-hand side of the third
    # row the negative of the Robin combination of the incident field.
    rhs = np.array([Ia * KR, k * dIa * KR, -(k * IR * dKR + beta * IR * KR)])
    c0 = -(beta * KR + k * dKR) / (beta * IR + k * dIR) * IR
    a0 = KR + c0  # background interior amplitude (eta_a = 0)
    # only the first column depends on eta_a
    col_diff = np.array([Iin - Ia, s * k * dIin - k * dIa, 0.0])
    pert_rhs = -a0 * col_diff
    scale = np.max(np.abs(matrix), axis=0)
    try:
        y = linalg.solve(matrix / scale, pert_rhs)
    except linalg.SingularMatrixError as exc:
        cond = np.linalg.cond(matrix / scale)
        raise linalg.SingularMatrixError(
            f"transmission system for mode {m} is singular (condition {cond:.3e})",
            exc.pivot) from exc
    da, b, dc = y / scale
    return TransmissionSolution(mode=m, a=a0 + da, b=b, c=c0 + dc, c_background=c0,
                                matrix=matrix, rhs=rhs)


def transmission_coefficients(m: int, params: ModelParams) -> tuple[float, float, float]:
    sol = transmission_solve(m, params)
    return sol.a, sol.b, sol.c


def interface_mismatch(m: int, params: ModelParams) -> tuple[float, float]:
    """Relative jumps of value and flux across r = a for the solved coefficients."""
    sol = transmission_solve(m, params)
    k, a, R = params.k, params.radius_a, params.radius_r
    s = math.sqrt(1.0 + params.eta_a)
    Iin, dIin, _, _ = _bessel_values(m, s * k * a)
    Ia, dIa, Ka, dKa = _bessel_values(m, k * a)
    _, _, KR, _ = _bessel_values(m, k * R)
    v, dv = sol.a * Iin, sol.a * s * k * dIin
    w = Ia * KR + sol.b * Ka + sol.c * Ia
    dw = k * dIa * KR + sol.b * k * dKa + sol.c * k * dIa
    return abs(v - w) / abs(v), abs(dv - dw) / abs(dv)


def forward_exact(params: ModelParams) -> BoundaryData:
    """phi(m) = R (g_m(R, R) - w_m(R)) for m = 1..M_S, w the transmitted field."""
    k, R = params.k, params.radius_r
    out = np.empty(params.modes)
    for idx, m in enumerate(range(1, params.modes + 1)):
        sol = transmission_solve(m, params)
        IR, _, KR, _ = _bessel_values(m, k * R)
        out[idx] = -R * (sol.b * KR + (sol.c - sol.c_background) * IR)
    return BoundaryData(out)


# --- discretised model ------------------------------------------------------

@dataclass(eq=False)
class RadialForwardModel:
    """Precomputed Green's tables and the discrete K1 for one parameter set.

    Attributes
    ----------
    greens_interior : ndarray, shape (M_S, N_r, N_r)
        ``g_m(r_i, r_j)`` for modes m = 1..M_S.
    greens_boundary : ndarray, shape (M_S, N_r)
        ``g_m(r_j, R)``; also the incident field u0 on the grid.
    k1_matrix : ndarray, shape (M_S, N_r)
    """

    params: ModelParams
    grid: RadialGrid
    greens_interior: np.ndarray
    greens_boundary: np.ndarray
    k1_matrix: np.ndarray
    threads: int = 1
    kernel_counter: KernelCounter = field(default_factory=KernelCounter)

    @property
    def u0_traces(self) -> np.ndarray:
        return self.greens_boundary

    @property
    def n_unknowns(self) -> int:
        return self.grid.n

    @property
    def n_data(self) -> int:
        return self.params.modes

    def _field(self, xi) -> np.ndarray:
        if isinstance(xi, MaterialField) and not xi.grid.same_as(self.grid):
            raise ValueError("field lives on a different grid than the model")
        v = np.asarray(xi, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field of shape {v.shape} does not match grid of {self.grid.n} nodes")
        return v

    def _batched(self, fn, count: int):
        if self.threads <= 1:
            return [fn(i) for i in range(count)]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, range(count)))

    def apply_kj(self, fields: Sequence) -> np.ndarray:
        """Multilinear Born operator K_j applied to ``fields[0] x ... x fields[j-1]``.

        The first field sits next to the detector, the last next to the source.
        """
        if len(fields) < 1:
            raise ValueError("apply_kj needs at least one field")
        xs = [self._field(f) for f in fields]
        j = len(xs)
        p = self.params
        w = self.grid.weights
        gt = self.greens_boundary
        v = gt * (xs[-1] * w)
        for xi in reversed(xs[:-1]):
            v = (xi * w) * np.einsum("mij,mj->mi", self.greens_interior, v)
        self.kernel_counter.add(j)
        sign = -1.0 if j % 2 == 0 else 1.0
        return sign * p.alpha0 ** j * p.radius_r * np.einsum("mi,mi->m", gt, v)

    def k2_matrix(self, second) -> np.ndarray:
        """Matrix of ``delta -> K_2(delta x second)``, shape (M_S, N_r).

        One pass of the inner integrals against ``second`` builds the whole
        matrix, after which every K_2 application is a matrix-vector product.
        """
        second = self._field(second)
        p = self.params
        w = self.grid.weights
        gt = self.greens_boundary
        inner = np.einsum("mij,mj->mi", self.greens_interior, gt * (second * w))
        self.kernel_counter.add(2)
        return -(p.alpha0 ** 2) * p.radius_r * gt * w * inner

    def forward_map(self, eta) -> np.ndarray:
        """Full nonlinear data by solving the per-mode integral equation.

        ``(I - T_m) u_m = u0_m`` with ``(T_m u)_i = -k^2 sum_j g_m(r_i, r_j) eta_j u_j r_j dr``.
        """
        eta = self._field(eta)
        p = self.params
        w = self.grid.weights
        ident = np.eye(self.grid.n)
        ew = eta * w

        def one(idx: int) -> float:
            t = -p.alpha0 * self.greens_interior[idx] * ew
            try:
                u = linalg.solve(ident - t, self.greens_boundary[idx])
            except linalg.SingularMatrixError as exc:
                raise ForwardSolveError(
                    f"integral equation for mode {idx + 1} is singular "
                    f"(smallest pivot {exc.pivot:.3e}); ||T|| >= 1 regime", idx + 1) from exc
            return p.alpha0 * p.radius_r * float(np.dot(self.greens_boundary[idx] * ew, u))

        return np.array(self._batched(one, p.modes))

    def green_sup_norms(self) -> tuple[float, float]:
        """Discrete surrogates of (mu, nu) over the inclusion region r <= a.

        ``mu = alpha0 * max |g_m(r_i, r_j)|`` over modes and inclusion nodes;
        ``nu = alpha0 * |omega|^(1/2) * max_i ||(R g_m(r_i, R))_m||_2`` with
        ``|omega| = pi a^2``.
        """
        p = self.params
        inside = self.grid.nodes <= p.radius_a
        g = self.greens_interior[:, inside][:, :, inside]
        mu = p.alpha0 * float(np.max(np.abs(g)))
        trace = p.radius_r * self.greens_boundary[:, inside]
        nu = p.alpha0 * math.sqrt(math.pi * p.radius_a ** 2) * float(
            np.max(np.linalg.norm(trace, axis=0)))
        return mu, nu


def assemble_model(params: ModelParams, *, threads: int = 1) -> RadialForwardModel:
    """Build Green's tables, boundary traces and K1 for modes 1..M_S."""
    grid = RadialGrid.midpoint(params.radius_r, params.grid_n)
    M, N = params.modes, grid.n
    k = params.k
    kr = k * grid.nodes
    log_i = log_i_table(M, kr)  # (M+1, N)
    log_k = log_k_table(M, kr)
    idx = np.arange(N)
    hi = np.maximum(idx[:, None], idx[None, :])
    lo = np.minimum(idx[:, None], idx[None, :])

    def one(mi: int):
        m = mi + 1
        li_R, lk_R, den, num = _robin_terms(m, params)
        lim = log_i[m]
        free = np.exp(log_k[m][hi] + lim[lo])
        log_d = lk_R - li_R + math.log(abs(num) / den)
        corr = np.exp(log_d + lim[:, None] + lim[None, :])
        table = free - math.copysign(1.0, num) * corr
        trace = np.exp(lim - li_R - math.log(params.radius_r * den))
        return table, trace

    with np.errstate(under="ignore"):
        if threads <= 1:
            parts = [one(i) for i in range(M)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(one, range(M)))
    greens = np.stack([t for t, _ in parts])
    traces = np.stack([g for _, g in parts])
    k1 = params.alpha0 * params.radius_r * traces ** 2 * grid.weights
    return RadialForwardModel(params=params, grid=grid, greens_interior=greens,
                              greens_boundary=traces, k1_matrix=k1, threads=threads)
