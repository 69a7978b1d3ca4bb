"""Dense linear algebra: one-sided Jacobi SVD, truncated-SVD pseudoinverse, LU solve.

Matrices are plain 2-D float ``numpy`` arrays.  The SVD is a Hestenes
one-sided Jacobi iteration using a round-robin ordering, so that every
rotation within a round acts on disjoint column pairs and can be applied as
one vectorised update.  Jacobi keeps high relative accuracy on the small
singular values, which matters for the rank-23 truncation of the radial K1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

_EPS = np.finfo(float).eps


class SvdConvergenceError(RuntimeError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = pivot


class RankError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``a = u @ diag(singular_values) @ v.T`` with non-increasing values."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def _round_robin(n: int):
    """Yield index arrays ``(p, q)`` of disjoint pairs covering all pairs once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    for _ in range(size - 1):
        top = players[: size // 2]
        bot = players[size // 2:][::-1]
        pairs = [(i, j) if i < j else (j, i) for i, j in zip(top, bot) if i >= 0 and j >= 0]
        if pairs:
            p, q = np.array(pairs).T
            yield p, q
        players = [players[0]] + [players[-1]] + players[1:-1]


def _complete_orthonormal(u: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace the columns of ``u`` not flagged ``good`` by an orthonormal complement."""
    m, n = u.shape
    if good.all():
        return u
    basis = u[:, good]
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(m)]))
    # q spans basis first; the next columns complete it
    extra = q[:, basis.shape[1]: basis.shape[1] + (n - basis.shape[1])]
    out = u.copy()
    out[:, ~good] = extra
    return out


def svd(a, *, max_sweeps: int = 60, tol: float | None = None) -> SvdFactors:
    """Singular value decomposition by one-sided Jacobi rotations.

    Parameters
    ----------
    a : array_like
        Finite real matrix of shape ``(rows, cols)``.
    max_sweeps : int
        Iteration cap; exceeding it raises :class:`SvdConvergenceError`.
    tol : float, optional
        Orthogonality threshold on normalised column inner products.

    Returns
    -------
    SvdFactors
        ``u`` is ``rows x r``, ``v`` is ``cols x r`` with ``r = min(rows, cols)``.
    """
    a = as_matrix(a)
    if a.shape[0] < a.shape[1]:
        f = svd(a.T, max_sweeps=max_sweeps, tol=tol)
        return SvdFactors(u=f.v, singular_values=f.singular_values, v=f.u, sweeps=f.sweeps)

    m, n = a.shape
    if tol is None:
        tol = m * _EPS
    # unit-scale copy so squared column norms neither underflow nor overflow
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return SvdFactors(u=np.eye(m, n), singular_values=np.zeros(n), v=np.eye(n), sweeps=0)
    w = a / scale
    v = np.eye(n)
    # columns below this squared norm are rounding residue of a rank deficiency
    negligible = (_EPS * np.linalg.norm(w)) ** 2
    pairs = list(_round_robin(n))
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p, q in pairs:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            active &= (gamma != 0.0) & (alpha > negligible) & (beta > negligible)
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise SvdConvergenceError(
            f"Jacobi SVD did not converge in {max_sweeps} sweeps "
            f"(shape {a.shape}, Frobenius norm {np.linalg.norm(a):.3e})")

    sv = np.linalg.norm(w, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv, w, v = sv[order], w[:, order], v[:, order]
    good = sv > sv[0] * m * _EPS
    u = np.zeros_like(w)
    u[:, good] = w[:, good] / sv[good]
    u = _complete_orthonormal(u, good)
    return SvdFactors(u=u, singular_values=sv * scale, v=v, sweeps=sweep)


@dataclass(frozen=True)
class RegularizedInverse:
    """Truncated-SVD pseudoinverse; rank truncation plays the role of regularisation."""

    pinv: np.ndarray
    retained_rank: int
    singular_values_kept: np.ndarray
    singular_values_dropped: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __call__(self, data) -> np.ndarray:
        return self.pinv @ np.asarray(data, dtype=float)

    @property
    def right_basis(self) -> np.ndarray:
        """Retained right singular vectors (the reconstructible subspace)."""
        return self.v[:, : self.retained_rank]


def truncated_pinv(a, rank: int | None = None, *, threshold: float | None = None,
                   factors: SvdFactors | None = None,
                   rank_floor: float = 1e-14) -> RegularizedInverse:
    """Pseudoinverse keeping either the ``rank`` largest singular values or all
    values ``>= threshold * s_1``.

    A requested rank whose last singular value sits below ``rank_floor * s_1``
    is rejected: inverting it would amplify rounding noise only.
    """
    a = as_matrix(a)
    if (rank is None) == (threshold is None):
        raise ValueError("give exactly one of rank or threshold")
    f = factors if factors is not None else svd(a)
    s = f.singular_values
    full = min(a.shape)
    if threshold is not None:
        rank = int(np.count_nonzero(s >= threshold * s[0]))
        rank = max(rank, 1)
    if not 1 <= rank <= full:
        raise RankError(f"rank must lie in [1, {full}], got {rank}")
    if s[rank - 1] < rank_floor * s[0]:
        raise RankError(
            f"rank {rank} exceeds numerical rank: s_{rank}/s_1 = {s[rank - 1] / s[0]:.3e} "
            f"< {rank_floor:g}")
    u = f.u[:, :rank]
    v = f.v[:, :rank]
    pinv = (v / s[:rank]) @ u.T
    return RegularizedInverse(
        pinv=pinv,
        retained_rank=rank,
        singular_values_kept=s[:rank].copy(),
        singular_values_dropped=s[rank:].copy(),
        u=f.u,
        v=f.v,
    )


def solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` by partially pivoted LU.

    Raises :class:`SingularMatrixError` (carrying the smallest pivot) when a
    pivot is negligible relative to the largest.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"right-hand side length {b.shape[0]} does not match {n}")
    with warnings.catch_warnings():
        # exact-zero pivots are reported below with more context
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    smallest = float(pivots.min())
    if smallest <= n * _EPS * float(pivots.max()):
        raise SingularMatrixError(
            f"matrix is singular to working precision (smallest pivot {smallest:.3e})",
            smallest)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def operator_norm(matvec, rmatvec, n: int, *, iters: int = 200, tol: float = 1e-10,
                  seed: int = 0) -> float:
    """Spectral norm estimate of a linear map by power iteration on ``A^T A``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = rmatvec(matvec(x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = np.sqrt(ny)
        x = y / ny
        if abs(new - est) <= tol * new:
            return float(new)
        est = new
    return float(est)
