"""Finite-dimensional Born model over a square matrix A.

The forward series is ``y = y_1 + y_2 + ...`` with ``y_1 = A x`` and
``y_n = -A diag(x) y_{n-1}``.  Multilinear terms use the same recursion with a
distinct argument per slot, ``K_n(xi_1, ..., xi_n) = -A (xi_1 * K_{n-1}(xi_2, ...))``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import as_matrix
from .radial_model import KernelCounter

TOY_A = np.array([[0.1, 0.2], [0.3, 0.4]])
TOY_X = np.array([0.07, 0.08])


class FiniteBornModel:
    """Born model with kernel ``A`` and incident field identically one.

    Parameters
    ----------
    a_matrix : array_like
        Square kernel matrix.
    forward_count : int
        Number of series terms summed by :meth:`forward_map`.
    """

    def __init__(self, a_matrix, forward_count: int = 5):
        a = as_matrix(a_matrix)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        if forward_count < 1:
            raise ValueError("forward_count must be at least 1")
        self.a_matrix = a
        self.forward_count = forward_count
        self.kernel_counter = KernelCounter()

    @classmethod
    def toy(cls) -> "FiniteBornModel":
        return cls(TOY_A)

    @property
    def dimension(self) -> int:
        return self.a_matrix.shape[0]

    n_unknowns = dimension
    n_data = dimension

    @property
    def k1_matrix(self) -> np.ndarray:
        return self.a_matrix

    def _vec(self, x) -> np.ndarray:
        v = np.asarray(x, dtype=float)
        if v.shape != (self.dimension,):
            raise ValueError(f"vector of shape {v.shape} does not match dimension {self.dimension}")
        return v

    def apply_kj(self, fields: Sequence) -> np.ndarray:
        if len(fields) < 1:
            raise ValueError("apply_kj needs at least one argument")
        xs = [self._vec(f) for f in fields]
        a = self.a_matrix
        v = a @ xs[-1]
        for xi in reversed(xs[:-1]):
            v = -(a @ (xi * v))
        self.kernel_counter.add(len(xs))
        return v

    def k2_matrix(self, second) -> np.ndarray:
        """Matrix of ``delta -> K_2(delta x second) = -A diag(A second) delta``."""
        second = self._vec(second)
        self.kernel_counter.add(2)
        return -self.a_matrix * (self.a_matrix @ second)

    def forward_terms(self, x, count: int) -> list[np.ndarray]:
        """y_1..y_count of the forward series."""
        x = self._vec(x)
        a = self.a_matrix
        terms = [a @ x]
        for _ in range(count - 1):
            terms.append(-(a @ (x * terms[-1])))
        return terms

    def forward_map(self, x) -> np.ndarray:
        """Truncated series sum; the truncation defines the data of the toy problem."""
        return np.sum(self.forward_terms(x, self.forward_count), axis=0)

    def green_sup_norms(self) -> tuple[float, float]:
        a = self.a_matrix
        mu = float(np.max(np.abs(a)))
        nu = float(np.sqrt(self.dimension) * np.max(np.linalg.norm(a, axis=0)))
        return mu, nu
