"""Modified Bessel functions I_m and K_m for integer order and real argument.

K_0 and K_1 come from the ascending series (x <= 2) or Steed's continued
fraction (x > 2); higher K_m follow by upward recurrence, which is stable for
the second kind.  I_m is computed by Miller's backward recurrence normalised
with ``exp(x) = I_0(x) + 2 * sum_k I_k(x)``, so no cancellation occurs.

Both recurrences are carried out in log space with periodic rescaling, which
makes ``log I_m`` and ``log K_m`` available far beyond the range where the
values themselves fit in a double.  Derivatives use only the recurrence
identities ``I'_m = (I_{m-1} + I_{m+1}) / 2`` and
``K'_m = -(K_{m-1} + K_{m+1}) / 2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 200

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-17
# log of the smallest normal / largest finite double
_LOG_TINY = math.log(np.finfo(float).tiny)
_LOG_HUGE = math.log(np.finfo(float).max)
_RESCALE = 1e250
_LN2 = math.log(2.0)


class BesselRangeError(ValueError):
    """Raised for invalid orders/arguments, or for over/underflow in strict mode."""


class BesselUnderflowWarning(RuntimeWarning):
    pass


class BesselOverflowWarning(RuntimeWarning):
    pass


def _check(order, x, max_order):
    if int(order) != order or order < 0:
        raise BesselRangeError(f"order must be a non-negative integer, got {order!r}")
    if order > max_order:
        raise BesselRangeError(f"order {order} exceeds max_order={max_order}")
    if not x > 0 or not math.isfinite(x):
        raise BesselRangeError(f"argument must be positive and finite, got {x!r}")


def _k01_scaled(x: float) -> tuple[float, float]:
    """Return ``(exp(x) K_0(x), exp(x) K_1(x))``."""
    if x <= 2.0:
        q = 0.25 * x * x
        lg = math.log(0.5 * x)
        term0 = 1.0  # q^k / (k!)^2
        term1 = 1.0  # q^k / (k! (k+1)!)
        i0 = i1 = 0.0
        s0 = s1 = 0.0
        harm = 0.0  # H_k
        k = 0
        while True:
            i0 += term0
            i1 += term1
            s0 += term0 * harm
            # psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
            s1 += term1 * (2.0 * harm + 1.0 / (k + 1) - 2.0 * EULER_GAMMA)
            k += 1
            term0 *= q / (k * k)
            term1 *= q / (k * (k + 1))
            harm += 1.0 / k
            if term0 < _EPS * i0 and term1 < _EPS * i1:
                break
        i1 *= 0.5 * x
        k0 = -(lg + EULER_GAMMA) * i0 + s0
        k1 = 1.0 / x + lg * i1 - 0.25 * x * s1
        ex = math.exp(x)
        return k0 * ex, k1 * ex

    # Steed's algorithm for the CF2 continued fraction (order 0).
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover
        raise BesselRangeError(f"continued fraction failed to converge at x={x}")
    h *= a1
    k0 = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def log_k_orders(max_order: int, x: float) -> np.ndarray:
    """``log K_m(x)`` for ``m = 0..max_order`` by upward recurrence."""
    out = np.empty(max_order + 1)
    k0, k1 = _k01_scaled(x)
    out[0] = math.log(k0) - x
    if max_order == 0:
        return out
    out[1] = math.log(k1) - x
    prev, cur = k0, k1
    exp2 = 0  # values are scaled by 2**-exp2; powers of two rescale exactly
    for m in range(1, max_order):
        prev, cur = cur, prev + (2.0 * m / x) * cur
        if cur > _RESCALE:
            _, e = math.frexp(cur)
            prev = math.ldexp(prev, -e)
            cur = math.ldexp(cur, -e)
            exp2 += e
        out[m + 1] = (math.log(cur) - x) + exp2 * _LN2
    return out


def _miller_start(max_order: int, x: float) -> int:
    n = max(max_order, int(math.ceil(x)))
    return n + 30 + int(math.sqrt(60.0 * n))


def log_i_orders(max_order: int, x: float) -> np.ndarray:
    """``log I_m(x)`` for ``m = 0..max_order`` by Miller's backward recurrence."""
    start = _miller_start(max_order, x)
    mant = np.empty(max_order + 1)
    expo = np.zeros(max_order + 1, dtype=np.int64)
    nxt, cur = 0.0, 1e-300
    exp2 = 0  # running scale 2**exp2, adjusted only by exact powers of two
    total = 0.0  # scaled I_0 + 2 sum I_k, same scale as (nxt, cur)
    for k in range(start, 0, -1):
        if k <= max_order:
            mant[k] = cur
            expo[k] = exp2
        total += 2.0 * cur
        nxt, cur = cur, (2.0 * k / x) * cur + nxt
        if cur > _RESCALE:
            _, e = math.frexp(cur)
            nxt = math.ldexp(nxt, -e)
            total = math.ldexp(total, -e)
            cur = math.ldexp(cur, -e)
            exp2 += e
    mant[0] = cur
    expo[0] = exp2
    total += cur
    return (np.log(mant) - math.log(total)) + (expo - exp2) * _LN2 + x


def log_bessel_i(order: int, x: float, *, max_order: int = MAX_ORDER) -> float:
    """Natural log of I_order(x); finite even where I_order(x) underflows."""
    _check(order, x, max_order)
    return float(log_i_orders(int(order), float(x))[order])


def log_bessel_k(order: int, x: float, *, max_order: int = MAX_ORDER) -> float:
    """Natural log of K_order(x); finite even where K_order(x) overflows."""
    _check(order, x, max_order)
    return float(log_k_orders(int(order), float(x))[order])


def _exp_checked(logv: float, kind: str, order: int, x: float, strict: bool) -> float:
    if logv < _LOG_TINY:
        msg = f"{kind}_{order}({x}) underflows (log value {logv:.6g})"
        if strict:
            raise BesselRangeError(msg)
        warnings.warn(msg, BesselUnderflowWarning, stacklevel=3)
    elif logv > _LOG_HUGE:
        msg = f"{kind}_{order}({x}) overflows (log value {logv:.6g})"
        if strict:
            raise BesselRangeError(msg)
        warnings.warn(msg, BesselOverflowWarning, stacklevel=3)
    return math.exp(logv) if logv <= _LOG_HUGE else math.inf


def bessel_i(order: int, x: float, *, strict: bool = False,
             max_order: int = MAX_ORDER) -> float:
    """Modified Bessel function of the first kind, I_order(x).

    Values below the normal double range are returned as subnormal/zero with a
    :class:`BesselUnderflowWarning`; ``strict=True`` raises instead.
    """
    return _exp_checked(log_bessel_i(order, x, max_order=max_order), "I", order, x, strict)


def bessel_k(order: int, x: float, *, strict: bool = False,
             max_order: int = MAX_ORDER) -> float:
    """Modified Bessel function of the second kind, K_order(x).

    Overflow returns ``inf`` with a :class:`BesselOverflowWarning`;
    ``strict=True`` raises instead.
    """
    return _exp_checked(log_bessel_k(order, x, max_order=max_order), "K", order, x, strict)


@dataclass(frozen=True)
class BesselPair:
    order: int
    argument: float
    i_value: float
    k_value: float
    i_deriv: float
    k_deriv: float
    underflow: bool = False
    overflow: bool = False

    @property
    def wronskian(self) -> float:
        """``I K' - I' K``; equals ``-1/argument`` analytically."""
        return self.i_value * self.k_deriv - self.i_deriv * self.k_value


def bessel_pair(order: int, x: float, *, strict: bool = False,
                max_order: int = MAX_ORDER) -> BesselPair:
    """I, K and their first derivatives at one (order, x), from one recurrence each."""
    _check(order, x, max_order)
    order = int(order)
    x = float(x)
    li = log_i_orders(order + 1, x)
    lk = log_k_orders(order + 1, x)
    # I_{-1} = I_1, K_{-1} = K_1
    lo = abs(order - 1)
    under = bool(li[order + 1] < _LOG_TINY)
    over = bool(lk[order + 1] > _LOG_HUGE)
    if (under or over) and strict:
        raise BesselRangeError(
            f"Bessel pair at order {order}, x={x} leaves double range "
            f"(log I_{order + 1}={li[order + 1]:.6g}, log K_{order + 1}={lk[order + 1]:.6g})")
    if under:
        warnings.warn(f"I_{order + 1}({x}) underflows", BesselUnderflowWarning, stacklevel=2)
    if over:
        warnings.warn(f"K_{order + 1}({x}) overflows", BesselOverflowWarning, stacklevel=2)
    with np.errstate(over="ignore", under="ignore"):
        i = np.exp(li)
        k = np.exp(lk)
    return BesselPair(
        order=order,
        argument=x,
        i_value=float(i[order]),
        k_value=float(k[order]),
        i_deriv=0.5 * float(i[lo] + i[order + 1]),
        k_deriv=-0.5 * float(k[lo] + k[order + 1]),
        underflow=under,
        overflow=over,
    )


def log_i_table(max_order: int, xs) -> np.ndarray:
    """``log I_m(x)`` as an array of shape ``(max_order + 1, len(xs))``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs <= 0):
        raise BesselRangeError("arguments must be positive")
    return np.stack([log_i_orders(max_order, float(x)) for x in xs], axis=1)


def log_k_table(max_order: int, xs) -> np.ndarray:
    """``log K_m(x)`` as an array of shape ``(max_order + 1, len(xs))``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs <= 0):
        raise BesselRangeError("arguments must be positive")
    return np.stack([log_k_orders(max_order, float(x)) for x in xs], axis=1)


def log_derivative_ratios(max_order: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``I'_m(x)/I_m(x)`` and ``K'_m(x)/K_m(x)`` for ``m = 0..max_order``.

    Computed from log-value differences, so they stay finite where the
    functions themselves do not.
    """
    li = log_i_orders(max_order + 1, x)
    lk = log_k_orders(max_order + 1, x)
    m = np.arange(max_order + 1)
    lo = np.abs(m - 1)
    ri = 0.5 * (np.exp(li[lo] - li[m]) + np.exp(li[m + 1] - li[m]))
    rk = -0.5 * (np.exp(lk[lo] - lk[m]) + np.exp(lk[m + 1] - lk[m]))
    return ri, rk
