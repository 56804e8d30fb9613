"""Differential-transform algebra on truncated power-series coefficient arrays.

A :class:`Series` holds ``X(0..K)``, the scaled Taylor coefficients of one
variable at a window anchor, so that ``x(t) ~= sum_k X(k) t**k``.  The scalar
operations here are the reference forms; the window builder in
:mod:`dtmsim.sas_engine` uses the ``*_at`` array kernels below, which apply
the same rules column-wise to ``(K+1, n)`` stacks of coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Series",
    "TrigPair",
    "const_series",
    "conv",
    "axpy",
    "trig_extend",
    "trig_series",
    "idt_eval",
    "conv_at",
    "horner",
]


@dataclass(frozen=True)
class Series:
    """Coefficients ``X(0..K)`` of one variable's truncated power series."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("Series needs a non-empty 1-D coefficient array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __len__(self) -> int:
        return self.coeffs.size

    def __getitem__(self, k):
        return self.coeffs[k]

    def __call__(self, t: float) -> float:
        return idt_eval(self, t)


@dataclass(frozen=True)
class TrigPair:
    """Series of ``sin(delta)`` and ``cos(delta)`` sharing one order."""

    sin_series: Series
    cos_series: Series

    def __post_init__(self) -> None:
        if self.sin_series.order != self.cos_series.order:
            raise ValueError("sin and cos series must share the same order")

    @property
    def order(self) -> int:
        return self.sin_series.order


def const_series(c: float, K: int) -> Series:
    """DT image of a constant: ``c`` at k=0, zero above."""
    if K < 0:
        raise ValueError(f"order must be non-negative, got {K}")
    coeffs = np.zeros(K + 1)
    coeffs[0] = c
    return Series(coeffs)


def conv(X: Series, Y: Series, k: int) -> float:
    """Coefficient ``k`` of the product series, ``sum_m X(m) Y(k-m)``.

    Mirrored terms are added in pairs first, so swapping ``X`` and ``Y``
    gives a bit-identical result.
    """
    if k < 0 or k > min(X.order, Y.order):
        raise IndexError(f"k={k} outside 0..{min(X.order, Y.order)}")
    x = X.coeffs
    y = Y.coeffs
    total = 0.0
    for m in range((k + 1) // 2):
        total += x[m] * y[k - m] + x[k - m] * y[m]
    if k % 2 == 0:
        total += x[k // 2] * y[k // 2]
    return float(total)


def axpy(a: float, X: Series, b: float, Y: Series) -> Series:
    """Element-wise ``a X(k) + b Y(k)``."""
    if X.order != Y.order:
        raise ValueError(f"order mismatch: {X.order} vs {Y.order}")
    return Series(a * X.coeffs + b * Y.coeffs)


def trig_extend(delta: Series, partial: TrigPair, k: int) -> tuple[float, float]:
    """Order-``k`` coefficients of ``sin(delta)`` and ``cos(delta)``.

    Uses ``s' = c delta'`` and ``c' = -s delta'`` in transformed form::

        S(k) =  1/k sum_{m<k} C(m) (k-m) Delta(k-m)
        C(k) = -1/k sum_{m<k} S(m) (k-m) Delta(k-m)

    ``partial`` must hold at least ``S(0..k-1)`` and ``C(0..k-1)``; the seeds
    ``S(0)``, ``C(0)`` come from ``sin``/``cos`` of ``Delta(0)`` directly.
    """
    if k < 1:
        raise ValueError("trig_extend starts at k=1; seed k=0 from sin/cos of Delta(0)")
    if delta.order < k or partial.order < k - 1:
        raise IndexError(f"not enough coefficients to extend to k={k}")
    d = delta.coeffs
    s = partial.sin_series.coeffs
    c = partial.cos_series.coeffs
    s_acc = 0.0
    c_acc = 0.0
    for m in range(k):
        w = (k - m) * d[k - m]
        s_acc += c[m] * w
        c_acc += s[m] * w
    return s_acc / k, -c_acc / k


def trig_series(delta: Series) -> TrigPair:
    """Full :class:`TrigPair` for ``delta`` up to its own order."""
    K = delta.order
    s = np.zeros(K + 1)
    c = np.zeros(K + 1)
    s[0] = np.sin(delta.coeffs[0])
    c[0] = np.cos(delta.coeffs[0])
    for k in range(1, K + 1):
        # partial views only expose 0..k-1; trailing zeros are never read
        s[k], c[k] = trig_extend(delta, TrigPair(Series(s[:k]), Series(c[:k])), k)
    return TrigPair(Series(s), Series(c))


def idt_eval(X: Series, t: float) -> float:
    """Truncated inverse transform ``sum_k X(k) t**k`` in Horner form."""
    c = X.coeffs
    acc = c[-1]
    for k in range(c.size - 2, -1, -1):
        acc = acc * t + c[k]
    return float(acc)


# -- column-wise kernels --------------------------------------------------------

def conv_at(X: np.ndarray, Y: np.ndarray, k: int, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Partial convolution ``sum_{m=lo}^{hi-1} X[m] * Y[k-m]`` along axis 0.

    Summation is strictly left to right in ``m`` (via ``add.accumulate``), so
    the result of any column does not depend on how many columns are passed.
    """
    if hi is None:
        hi = k + 1
    if hi <= lo:
        return np.zeros(X.shape[1:])
    m = np.arange(lo, hi)
    terms = X[m] * Y[k - m]
    return np.add.accumulate(terms, axis=0)[-1]


def horner(coeffs: np.ndarray, t) -> np.ndarray:
    """Evaluate stacked series ``coeffs[k, ...]`` at one or many offsets.

    With scalar ``t`` the result has shape ``coeffs.shape[1:]``; with a 1-D
    array of offsets it gains a leading time axis.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim:
        t = t.reshape(t.shape + (1,) * (coeffs.ndim - 1))
    acc = np.broadcast_to(coeffs[-1], np.broadcast_shapes(t.shape, coeffs.shape[1:])).copy()
    for k in range(coeffs.shape[0] - 2, -1, -1):
        acc *= t
        acc += coeffs[k]
    return acc
