"""Test functions on [0,1]^2 with closed-form Fourier transforms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def power_exp_integral(k: int, c) -> np.ndarray:
    """I_k(c) = int_0^1 x^k exp(c x) dx for complex c (k <= 3)."""
    c = np.asarray(c, dtype=complex)
    out = np.empty(c.shape, dtype=complex)
    small = np.abs(c) < 1.0
    if np.any(small):
        cs = c[small]
        acc = np.zeros(cs.shape, dtype=complex)
        term = np.ones(cs.shape, dtype=complex)
        for n in range(40):
            acc += term / (n + k + 1)
            term = term * cs / (n + 1)
        out[small] = acc
    big = ~small
    if np.any(big):
        cb = c[big]
        ec = np.exp(cb)
        val = (ec - 1) / cb
        for q in range(1, k + 1):
            val = (ec - q * val) / cb
        out[big] = val
    return out


@dataclass(frozen=True)
class Factor:
    """A function of one variable on [0,1] with its Fourier transform."""

    value: Callable
    fourier: Callable
    name: str = ""
    smooth: Callable | None = None  # analytic extension beyond [0,1]


@dataclass(frozen=True)
class SeparableFunction:
    fx: Factor
    fy: Factor
    name: str = ""

    def __call__(self, x, y):
        return self.fx.value(np.asarray(x)) * self.fy.value(np.asarray(y))

    def fourier(self, w1, w2):
        return self.fx.fourier(np.asarray(w1, float)) * self.fy.fourier(np.asarray(w2, float))


def _cos2_hat(w):
    c = -2j * np.pi * w
    return 0.5 * power_exp_integral(0, c) + 0.25 * power_exp_integral(0, c + 2j) + 0.25 * power_exp_integral(0, c - 2j)


def _on_unit(g):
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), g(x), 0.0)
    return f


def _factor(g, ghat, name):
    return Factor(_on_unit(g), ghat, name, g)


COS2 = _factor(lambda x: np.cos(x) ** 2, _cos2_hat, "cos^2(x)")
EXPNEG = _factor(lambda y: np.exp(-y), lambda w: power_exp_integral(0, -2j * np.pi * w - 1), "exp(-y)")
ONE_PLUS_SQ = _factor(lambda x: 1 + x * x,
                      lambda w: power_exp_integral(0, -2j * np.pi * w) + power_exp_integral(2, -2j * np.pi * w),
                      "1+x^2")
LINEAR = _factor(lambda y: 2 * y - 1,
                 lambda w: 2 * power_exp_integral(1, -2j * np.pi * w) - power_exp_integral(0, -2j * np.pi * w),
                 "2y-1")

F1 = SeparableFunction(COS2, EXPNEG, "f1")
F2 = SeparableFunction(ONE_PLUS_SQ, LINEAR, "f2")

FUNCTIONS = {"f1": F1, "f2": F2}


def factor_norm_sq(fac: Factor) -> float:
    from scipy.integrate import quad
    g = fac.smooth or fac.value
    val, _ = quad(lambda x: float(g(np.array(x))) ** 2, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val

