"""Smooth scalar test functions with closed-form derivatives.

These are the functions all dual pairings are computed against.  Three
C-infinity families, each with exact derivatives of every order used here
(no finite differences on the evaluation path):

  gauss_hermite(k, s): He_k(x/s) exp(-x^2 / (2 s^2)), probabilists' Hermite.
      d^n/dx^n = (-1)^n s^{-n} He_{k+n}(x/s) exp(-x^2/(2 s^2)).
  bump(c, r): exp(1 - 1/(1 - u^2)) on |u| < 1 with u = (x-c)/r, else 0.
  poly_decay(p, alpha): x^p / (1 + x^2)^alpha; derivatives stay rational
      with numerator P'(x)(1+x^2) - 2 alpha x P(x) and alpha -> alpha + 1.

poly_decay(0, 0) is the constant function 1, used for total-mass pairings.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite_e import HermiteE

__all__ = ["TestFunction", "gauss_hermite", "bump", "poly_decay", "constant_one", "default_bank"]


class TestFunction:
    """A scalar C-infinity function on R with analytic derivatives."""

    def __init__(self, name, family, params, deriv_fns, decay_order):
        self.name = name
        self.family = family
        self.params = params
        self._deriv = deriv_fns  # callable(x, order) -> array
        self.decay_order = decay_order  # alpha with |phi| <= C (1 + |x|^alpha)

    def __repr__(self):
        return f"TestFunction({self.name})"

    def _flat(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ValueError("test functions are one-dimensional")
            x = x[:, 0]
        return x

    def value(self, x):
        return self._deriv(self._flat(x), 0)

    def grad(self, x):
        return self._deriv(self._flat(x), 1)

    def hess_trace(self, x):
        return self._deriv(self._flat(x), 2)

    def deriv(self, x, order: int):
        return self._deriv(self._flat(x), order)


def gauss_hermite(k: int, s: float, name=None) -> TestFunction:
    if k < 0 or s <= 0:
        raise ValueError("need k >= 0 and s > 0")

    hermites = {}

    def dn(x, order):
        u = x / s
        if order not in hermites:
            hermites[order] = HermiteE.basis(k + order)
        he = hermites[order](u)
        return ((-1.0) ** order) * s ** (-order) * he * np.exp(-0.5 * u * u)

    return TestFunction(name or f"gh{k}_s{s:g}", "gauss_hermite", {"k": k, "s": s}, dn, 0)


def bump(c: float, r: float, name=None) -> TestFunction:
    if r <= 0:
        raise ValueError("need r > 0")

    def dn(x, order):
        u = (x - c) / r
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        one = 1.0 - ui * ui
        phi = np.exp(1.0 - 1.0 / one)
        if order == 0:
            out[inside] = phi
            return out
        g = -2.0 * ui / one**2
        if order == 1:
            out[inside] = phi * g / r
            return out
        gp = -2.0 * (1.0 + 3.0 * ui * ui) / one**3
        if order == 2:
            out[inside] = phi * (g * g + gp) / r**2
            return out
        gpp = -24.0 * ui * (1.0 + ui * ui) / one**4
        if order == 3:
            out[inside] = phi * (g**3 + 3.0 * g * gp + gpp) / r**3
            return out
        raise NotImplementedError("bump derivatives implemented up to order 3")

    return TestFunction(name or f"bump_c{c:g}_r{r:g}", "bump", {"c": c, "r": r}, dn, 0)


def poly_decay(p: int, alpha: int, name=None) -> TestFunction:
    if p < 0 or alpha < 0:
        raise ValueError("need p >= 0 and alpha >= 0")

    base = Polynomial([0.0] * p + [1.0]) if p > 0 else Polynomial([1.0])
    shift = Polynomial([1.0, 0.0, 1.0])  # 1 + x^2
    cache = {0: (base, alpha)}

    def rep(order):
        if order not in cache:
            pnum, a = rep(order - 1)
            cache[order] = (pnum.deriv() * shift - (2.0 * a) * Polynomial([0.0, 1.0]) * pnum,
                            a + 1)
        return cache[order]

    def dn(x, order):
        pnum, a = rep(order)
        return pnum(x) / (1.0 + x * x) ** a

    decay = max(0, p - 2 * alpha)
    return TestFunction(name or f"pd{p}_a{alpha}", "poly_decay", {"p": p, "alpha": alpha}, dn,
                        decay)


def constant_one() -> TestFunction:
    return poly_decay(0, 0, name="one")


def default_bank():
    """The fixed 8-function bank: even/odd symmetry at two decay scales."""
    return [
        gauss_hermite(0, 2.0, name="gh0_wide"),
        gauss_hermite(1, 1.0, name="gh1"),
        gauss_hermite(2, 1.5, name="gh2_wide"),
        gauss_hermite(3, 1.0, name="gh3"),
        bump(0.0, 2.0, name="bump0"),
        bump(1.5, 1.5, name="bump_off"),
        poly_decay(0, 1, name="pd_even"),
        poly_decay(1, 2, name="pd_odd"),
    ]
