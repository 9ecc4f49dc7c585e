"""Smooth scalar fields with analytic first and second partial derivatives.

Metric components, potentials and the feedback-shaping one-form are all built
from these.  Keeping value/d1/d2 analytic (composed by an exact chain rule)
is what lets the residual suites hit 1e-8 tolerances; a finite-difference
constructor exists as a fallback for fields supplied without derivatives.
"""

from __future__ import annotations

import math
from numbers import Real
from typing import Callable, Sequence

import numpy as np

from .jets import Jet2, as_jet, fd_value_grad_hess

__all__ = [
    "SmoothField",
    "constant",
    "coordinate",
    "linear",
    "from_callable",
    "sin_of",
    "cos_of",
    "sqrt_of",
    "field_eval",
]


class SmoothField:
    """Scalar field u -> R of a fixed arity with callables for value, d1, d2."""

    __slots__ = ("arity", "value", "d1", "d2")

    def __init__(self, arity: int,
                 value: Callable[[np.ndarray], float],
                 d1: Callable[[np.ndarray], np.ndarray],
                 d2: Callable[[np.ndarray], np.ndarray]):
        self.arity = arity
        self.value = value
        self.d1 = d1
        self.d2 = d2

    def __call__(self, u) -> float:
        return self.value(np.asarray(u, dtype=float))

    # -- evaluation through jets (chain rule, exact given d1/d2) -------------

    def eval_jet(self, jets: Sequence[Jet2]) -> Jet2:
        u = np.array([j.f for j in jets])
        g1 = self.d1(u)
        g2 = self.d2(u)
        m = jets[0].m
        grad = np.zeros(m)
        hess = np.zeros((m, m))
        for i in range(self.arity):
            if g1[i] != 0.0:
                grad += g1[i] * jets[i].g
                hess += g1[i] * jets[i].h
        for i in range(self.arity):
            for j in range(self.arity):
                if g2[i, j] != 0.0:
                    hess += g2[i, j] * np.outer(jets[i].g, jets[j].g)
        return Jet2(self.value(u), grad, hess)

    # -- algebra --------------------------------------------------------------

    def _binary(self, other, vf, d1f, d2f):
        if isinstance(other, Real):
            other = constant(float(other), self.arity)
        if not isinstance(other, SmoothField):
            return NotImplemented
        if other.arity != self.arity:
            raise ValueError("field arity mismatch")
        a, b = self, other
        return SmoothField(
            self.arity,
            lambda u: vf(a, b, u),
            lambda u: d1f(a, b, u),
            lambda u: d2f(a, b, u),
        )

    def __add__(self, other):
        return self._binary(other,
                            lambda a, b, u: a.value(u) + b.value(u),
                            lambda a, b, u: a.d1(u) + b.d1(u),
                            lambda a, b, u: a.d2(u) + b.d2(u))

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other,
                            lambda a, b, u: a.value(u) - b.value(u),
                            lambda a, b, u: a.d1(u) - b.d1(u),
                            lambda a, b, u: a.d2(u) - b.d2(u))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return SmoothField(self.arity,
                           lambda u: -self.value(u),
                           lambda u: -self.d1(u),
                           lambda u: -self.d2(u))

    def __mul__(self, other):
        def d2(a, b, u):
            cross = np.outer(a.d1(u), b.d1(u))
            return a.value(u) * b.d2(u) + b.value(u) * a.d2(u) + cross + cross.T
        return self._binary(other,
                            lambda a, b, u: a.value(u) * b.value(u),
                            lambda a, b, u: a.value(u) * b.d1(u) + b.value(u) * a.d1(u),
                            d2)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return self * (1.0 / float(other))

        def d1(a, b, u):
            vb = b.value(u)
            return (a.d1(u) - (a.value(u) / vb) * b.d1(u)) / vb

        def d2(a, b, u):
            vb = b.value(u)
            q = a.value(u) / vb
            gq = (a.d1(u) - q * b.d1(u)) / vb
            cross = np.outer(gq, b.d1(u))
            return (a.d2(u) - q * b.d2(u) - cross - cross.T) / vb

        return self._binary(other, lambda a, b, u: a.value(u) / b.value(u), d1, d2)

    def compose(self, f, df, d2f) -> "SmoothField":
        """Apply a smooth scalar function f with supplied derivatives."""
        a = self

        def d2(u):
            g = a.d1(u)
            return df(a.value(u)) * a.d2(u) + d2f(a.value(u)) * np.outer(g, g)

        return SmoothField(self.arity,
                           lambda u: f(a.value(u)),
                           lambda u: df(a.value(u)) * a.d1(u),
                           d2)

    def partial(self, i: int) -> "SmoothField":
        """The i-th first-partial as a field.

        Value and gradient are exact (they read this field's d1/d2); the
        second derivative falls back to central differences of d2, which is
        acceptable because no residual consumes third derivatives.
        """
        a = self
        h = float(np.cbrt(np.finfo(float).eps))

        def d2(u):
            u = np.asarray(u, dtype=float)
            out = np.zeros((a.arity, a.arity))
            for k in range(a.arity):
                step = h * max(1.0, abs(u[k]))
                up, um = u.copy(), u.copy()
                up[k] += step
                um[k] -= step
                out[k, :] = (a.d2(up)[i] - a.d2(um)[i]) / (2 * step)
            return 0.5 * (out + out.T)

        return SmoothField(self.arity,
                           lambda u: a.d1(u)[i],
                           lambda u: a.d2(u)[i],
                           d2)


def constant(c: float, arity: int) -> SmoothField:
    c = float(c)
    return SmoothField(arity,
                       lambda u: c,
                       lambda u: np.zeros(arity),
                       lambda u: np.zeros((arity, arity)))


def coordinate(i: int, arity: int) -> SmoothField:
    g = np.zeros(arity)
    g[i] = 1.0
    return SmoothField(arity,
                       lambda u: float(u[i]),
                       lambda u: g.copy(),
                       lambda u: np.zeros((arity, arity)))


def linear(coeffs: Sequence[float], const: float, arity: int) -> SmoothField:
    c = np.asarray(coeffs, dtype=float)
    b = float(const)
    return SmoothField(arity,
                       lambda u: float(c @ u) + b,
                       lambda u: c.copy(),
                       lambda u: np.zeros((arity, arity)))


def from_callable(fn: Callable[[np.ndarray], float], arity: int) -> SmoothField:
    """Wrap a bare function; derivatives by central differences."""

    def d1(u):
        _, g, _ = fd_value_grad_hess(lambda v: np.array([fn(v)]), u)
        return g[0]

    def d2(u):
        _, _, h = fd_value_grad_hess(lambda v: np.array([fn(v)]), u)
        return h[0]

    return SmoothField(arity, lambda u: float(fn(np.asarray(u, dtype=float))), d1, d2)


def sin_of(field: SmoothField) -> SmoothField:
    return field.compose(math.sin, math.cos, lambda v: -math.sin(v))


def cos_of(field: SmoothField) -> SmoothField:
    return field.compose(math.cos, lambda v: -math.sin(v), lambda v: -math.cos(v))


def sqrt_of(field: SmoothField) -> SmoothField:
    return field.compose(math.sqrt,
                         lambda v: 0.5 / math.sqrt(v),
                         lambda v: -0.25 / (v * math.sqrt(v)))


def field_eval(field: SmoothField, coords):
    """Evaluate on mixed float/jet coordinates; plain float when no jets."""
    if any(isinstance(c, Jet2) for c in coords):
        m = next(c.m for c in coords if isinstance(c, Jet2))
        return field.eval_jet([as_jet(c, m) for c in coords])
    return field.value(np.asarray(coords, dtype=float))
