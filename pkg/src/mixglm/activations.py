"""Activation functions with derivatives to order 3 and the third-derivative
Gaussian expectation used to diagnose degenerate components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import QuadratureError

DEGENERACY_THRESHOLD = 1e-8


@dataclass(frozen=True)
class Activation:
    """A scalar nonlinearity applied to the linear response."""

    kind: str

    def __post_init__(self):
        if self.kind not in _RULES:
            raise ValueError(f"unknown activation {self.kind!r}; choose from {sorted(_RULES)}")

    def __call__(self, z):
        return _RULES[self.kind][0](np.asarray(z, dtype=float))

    def derivative(self, z, order: int = 1):
        """k-th derivative, 0 <= k <= 3."""
        if not 0 <= order <= 3:
            raise ValueError(f"derivative order {order} not supported (0..3)")
        return _RULES[self.kind][order](np.asarray(z, dtype=float))


def _logistic(z):
    return expit(z)


def _logistic_d1(z):
    s = _logistic(z)
    return s * (1.0 - s)


def _logistic_d2(z):
    s = _logistic(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _logistic_d3(z):
    s = _logistic(z)
    sp = s * (1.0 - s)
    return sp * (1.0 - 2.0 * s) ** 2 - 2.0 * sp**2


def _tanh_d3(z):
    t = np.tanh(z)
    return 2.0 * (1.0 - t**2) * (3.0 * t**2 - 1.0)


_RULES = {
    "linear": (
        lambda z: z,
        lambda z: np.ones_like(z),
        lambda z: np.zeros_like(z),
        lambda z: np.zeros_like(z),
    ),
    "cubic": (
        lambda z: z**3,
        lambda z: 3.0 * z**2,
        lambda z: 6.0 * z,
        lambda z: np.full_like(z, 6.0),
    ),
    "logistic": (_logistic, _logistic_d1, _logistic_d2, _logistic_d3),
    "tanh": (
        np.tanh,
        lambda z: 1.0 - np.tanh(z) ** 2,
        lambda z: -2.0 * np.tanh(z) * (1.0 - np.tanh(z) ** 2),
        _tanh_d3,
    ),
}

ACTIVATION_NAMES = tuple(sorted(_RULES))


@dataclass(frozen=True)
class RhoEstimate:
    """Gauss-Hermite estimate of E[g'''(z)] with a doubling error bound."""

    value: float
    quadrature_order: int
    abs_error_bound: float

    def __post_init__(self):
        if self.abs_error_bound < 0:
            raise ValueError("error bound must be nonnegative")


def gauss_hermite_expectation(f, mean: float, std: float, order: int) -> float:
    """E[f(z)] for z ~ N(mean, std^2) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    z = mean + np.sqrt(2.0) * std * nodes
    return float(weights @ f(z) / np.sqrt(np.pi))


def rho(g: Activation, norm_u: float, bias: float, *, tol: float = 1e-6,
        max_order: int = 200) -> RhoEstimate:
    """Expected third derivative of ``g`` along a component.

    The argument of ``g`` is taken to be N(bias, norm_u^2), the law of the
    linear response for a component of norm ``norm_u`` under standard
    Gaussian input.
    """
    if norm_u < 0:
        raise ValueError("norm_u must be nonnegative")
    f = lambda z: g.derivative(z, 3)
    order = 20
    val = gauss_hermite_expectation(f, bias, norm_u, order)
    while True:
        next_order = min(2 * order, max_order)
        val_next = gauss_hermite_expectation(f, bias, norm_u, next_order)
        bound = abs(val_next - val)
        if bound <= tol:
            return RhoEstimate(val_next, next_order, bound)
        if next_order >= max_order:
            raise QuadratureError(
                f"rho quadrature did not converge: bound {bound:.3e} > {tol:.0e} "
                f"at order {next_order}"
            )
        order, val = next_order, val_next


def is_degenerate(g: Activation, norm_u: float = 1.0, bias: float = 0.0) -> bool:
    """True when the third-derivative expectation is numerically zero.

    Degenerate activations (linear is the canonical case) carry no signal in
    the response-weighted third moment; callers must switch to the cubed
    response instead.
    """
    return abs(rho(g, norm_u, bias).value) < DEGENERACY_THRESHOLD
