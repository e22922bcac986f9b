"""Concentration of squared distances and the probabilistic error bounds.

For i.i.d. coordinates ``|x - y|^2`` concentrates around ``E_d^2`` with
per-coordinate variance ``sigma_d^2``. Bernstein's inequality turns that into
a probability that a pair lands in ``[E_d^2 - delta^2, E_d^2 + delta^2]``;
inside that window the profile only needs to be approximated on an interval
of half-width ``delta^2``, which enlarges the admissible Bernstein ellipse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cheb1d import bound_finite_smooth
from .errors import (
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
    InvalidEllipseError,
    OrderTooLowError,
    RegimeError,
)


@dataclass(frozen=True)
class ConcentrationParams:
    D: float
    E_d: float
    sigma_d_sq: float
    d: int

    def __post_init__(self):
        if self.sigma_d_sq < 0:
            raise DomainError(f"sigma_d_sq must be >= 0, got {self.sigma_d_sq}")
        if self.E_d**2 > self.D**2 * (1 + 1e-12):
            raise DomainError(f"E_d^2 = {self.E_d**2} exceeds D^2 = {self.D**2}")


class Probability(NamedTuple):
    value: float
    vacuous: bool


def _paired(X, Y):
    X = np.asarray(getattr(X, "points", X), dtype=float)
    Y = np.asarray(getattr(Y, "points", Y), dtype=float)
    if X.shape != Y.shape or X.ndim != 2:
        raise DimensionMismatchError(f"paired samples need equal N x d shapes, got {X.shape} and {Y.shape}")
    return X, Y


def params_from_samples(X, Y, D: float) -> ConcentrationParams:
    """Unbiased moment estimates of ``E_d^2`` and ``sigma_d^2`` from paired rows."""
    X, Y = _paired(X, Y)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 pairs, got {X.shape[0]}")
    g = (X - Y) ** 2
    E2 = float(g.mean(axis=0).sum())
    s2 = float(g.var(axis=0, ddof=1).sum())
    return ConcentrationParams(D=D, E_d=math.sqrt(E2), sigma_d_sq=s2, d=X.shape[1])


def uniform_params(d: int, width: float, D: float) -> ConcentrationParams:
    """Exact moments for coordinates i.i.d. uniform on an interval of length `width`.

    The gap of two such coordinates has ``E[g^2] = w^2/6`` and
    ``Var[g^2] = w^4 (1/15 - 1/36) = 7 w^4 / 180``.
    """
    return ConcentrationParams(D=D, E_d=math.sqrt(d * width**2 / 6), sigma_d_sq=d * 7 * width**4 / 180, d=d)


def bernstein_probability(delta: float, params: ConcentrationParams) -> Probability:
    """``1 - 2 exp(-delta^4 d / (2 sigma_d^2 d + 8 D^2 delta^2 / 3))``, not clamped."""
    if not 0 < delta < params.D:
        raise DomainError(f"delta must lie in (0, D={params.D}), got {delta}")
    d = params.d
    expo = delta**4 * d / (2 * params.sigma_d_sq * d + 8 * params.D**2 * delta**2 / 3)
    p = 1.0 - 2.0 * math.exp(-expo)
    return Probability(p, p <= 0)


def rho_delta(rho_tilde_sq: float, D: float, delta: float) -> float:
    """Root ``t > 1`` of ``t - 1/t = (D/delta)^2 (r - 1/r)`` with ``r = rho_tilde_sq``."""
    if not rho_tilde_sq > 1:
        raise InvalidEllipseError(f"rho_tilde_sq must exceed 1, got {rho_tilde_sq}")
    if not 0 < delta <= D:
        raise DomainError(f"delta must lie in (0, D={D}], got {delta}")
    if delta == D:
        return float(rho_tilde_sq)
    c = (D / delta) ** 2 * (rho_tilde_sq - 1 / rho_tilde_sq)
    # c/2 + sqrt(c^2/4 + 1), written to avoid overflow for huge c.
    h = c / 2
    return h + math.hypot(h, 1.0)


def prob_bound_analytic(C_D: float, D: float, delta: float, rho_tilde_sq: float, n: int) -> float:
    """``2 C delta^2 / (c - delta^2) * (c / delta^2)^-n`` with ``c = D^2 (r - 1/r)``."""
    if not rho_tilde_sq > 1:
        raise InvalidEllipseError(f"rho_tilde_sq must exceed 1, got {rho_tilde_sq}")
    if n < 0:
        raise OrderTooLowError(f"n must be >= 0, got {n}")
    c = D**2 * (rho_tilde_sq - 1 / rho_tilde_sq)
    d2 = delta**2
    if not c > d2:
        raise RegimeError(f"delta^2 = {d2} is not below D^2 (r - 1/r) = {c}; delta too large for this ellipse")
    return 2 * C_D * d2 / (c - d2) * (c / d2) ** (-n)


def prob_bound_finite(V_q: float, delta: float, q: int, n: int) -> float:
    """Finite-smoothness bound with the diameter replaced by `delta`."""
    return bound_finite_smooth(V_q, delta, q, n)


def empirical_concentration(X, Y, delta: float, params: ConcentrationParams) -> float:
    """Fraction of pairs with ``| |x - y|^2 - E_d^2 | <= delta^2``."""
    X, Y = _paired(X, Y)
    if X.shape[0] == 0:
        return 1.0
    z = np.einsum("ij,ij->i", X - Y, X - Y)
    return float(np.mean(np.abs(z - params.E_d**2) <= delta**2))


def binomial_slack(p: float, n: int, sigmas: float = 3.0) -> float:
    """``sigmas`` binomial standard errors of a fraction estimated from `n` draws."""
    p = min(max(p, 0.0), 1.0)
    return sigmas * math.sqrt(p * (1 - p) / n)
