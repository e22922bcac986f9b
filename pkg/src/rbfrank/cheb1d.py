"""One-dimensional Chebyshev approximation of a radial profile and its error bounds.

The profile ``f`` is sampled on ``[0, D^2]`` (the range of squared distances),
mapped affinely onto ``[-1, 1]``. Interpolation uses the second-kind points
``cos(pi j / n)`` and recovers coefficients with a type-I cosine transform.
All routines accept an explicit ``dtype`` so that bound checks that sit below
double-precision round-off can be run in ``numpy.longdouble``.

Bernstein ellipses are parametrised by ``rho_sq``, the sum of the semi-axes of
the ellipse on ``[-1, 1]``; with that convention the geometric error bound
reads ``2 C rho_sq**-n / (rho_sq - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    ConditioningError,
    DomainError,
    EvaluationError,
    InvalidEllipseError,
    OrderTooLowError,
    SingularityError,
)

MONOMIAL_CAP = 30


@dataclass(frozen=True)
class Analytic:
    """Analytic continuation to the ellipse `rho_sq` with ``|f| <= C`` inside."""

    rho_sq: float
    C: float

    def __post_init__(self):
        if not self.rho_sq > 1.0:
            raise InvalidEllipseError(f"rho_sq must exceed 1, got {self.rho_sq}")
        if not self.C > 0.0:
            raise InvalidEllipseError(f"C must be positive, got {self.C}")


@dataclass(frozen=True)
class FiniteSmooth:
    """`q`-th derivative of bounded variation `V_q` on the profile interval."""

    q: int
    V_q: float

    def __post_init__(self):
        if self.q < 1:
            raise OrderTooLowError(f"smoothness order q must be >= 1, got {self.q}")
        if self.V_q < 0:
            raise DomainError(f"V_q must be non-negative, got {self.V_q}")


Smoothness = Union[Analytic, FiniteSmooth]


@dataclass(frozen=True)
class RadialProfile:
    """Scalar profile ``f`` of a kernel ``K(x, y) = f(|x - y|^2)``.

    ``f`` must accept numpy arrays (real or complex) and be safe to call from
    several threads. When `smoothness` is ``None`` the analytic constants are
    estimated numerically on demand (see :func:`auto_analytic`).
    """

    f: Callable
    D: float
    smoothness: Optional[Smoothness] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.D > 0:
            raise DomainError(f"diameter D must be positive, got {self.D}")

    @property
    def interval(self) -> tuple[float, float]:
        return (0.0, float(self.D) ** 2)

    def __call__(self, u):
        return self.f(u)


def gaussian(h: float = 1.0, D: float = 1.0, smoothness: Optional[Smoothness] = None) -> RadialProfile:
    h2 = float(h) ** 2
    return RadialProfile(lambda u: np.exp(-u / h2), D, smoothness, "gaussian", {"h": float(h)})


def cauchy(h: float = 1.0, D: float = 1.0, smoothness: Optional[Smoothness] = None) -> RadialProfile:
    h2 = float(h) ** 2
    return RadialProfile(lambda u: 1.0 / (1.0 + u / h2), D, smoothness, "cauchy", {"h": float(h)})


BUILTIN_PROFILES = {"gaussian": gaussian, "cauchy": cauchy}


def builtin_profile(name: str, h: float = 1.0, D: float = 1.0,
                    smoothness: Optional[Smoothness] = None) -> RadialProfile:
    try:
        factory = BUILTIN_PROFILES[name]
    except KeyError:
        raise DomainError(f"unknown profile {name!r}; choose from {sorted(BUILTIN_PROFILES)}") from None
    return factory(h=h, D=D, smoothness=smoothness)


@dataclass(frozen=True)
class ChebApprox:
    """Truncated Chebyshev series ``sum_k a_k T_k(t)`` with ``t`` the image of ``u``."""

    coeffs: np.ndarray
    lo: float
    hi: float

    @property
    def n(self) -> int:
        return len(self.coeffs) - 1

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def __call__(self, u):
        return eval_cheb(self, u)


def _pi(dtype) -> np.floating:
    return np.arctan(np.asarray(1, dtype=dtype)) * 4


def chebyshev_nodes(n: int, lo: float, hi: float, dtype=np.float64) -> np.ndarray:
    """Second-kind Chebyshev points mapped to ``[lo, hi]``, ordered from `hi` down."""
    if n == 0:
        return np.asarray([(lo + hi) / 2], dtype=dtype)
    t = np.cos(_pi(dtype) * np.arange(n + 1, dtype=dtype) / n)
    lo_, hi_ = np.asarray(lo, dtype=dtype), np.asarray(hi, dtype=dtype)
    return lo_ + (hi_ - lo_) * (t + 1) / 2


def chebfit_function(f: Callable, lo: float, hi: float, n: int, dtype=np.float64) -> ChebApprox:
    """Degree-`n` Chebyshev interpolant of `f` on ``[lo, hi]``."""
    if n < 0:
        raise OrderTooLowError(f"degree must be >= 0, got {n}")
    if not hi > lo:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    nodes = chebyshev_nodes(n, lo, hi, dtype)
    values = np.asarray(f(nodes))
    if values.shape != nodes.shape:
        values = np.broadcast_to(values, nodes.shape)
    values = values.astype(dtype)
    if not np.all(np.isfinite(values)):
        bad = nodes[~np.isfinite(values)][0]
        raise EvaluationError(f"profile is not finite at node u={float(bad)!r}")
    if n == 0:
        return ChebApprox(values.copy(), float(lo), float(hi))
    # Type-I cosine transform; the integer product jk is reduced mod 2n first so
    # the angle is exact before the cosine.
    jk = np.outer(np.arange(n + 1), np.arange(n + 1)) % (2 * n)
    cosines = np.cos(_pi(dtype) * jk.astype(dtype) / n)
    w = np.ones(n + 1, dtype=dtype)
    w[0] = w[-1] = 0.5
    coeffs = (2 / np.asarray(n, dtype=dtype)) * (cosines @ (w * values))
    coeffs[0] /= 2
    coeffs[-1] /= 2
    return ChebApprox(coeffs, float(lo), float(hi))


def cheb_fit(profile: RadialProfile, n: int, dtype=np.float64) -> ChebApprox:
    """Interpolate `profile` on ``[0, D^2]`` at ``n + 1`` Chebyshev points.

    The interpolant differs from the Chebyshev truncation by aliasing, which is
    at most the truncation tail again; bound checks absorb it with a factor 2.
    """
    lo, hi = profile.interval
    return chebfit_function(profile.f, lo, hi, n, dtype)


def _to_reference(approx: ChebApprox, u, rel_tol: float = 1e-12):
    dtype = approx.coeffs.dtype
    u = np.asarray(u, dtype=dtype)
    width = approx.hi - approx.lo
    slack = rel_tol * max(width, abs(approx.lo), abs(approx.hi), 1.0)
    if np.any(u < approx.lo - slack) or np.any(u > approx.hi + slack):
        raise DomainError(f"evaluation point outside [{approx.lo}, {approx.hi}]")
    lo, hi = np.asarray(approx.lo, dtype=dtype), np.asarray(approx.hi, dtype=dtype)
    t = (2 * u - lo - hi) / (hi - lo)
    return np.clip(t, -1, 1)


def eval_cheb(approx: ChebApprox, u):
    """Evaluate the series at `u` (scalar or array) with the Clenshaw recurrence."""
    t = _to_reference(approx, u)
    a = approx.coeffs
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(len(a) - 1, 0, -1):
        b1, b2 = a[k] + 2 * t * b1 - b2, b1
    out = a[0] + t * b1 - b2
    return out[()] if out.ndim == 0 else out


def monomialize(approx: ChebApprox, cap: int = MONOMIAL_CAP) -> np.ndarray:
    """Power-basis coefficients ``b`` with ``sum_k b_k u^k`` equal to the series.

    Conversion conditioning grows roughly like ``3**n``; degrees above `cap`
    are refused.
    """
    n = approx.n
    if n > cap:
        raise ConditioningError(
            f"monomial conversion of degree {n} exceeds the cap {cap}; use the "
            "Fourier-Taylor factorization, which needs no monomial form, or lower n"
        )
    dtype = approx.coeffs.dtype
    # Power coefficients of T_k in t; exact integers for k <= 30.
    T = [[1], [0, 1]]
    for k in range(2, n + 1):
        prev, prev2 = T[k - 1], T[k - 2]
        nxt = [0] + [2 * c for c in prev]
        for i, c in enumerate(prev2):
            nxt[i] -= c
        T.append(nxt)
    in_t = np.zeros(n + 1, dtype=dtype)
    for k in range(n + 1):
        for i, c in enumerate(T[k]):
            if c:
                in_t[i] += approx.coeffs[k] * c
    # Substitute t = scale * u + shift and collect powers of u.
    lo, hi = np.asarray(approx.lo, dtype=dtype), np.asarray(approx.hi, dtype=dtype)
    scale = 2 / (hi - lo)
    shift = -(hi + lo) / (hi - lo)
    out = np.zeros(n + 1, dtype=dtype)
    for m in range(n + 1):
        if in_t[m] == 0:
            continue
        for i in range(m + 1):
            out[i] += in_t[m] * math.comb(m, i) * scale**i * shift ** (m - i)
    return out


def eval_power(b: np.ndarray, u):
    """Horner evaluation of ``sum_k b_k u^k``."""
    u = np.asarray(u, dtype=b.dtype)
    out = np.zeros_like(u)
    for c in b[::-1]:
        out = out * u + c
    return out


def bound_analytic(rho_sq: float, C: float, n: int) -> float:
    """Geometric Chebyshev error bound ``2 C rho_sq**-n / (rho_sq - 1)``."""
    if not rho_sq > 1:
        raise InvalidEllipseError(f"rho_sq must exceed 1, got {rho_sq}")
    if n < 0:
        raise OrderTooLowError(f"n must be >= 0, got {n}")
    return 2.0 * C * rho_sq ** (-n) / (rho_sq - 1.0)


def bound_finite_smooth(V_q: float, D: float, q: int, n: int) -> float:
    """Algebraic error bound ``2 V_q D^(2q) / (pi q [2(n-q)]^q)`` for ``n > q``."""
    if n <= q:
        raise OrderTooLowError(f"need n > q, got n={n}, q={q}")
    return 2.0 * V_q * D ** (2 * q) / (math.pi * q * (2.0 * (n - q)) ** q)


def bound_for(smoothness: Smoothness, D: float, n: int) -> float:
    if isinstance(smoothness, Analytic):
        return bound_analytic(smoothness.rho_sq, smoothness.C, n)
    return bound_finite_smooth(smoothness.V_q, D, smoothness.q, n)


def ellipse_points(rho_sq: float, samples: int, lo: float = -1.0, hi: float = 1.0):
    """Boundary of the ellipse `rho_sq` mapped to ``[lo, hi]``, with ``dz/dtheta``."""
    theta = 2 * np.pi * np.arange(samples) / samples
    e = np.exp(1j * theta)
    z = (rho_sq * e + e.conj() / rho_sq) / 2
    dz = 1j * (rho_sq * e - e.conj() / rho_sq) / 2
    half = (hi - lo) / 2
    return lo + half * (z + 1), half * dz


def _cauchy_residual(f: Callable, lo: float, hi: float, rho_sq: float, samples: int) -> tuple[float, float]:
    """Mismatch between the Cauchy integral at the centre and ``f(centre)``."""
    center = (lo + hi) / 2
    u, du = ellipse_points(rho_sq, samples, lo, hi)
    integrand = np.asarray(f(u)) * du / (u - center)
    value = integrand.mean() / 1j
    scale = float(np.max(np.abs(integrand)))
    return abs(value - complex(f(np.asarray(center)))), scale


def estimate_ellipse_bound(f: Callable, interval: tuple[float, float], rho_sq: float,
                           samples: int = 256, check_analytic: bool = True) -> float:
    """Estimate ``sup |f|`` over the transformed Bernstein ellipse `rho_sq`.

    Samples the boundary (which by the maximum principle carries the sup when
    `f` is analytic inside). The value is an estimate, not a certificate.
    With `check_analytic`, the Cauchy integral of ``f(z) / (z - c)`` around the
    boundary is compared with ``f(c)`` at the interval centre ``c``; a pole
    inside the ellipse breaks that identity and raises
    :class:`SingularityError`.
    """
    if not rho_sq > 1:
        raise InvalidEllipseError(f"rho_sq must exceed 1, got {rho_sq}")
    lo, hi = interval
    u, _ = ellipse_points(rho_sq, samples, lo, hi)
    with np.errstate(all="ignore"):
        values = np.asarray(f(u))
    if not np.all(np.isfinite(values)):
        raise SingularityError(f"profile is singular on the ellipse rho_sq={rho_sq}")
    C = float(np.max(np.abs(values)))
    if check_analytic:
        m = max(samples, 64)
        prev = None
        with np.errstate(all="ignore"):
            while True:
                resid, scale = _cauchy_residual(f, lo, hi, rho_sq, m)
                if not np.isfinite(resid):
                    raise SingularityError(f"profile is singular on the ellipse rho_sq={rho_sq}")
                if resid <= 1e-9 * max(scale, 1.0):
                    break
                if prev is not None and abs(prev - resid) <= 1e-9 * max(scale, 1.0):
                    # Converged to a non-zero mismatch: a residue is enclosed.
                    raise SingularityError(
                        f"profile has a singularity inside the ellipse rho_sq={rho_sq}")
                if m >= 1 << 16:
                    raise SingularityError(
                        f"could not verify analyticity inside the ellipse rho_sq={rho_sq}")
                prev = resid
                m *= 2
    return C


def auto_analytic(f: Callable, interval: tuple[float, float], n: int,
                  rho_grid: Optional[np.ndarray] = None, samples: int = 256) -> Analytic:
    """Pick ``(rho_sq, C)`` minimising :func:`bound_analytic` at order `n`.

    Ellipses on which the analyticity check fails are skipped.
    """
    if rho_grid is None:
        rho_grid = np.geomspace(1.01, 1e3, 241)
    best = None
    for rho_sq in rho_grid:
        try:
            C = estimate_ellipse_bound(f, interval, float(rho_sq), samples)
        except SingularityError:
            continue
        b = bound_analytic(float(rho_sq), C, n)
        if best is None or b < best[0]:
            best = (b, float(rho_sq), C)
    if best is None:
        raise SingularityError("no admissible Bernstein ellipse on the search grid")
    return Analytic(best[1], best[2])


def resolve_smoothness(profile: RadialProfile, n: int) -> Smoothness:
    if profile.smoothness is not None:
        return profile.smoothness
    return auto_analytic(profile.f, profile.interval, n)


def total_variation(f: Callable, lo: float, hi: float, q: int, points: int = 20001) -> float:
    """Finite-difference estimate of the total variation of ``f^(q)`` on ``[lo, hi]``.

    A diagnostic for choosing `V_q`; it is not a rigorous bound.
    """
    x = np.linspace(lo, hi, points)
    y = np.asarray(f(x), dtype=float)
    for _ in range(q):
        y = np.gradient(y, x, edge_order=2)
    return float(np.sum(np.abs(np.diff(y))))
