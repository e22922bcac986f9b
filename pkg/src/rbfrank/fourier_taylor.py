"""Fourier-Taylor separable factorization.

The profile is made ``4 D^2``-periodic by a smooth cutoff window, expanded in
Fourier modes ``exp(i w j z)``, and the cross factor ``exp(-2 i w j rx . ry)``
of each mode is Taylor-expanded around the box centres. Modes ``j`` and ``-j``
are complex conjugates of each other, so each pair collapses to two real
separable terms; the ``j = 0`` mode contributes a single constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import indexcomb
from .cheb1d import RadialProfile, FiniteSmooth, builtin_profile
from .cheb_factor import DEFAULT_MAX_BYTES, PLAN_SCHEMA, _as_points, check_memory
from .errors import (
    ConstraintError,
    EvaluationError,
    RegimeError,
    SmoothnessDegradationError,
    UndersamplingError,
)

DEFAULT_WINDOW_ORDER = 7


def smoothstep(t, order: int):
    """Polynomial smoothstep ``S_N`` on ``[0, 1]``: 0 and 1 at the ends, ``N`` flat derivatives."""
    t = np.clip(t, 0.0, 1.0)
    acc = np.zeros_like(t)
    for k in range(order + 1):
        acc = acc + math.comb(order + k, k) * math.comb(2 * order + 1, order - k) * (-t) ** k
    return t ** (order + 1) * acc


@dataclass(frozen=True)
class Periodic:
    """Any callable with a known period; the minimal input of :func:`fourier_coeffs`."""

    f: Callable
    period: float

    def __call__(self, z):
        return self.f(z)


@dataclass(frozen=True)
class PeriodizedProfile:
    """``4 D^2``-periodic extension ``T(z) f(z)`` of a radial profile.

    ``T`` is 1 on ``[-D^2, D^2]`` and falls to 0 across ``D^2 <= |z| <= 2 D^2``
    by a smoothstep of order `window_order`. The profile is evaluated at
    negative arguments on the left band, so it must be finite there.
    """

    base: RadialProfile
    window_order: int = DEFAULT_WINDOW_ORDER

    @property
    def D2(self) -> float:
        return float(self.base.D) ** 2

    @property
    def period(self) -> float:
        return 4.0 * self.D2

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    def window(self, z):
        z = np.asarray(z, dtype=float)
        t = (np.abs(z) - self.D2) / self.D2
        return 1.0 - smoothstep(t, self.window_order)

    def reduce(self, z):
        """Map `z` into ``[-2 D^2, 2 D^2)``."""
        z = np.asarray(z, dtype=float)
        P = self.period
        return z - P * np.floor((z + P / 2) / P)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        r = self.reduce(z)
        w = self.window(r)
        # Leave the kernel range untouched: no reduction round-off on [0, D^2].
        core = (z >= 0) & (z <= self.D2)
        r = np.where(core, z, r)
        with np.errstate(all="ignore"):
            vals = np.asarray(self.base.f(r), dtype=float)
        out = np.where(w > 0, w * np.where(w > 0, vals, 0.0), 0.0)
        out = np.where(core, vals, out)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("periodized profile is not finite; the profile may be singular for z < 0")
        return out

    def sup_norm(self, points: int = 8193) -> float:
        """Max of ``|f_p|`` over one period on a uniform grid."""
        z = np.linspace(-2 * self.D2, 2 * self.D2, points)
        return float(np.max(np.abs(self(z))))

    def total_variation(self, q: int, points: int = 40001) -> float:
        """Finite-difference estimate of the variation of ``f_p^(q)`` over one period."""
        z = np.linspace(-2 * self.D2, 2 * self.D2, points)
        y = self(z)
        for _ in range(q):
            y = np.gradient(y, z, edge_order=2)
        return float(np.sum(np.abs(np.diff(y))))


def periodize(base: RadialProfile, window_order: int = DEFAULT_WINDOW_ORDER) -> PeriodizedProfile:
    if window_order < 1:
        raise ConstraintError(f"window order must be >= 1, got {window_order}")
    if isinstance(base.smoothness, FiniteSmooth) and window_order < base.smoothness.q + 1:
        raise SmoothnessDegradationError(
            f"window order {window_order} would reduce the profile's smoothness q={base.smoothness.q}")
    return PeriodizedProfile(base, window_order)


def default_quad_points(M_f: int) -> int:
    return 16 * M_f + 64


def fourier_coeffs(pp, M_f: int, quad_points: Optional[int] = None) -> np.ndarray:
    """Coefficients ``a_{-M_f} .. a_{M_f}`` of a periodic function (index ``j + M_f``).

    Uniform trapezoid rule over one period, then exact Hermitian symmetry.
    """
    if M_f < 0:
        raise ConstraintError(f"M_f must be >= 0, got {M_f}")
    Q = default_quad_points(M_f) if quad_points is None else int(quad_points)
    if Q < 8 * max(M_f, 1):
        raise UndersamplingError(f"{Q} quadrature points is below the floor 8*M_f = {8 * M_f}")
    P = float(pp.period)
    z = -P / 2 + P * np.arange(Q) / Q
    vals = np.asarray(pp(z), dtype=float)
    j = np.arange(-M_f, M_f + 1)
    omega = 2 * np.pi / P
    a = np.exp(-1j * omega * np.outer(j, z)) @ vals / Q
    a = (a + a[::-1].conj()) / 2
    a[M_f] = a[M_f].real
    return a


class FTBound(NamedTuple):
    total: float
    taylor: float
    fourier: float


def ft_error_bound(norm_f_inf: float, D_x: float, D_y: float, D: float, M_t: int,
                   V_q: float, q: int, M_f: int) -> FTBound:
    """Two-part bound ``|f| (D_x D_y / D^2)^(M_t+1) + V_q/(pi q) (2 D^2/(pi M_f))^q``."""
    if not (0 <= D_x <= D and 0 <= D_y <= D):
        raise ConstraintError(f"need 0 <= D_x, D_y <= D, got D_x={D_x}, D_y={D_y}, D={D}")
    if M_f < 1 or q < 1:
        raise ConstraintError(f"need M_f >= 1 and q >= 1, got M_f={M_f}, q={q}")
    if 9 * M_f > M_t:
        raise RegimeError(f"the bound needs 9*M_f <= M_t, got M_f={M_f}, M_t={M_t}")
    taylor = norm_f_inf * (D_x * D_y / D**2) ** (M_t + 1)
    fourier = V_q / (math.pi * q) * (2 * D**2 / (math.pi * M_f)) ** q
    return FTBound(taylor + fourier, taylor, fourier)


@dataclass(frozen=True)
class FTTerm:
    """Complex term ``Psi(x) Phi(y)`` for mode `j` and Taylor index `alpha`."""

    j: int
    alpha: tuple
    coeff: complex


def _ft_complex_terms(a: np.ndarray, M_f: int, M_t: int, d: int, omega: float) -> tuple:
    terms = []
    for j in range(-M_f, M_f + 1):
        if j == 0:
            continue
        aj = complex(a[j + M_f])
        for k in range(M_t + 1):
            scale = aj * (-2j * j * omega) ** k / math.factorial(k)
            for alpha in indexcomb.enumerate_multiindices(d, k):
                terms.append(FTTerm(j, alpha, scale * indexcomb.multinomial(k, alpha)))
    return tuple(terms)


@dataclass(frozen=True)
class FourierTaylorPlan:
    """Separable form from the Fourier-Taylor route.

    `complex_terms` lists the ``j != 0`` complex terms; the realified factors
    have ``retained_rank = len(complex_terms) + 1`` columns (one per
    conjugate-pair real/imaginary part, plus the constant mode).
    """

    d: int
    D: float
    M_f: int
    M_t: int
    omega: float
    fourier_coeffs: np.ndarray
    x_c: np.ndarray
    y_c: np.ndarray
    complex_terms: tuple
    declared_rank: int
    error_bound: Optional[float]
    bound_status: str
    bound_parts: dict = field(default_factory=dict)
    profile_name: str = "custom"
    profile_params: dict = field(default_factory=dict)
    window_order: int = DEFAULT_WINDOW_ORDER
    metadata: dict = field(default_factory=dict)
    construction: str = "fourier_taylor"

    @property
    def terms(self) -> tuple:
        return self.complex_terms

    @property
    def rank(self) -> int:
        return self.retained_rank

    @property
    def retained_rank(self) -> int:
        return len(self.complex_terms) + 1

    def _complex_factors(self, X: np.ndarray, Y: np.ndarray, positive_only: bool):
        rx = X - self.x_c
        ry = Y - self.y_c
        rc = self.x_c - self.y_c
        ux = np.einsum("ij,ij->i", rx + rc, rx + rc)
        uy = np.einsum("ij,ij->i", ry, ry) - 2 * ry @ rc
        terms = [t for t in self.complex_terms if t.j > 0 or not positive_only]
        Psi = np.empty((X.shape[0], len(terms)), dtype=complex)
        Phi = np.empty((Y.shape[0], len(terms)), dtype=complex)
        mono_x, mono_y, phase_x, phase_y = {}, {}, {}, {}
        for i, t in enumerate(terms):
            if t.alpha not in mono_x:
                mono_x[t.alpha] = np.prod(rx ** np.asarray(t.alpha), axis=1)
                mono_y[t.alpha] = np.prod(ry ** np.asarray(t.alpha), axis=1)
            if t.j not in phase_x:
                phase_x[t.j] = np.exp(1j * self.omega * t.j * ux)
                phase_y[t.j] = np.exp(1j * self.omega * t.j * uy)
            Psi[:, i] = t.coeff * phase_x[t.j] * mono_x[t.alpha]
            Phi[:, i] = phase_y[t.j] * mono_y[t.alpha]
        return Psi, Phi

    def complex_factor_matrices(self, X, Y):
        """All complex factors (both signs of ``j``) and the constant ``a_0``."""
        X = _as_points(X, self.d, np.float64)
        Y = _as_points(Y, self.d, np.float64)
        Psi, Phi = self._complex_factors(X, Y, positive_only=False)
        return Psi, Phi, complex(self.fourier_coeffs[self.M_f])

    def factor_matrices(self, X, Y, dtype=np.float64, max_bytes: int = DEFAULT_MAX_BYTES):
        """Real factors ``G``, ``H`` with ``retained_rank`` columns.

        Column 0 is the constant mode; then for every ``j > 0`` term the pair
        ``(2 Re Psi, Re Phi)`` and ``(-2 Im Psi, Im Phi)``.
        """
        X = _as_points(X, self.d, np.float64)
        Y = _as_points(Y, self.d, np.float64)
        R = self.retained_rank
        check_memory(X.shape[0] + Y.shape[0], R, 8, max_bytes)
        Psi, Phi = self._complex_factors(X, Y, positive_only=True)
        G = np.empty((X.shape[0], R))
        H = np.empty((Y.shape[0], R))
        G[:, 0] = self.fourier_coeffs[self.M_f].real
        H[:, 0] = 1.0
        G[:, 1::2] = 2 * Psi.real
        G[:, 2::2] = -2 * Psi.imag
        H[:, 1::2] = Phi.real
        H[:, 2::2] = Phi.imag
        return G.astype(dtype), H.astype(dtype)

    def evaluate(self, x, y) -> float:
        G, H = self.factor_matrices(np.asarray(x).reshape(1, -1), np.asarray(y).reshape(1, -1))
        return float((G @ H.T)[0, 0])

    def evaluate_complex(self, x, y) -> complex:
        Psi, Phi, a0 = self.complex_factor_matrices(np.asarray(x).reshape(1, -1), np.asarray(y).reshape(1, -1))
        return complex(a0 + (Psi @ Phi.T)[0, 0])

    def to_dict(self) -> dict:
        return {
            "schema": PLAN_SCHEMA,
            "construction": self.construction,
            "d": self.d,
            "D": float(self.D),
            "M_f": self.M_f,
            "M_t": self.M_t,
            "omega": self.omega,
            "window_order": self.window_order,
            "profile": {"name": self.profile_name, "params": self.profile_params},
            "centers": {"x_c": [float(v) for v in self.x_c], "y_c": [float(v) for v in self.y_c]},
            "fourier_coeffs": [[float(c.real), float(c.imag)] for c in self.fourier_coeffs],
            "declared_rank": self.declared_rank,
            "retained_rank": self.retained_rank,
            "error_bound": None if self.error_bound is None else float(self.error_bound),
            "bound_status": self.bound_status,
            "bound_parts": self.bound_parts,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FourierTaylorPlan":
        if payload.get("construction") != "fourier_taylor":
            raise ConstraintError(f"not a Fourier-Taylor plan: {payload.get('construction')!r}")
        a = np.array([complex(re, im) for re, im in payload["fourier_coeffs"]])
        M_f, M_t, d = payload["M_f"], payload["M_t"], payload["d"]
        prof = payload.get("profile", {})
        return cls(
            d=d, D=payload["D"], M_f=M_f, M_t=M_t, omega=payload["omega"], fourier_coeffs=a,
            x_c=np.asarray(payload["centers"]["x_c"], dtype=float),
            y_c=np.asarray(payload["centers"]["y_c"], dtype=float),
            complex_terms=_ft_complex_terms(a, M_f, M_t, d, payload["omega"]),
            declared_rank=payload["declared_rank"], error_bound=payload["error_bound"],
            bound_status=payload["bound_status"], bound_parts=payload.get("bound_parts", {}),
            profile_name=prof.get("name", "custom"), profile_params=prof.get("params", {}),
            window_order=payload.get("window_order", DEFAULT_WINDOW_ORDER),
            metadata=payload.get("metadata", {}),
        )


def build_ft_plan(pp: PeriodizedProfile, M_f: int, M_t: int, x_c, y_c,
                  enforce_ratio: bool = True, D_x: Optional[float] = None,
                  D_y: Optional[float] = None, q: int = 2, V_q: Optional[float] = None,
                  quad_points: Optional[int] = None) -> FourierTaylorPlan:
    """Fourier-Taylor plan of orders ``(M_f, M_t)`` about centres `x_c`, `y_c`.

    The error bound is attached when ``9 M_f <= M_t`` and the box diameters
    `D_x`, `D_y` are known. `V_q` defaults to a finite-difference estimate of
    the variation of ``f_p^(q)`` over one period, so the attached bound is an
    estimate rather than a certificate.
    """
    if M_f < 1 or M_t < 0:
        raise ConstraintError(f"need M_f >= 1 and M_t >= 0, got M_f={M_f}, M_t={M_t}")
    ratio_ok = 9 * M_f <= M_t
    if enforce_ratio and not ratio_ok:
        raise RegimeError(f"9*M_f <= M_t is required, got M_f={M_f}, M_t={M_t}")
    x_c = np.atleast_1d(np.asarray(x_c, dtype=float))
    y_c = np.atleast_1d(np.asarray(y_c, dtype=float))
    if x_c.shape != y_c.shape or x_c.ndim != 1:
        raise ConstraintError("centres must be points of equal dimension")
    d = x_c.size
    a = fourier_coeffs(pp, M_f, quad_points)
    terms = _ft_complex_terms(a, M_f, M_t, d, pp.omega)

    bound, status, parts = None, "heuristic", {}
    if ratio_ok and D_x is not None and D_y is not None:
        if V_q is None:
            V_q = pp.total_variation(q)
        norm_f = pp.sup_norm()
        b = ft_error_bound(norm_f, D_x, D_y, pp.base.D, M_t, V_q, q, M_f)
        bound, status = b.total, "theorem"
        parts = {"taylor": b.taylor, "fourier": b.fourier, "norm_f_inf": norm_f,
                 "V_q": V_q, "q": q, "D_x": D_x, "D_y": D_y}
    return FourierTaylorPlan(
        d=d, D=pp.base.D, M_f=M_f, M_t=M_t, omega=pp.omega, fourier_coeffs=a, x_c=x_c, y_c=y_c,
        complex_terms=terms, declared_rank=indexcomb.rank_fourier_taylor(M_f, M_t, d),
        error_bound=bound, bound_status=status, bound_parts=parts,
        profile_name=pp.base.name, profile_params=dict(pp.base.params),
        window_order=pp.window_order,
    )


def eval_ft_factors(plan: FourierTaylorPlan, x, y) -> float:
    """Realified separable sum at one pair of points."""
    return plan.evaluate(x, y)


def eval_ft_complex(plan: FourierTaylorPlan, x, y) -> complex:
    """Complex separable sum over all modes; its imaginary part is round-off."""
    return plan.evaluate_complex(x, y)


def plan_for_profile_name(name: str, M_f: int, M_t: int, d: int, D: float = 1.0, h: float = 1.0,
                          **kwargs) -> FourierTaylorPlan:
    pp = periodize(builtin_profile(name, h=h, D=D))
    centre = np.zeros(d)
    return build_ft_plan(pp, M_f, M_t, kwargs.pop("x_c", centre), kwargs.pop("y_c", centre), **kwargs)
