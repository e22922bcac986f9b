"""Chebyshev-route separable factorization of an RBF kernel.

The degree-``n`` interpolant of ``f`` is rewritten in powers of
``z = |x - y|^2`` and each power is expanded as

    |x - y|^(2l) = sum_k sum_j sum_{|alpha| = l-k}
                   (-2)^(l-k) C(l,k) C(k,j) C(l-k; alpha)
                   (|x|^(2j) x^alpha) (|y|^(2(k-j)) y^alpha)

which yields ``comb(n+d+2, d+2)`` separable terms. The full coefficient sits
on the ``x`` factor, so the ``y`` factors depend only on ``(n, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import indexcomb
from .cheb1d import (
    Analytic,
    ChebApprox,
    FiniteSmooth,
    RadialProfile,
    Smoothness,
    bound_for,
    builtin_profile,
    cheb_fit,
    monomialize,
    resolve_smoothness,
)
from .errors import ConstraintError, DimensionMismatchError, ResourceError

DEFAULT_MAX_BYTES = 2 * 1024**3
PLAN_SCHEMA = "rbfrank.plan/1"


@dataclass(frozen=True)
class ChebTerm:
    l: int
    k: int
    j: int
    alpha: tuple
    coeff: float


def eval_g(term: ChebTerm, x) -> float:
    """``coeff * |x|^(2j) * x^alpha`` at one point."""
    x = np.asarray(x)
    if x.shape != (len(term.alpha),):
        raise DimensionMismatchError(f"point has shape {x.shape}, term expects d={len(term.alpha)}")
    return term.coeff * float(x @ x) ** term.j * indexcomb.monomial(x, term.alpha)


def eval_h(term: ChebTerm, y) -> float:
    """``|y|^(2(k-j)) * y^alpha`` at one point."""
    y = np.asarray(y)
    if y.shape != (len(term.alpha),):
        raise DimensionMismatchError(f"point has shape {y.shape}, term expects d={len(term.alpha)}")
    return float(y @ y) ** (term.k - term.j) * indexcomb.monomial(y, term.alpha)


def _as_points(P, d: int, dtype) -> np.ndarray:
    P = np.asarray(getattr(P, "points", P), dtype=dtype)
    if P.ndim == 1:
        P = P.reshape(1, -1) if P.size else P.reshape(0, d)
    if P.shape[1] != d:
        raise DimensionMismatchError(f"points have dimension {P.shape[1]}, plan expects {d}")
    return P


def check_memory(n_rows: int, n_cols: int, itemsize: int, max_bytes: int) -> None:
    need = n_rows * n_cols * itemsize
    if need > max_bytes:
        raise ResourceError(f"factor matrices need {need} bytes, above the cap of {max_bytes} bytes")


class _MonomialCache:
    """Columns ``P^alpha`` and ``|P|^(2j)`` for one point set, built lazily."""

    def __init__(self, P: np.ndarray):
        self.P = P
        self.norm2 = np.einsum("ij,ij->i", P, P)
        self._mono = {}
        self._norm_pow = {0: np.ones(P.shape[0], dtype=P.dtype)}

    def mono(self, alpha: tuple) -> np.ndarray:
        col = self._mono.get(alpha)
        if col is None:
            col = np.ones(self.P.shape[0], dtype=self.P.dtype)
            for i, a in enumerate(alpha):
                if a:
                    col = col * self.P[:, i] ** a
            self._mono[alpha] = col
        return col

    def norm_pow(self, j: int) -> np.ndarray:
        col = self._norm_pow.get(j)
        if col is None:
            col = self.norm2**j
            self._norm_pow[j] = col
        return col


@dataclass(frozen=True)
class SeparablePlan:
    """Explicit separable form ``sum_i g_i(x) h_i(y)`` from the Chebyshev route."""

    d: int
    n: int
    D: float
    terms: tuple
    declared_rank: int
    error_bound: float
    power_coeffs: np.ndarray
    smoothness: Optional[Smoothness] = None
    profile_name: str = "custom"
    profile_params: dict = field(default_factory=dict)
    approx: Optional[ChebApprox] = None
    metadata: dict = field(default_factory=dict)
    construction: str = "chebyshev"

    @property
    def rank(self) -> int:
        return len(self.terms)

    def factor_matrices(self, X, Y, dtype=None, max_bytes: int = DEFAULT_MAX_BYTES):
        """Dense factors ``G`` (``N_x x R``) and ``H`` (``N_y x R``) with ``K ~ G H^T``.

        Each entry depends only on its own point and term, so the result does
        not depend on evaluation order.
        """
        dtype = np.dtype(dtype or self.power_coeffs.dtype)
        X = _as_points(X, self.d, dtype)
        Y = _as_points(Y, self.d, dtype)
        R = self.rank
        check_memory(X.shape[0] + Y.shape[0], R, np.dtype(dtype).itemsize, max_bytes)
        G = np.empty((X.shape[0], R), dtype=dtype)
        H = np.empty((Y.shape[0], R), dtype=dtype)
        cx, cy = _MonomialCache(X), _MonomialCache(Y)
        for i, t in enumerate(self.terms):
            G[:, i] = dtype.type(t.coeff) * cx.norm_pow(t.j) * cx.mono(t.alpha)
            H[:, i] = cy.norm_pow(t.k - t.j) * cy.mono(t.alpha)
        return G, H

    def evaluate(self, x, y) -> float:
        G, H = self.factor_matrices(np.asarray(x).reshape(1, -1), np.asarray(y).reshape(1, -1))
        return (G @ H.T)[0, 0]

    def to_dict(self) -> dict:
        return {
            "schema": PLAN_SCHEMA,
            "construction": self.construction,
            "d": self.d,
            "n": self.n,
            "D": float(self.D),
            "profile": {"name": self.profile_name, "params": self.profile_params},
            "declared_rank": self.declared_rank,
            "error_bound": float(self.error_bound),
            "smoothness": _smoothness_to_dict(self.smoothness),
            "power_coeffs": [float(b) for b in self.power_coeffs],
            "terms": [[t.l, t.k, t.j, list(t.alpha), float(t.coeff)] for t in self.terms],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SeparablePlan":
        if payload.get("construction") != "chebyshev":
            raise ConstraintError(f"not a Chebyshev plan: {payload.get('construction')!r}")
        terms = tuple(ChebTerm(l, k, j, tuple(a), float(c)) for l, k, j, a, c in payload["terms"])
        prof = payload.get("profile", {})
        return cls(
            d=payload["d"], n=payload["n"], D=payload["D"], terms=terms,
            declared_rank=payload["declared_rank"], error_bound=payload["error_bound"],
            power_coeffs=np.asarray(payload["power_coeffs"], dtype=np.float64),
            smoothness=_smoothness_from_dict(payload.get("smoothness")),
            profile_name=prof.get("name", "custom"), profile_params=prof.get("params", {}),
            metadata=payload.get("metadata", {}),
        )


def _smoothness_to_dict(s: Optional[Smoothness]):
    if isinstance(s, Analytic):
        return {"kind": "analytic", "rho_sq": s.rho_sq, "C": s.C}
    if isinstance(s, FiniteSmooth):
        return {"kind": "finite", "q": s.q, "V_q": s.V_q}
    return None


def _smoothness_from_dict(payload) -> Optional[Smoothness]:
    if not payload:
        return None
    if payload["kind"] == "analytic":
        return Analytic(payload["rho_sq"], payload["C"])
    return FiniteSmooth(payload["q"], payload["V_q"])


def cheb_terms(power_coeffs, d: int) -> tuple:
    """Term list in ``(l, k, j, alpha)`` graded order for power coefficients ``b_l``."""
    n = len(power_coeffs) - 1
    terms = []
    for l, k, j, alpha in indexcomb.chebyshev_term_tuples(n, d):
        c = ((-2) ** (l - k) * math.comb(l, k) * math.comb(k, j)
             * indexcomb.multinomial(l - k, alpha))
        terms.append(ChebTerm(l, k, j, alpha, power_coeffs[l] * c))
    return tuple(terms)


def build_cheb_plan(profile: RadialProfile, n: int, d: int, dtype=np.float64) -> SeparablePlan:
    """Separable plan of rank ``comb(n+d+2, d+2)`` with its deterministic error bound."""
    rank = indexcomb.rank_chebyshev(n, d)
    approx = cheb_fit(profile, n, dtype=dtype)
    b = monomialize(approx)
    smoothness = resolve_smoothness(profile, n)
    bound = bound_for(smoothness, profile.D, n)
    terms = cheb_terms(b, d)
    assert len(terms) == rank
    return SeparablePlan(
        d=d, n=n, D=profile.D, terms=terms, declared_rank=rank, error_bound=bound,
        power_coeffs=b, smoothness=smoothness, profile_name=profile.name,
        profile_params=dict(profile.params), approx=approx,
    )


def eval_separable(plan, x, y) -> float:
    """``sum_i g_i(x) h_i(y)`` for one pair of points (either construction)."""
    return plan.evaluate(x, y)


def factor_matrices(plan, X, Y, **kwargs):
    return plan.factor_matrices(X, Y, **kwargs)


def prune_plan(plan: SeparablePlan, X, Y, tol: float) -> SeparablePlan:
    """Drop terms whose ``|coeff| max|g/coeff| max|h|`` over the clouds is below `tol`."""
    G, H = plan.factor_matrices(X, Y)
    scale = np.abs(G).max(axis=0, initial=0.0) * np.abs(H).max(axis=0, initial=0.0)
    keep = tuple(t for t, s in zip(plan.terms, scale) if s >= tol)
    meta = dict(plan.metadata)
    meta["pruned"] = {"tol": tol, "dropped": plan.rank - len(keep), "original_rank": plan.declared_rank}
    return replace(plan, terms=keep, declared_rank=len(keep), metadata=meta)


def plan_for_profile_name(name: str, n: int, d: int, D: float = 1.0, h: float = 1.0) -> SeparablePlan:
    return build_cheb_plan(builtin_profile(name, h=h, D=D), n, d)
