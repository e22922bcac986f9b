"""Kernel matrices and their spectra.

Numerical rank follows ``R_tol = min{r : |K - K_r| <= tol |K|}`` with ``K_r`` the
rank-``r`` truncated SVD, in the Frobenius, spectral or max-entry norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import indexcomb
from .cheb1d import builtin_profile
from .errors import ConstraintError, NumericalError, ResourceError

DEFAULT_MAX_N = 4000
NORMS = ("fro", "two", "max")
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    profile: str
    bandwidth_policy: str
    h: float
    symmetric: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.entries.shape


def _points(P) -> np.ndarray:
    return np.asarray(getattr(P, "points", P), dtype=float)


def bandwidth(policy: str, X: np.ndarray, Y: np.ndarray) -> float:
    """``sqrt-d``: ``h = sqrt(d)``; ``max-dist``: largest pairwise distance between the clouds."""
    if policy == "sqrt-d":
        return math.sqrt(X.shape[1])
    if policy == "max-dist":
        h = math.sqrt(float(cdist(X, Y, "sqeuclidean").max()))
        if h == 0:
            raise ConstraintError("max-dist bandwidth is zero (all points coincide)")
        return h
    try:
        return float(policy)
    except ValueError:
        raise ConstraintError(f"unknown bandwidth policy {policy!r}") from None


def assemble(X, Y, profile: str = "gaussian", bandwidth_policy: str = "sqrt-d",
             max_entries: int = DEFAULT_MAX_N**2) -> KernelMatrix:
    """Entries ``f(|x_i - y_j|^2 / h^2)`` for a named profile."""
    symmetric = X is Y
    Xp, Yp = _points(X), _points(Y)
    if Xp.shape[1] != Yp.shape[1]:
        raise ConstraintError(f"dimension mismatch: {Xp.shape[1]} vs {Yp.shape[1]}")
    if Xp.shape[0] * Yp.shape[0] > max_entries:
        raise ResourceError(
            f"kernel matrix needs {Xp.shape[0] * Yp.shape[0] * 8} bytes, above the cap of {max_entries * 8} bytes")
    h = bandwidth(bandwidth_policy, Xp, Yp)
    f = builtin_profile(profile, h=1.0)
    # cdist returns exactly equal (i, j) and (j, i) entries, so X = Y gives K = K^T.
    K = f(cdist(Xp, Yp, "sqeuclidean") / h**2)
    return KernelMatrix(K, profile, bandwidth_policy, h, symmetric)


def _matrix(K) -> np.ndarray:
    return np.asarray(getattr(K, "entries", K), dtype=float)


def svd(K):
    try:
        return np.linalg.svd(_matrix(K), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc


def _check_tol(tol: float) -> None:
    if not 0 < tol <= 1:
        raise ConstraintError(f"tolerance must lie in (0, 1], got {tol}")


def rank_fro(s: np.ndarray, tol: float) -> int:
    _check_tol(tol)
    tail = np.sqrt(np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]]))
    total = tail[0]
    return int(np.argmax(tail <= tol * total))


def rank_two(s: np.ndarray, tol: float) -> int:
    _check_tol(tol)
    nxt = np.concatenate([s, [0.0]])
    return int(np.argmax(nxt <= tol * s[0])) if s.size else 0


def max_error_curve(U, s, Vt, A: np.ndarray, r_max: Optional[int] = None) -> np.ndarray:
    """``max|A - A_r|`` for ``r = 0 .. r_max`` by rank-one downdates of a running residual."""
    r_max = len(s) if r_max is None else min(r_max, len(s))
    E = A.copy()
    out = np.empty(r_max + 1)
    out[0] = np.abs(E).max(initial=0.0)
    for r in range(r_max):
        E -= s[r] * np.outer(U[:, r], Vt[r])
        out[r + 1] = np.abs(E).max(initial=0.0)
    return out


def rank_max(U, s, Vt, A: np.ndarray, tol: float, r_max: Optional[int] = None):
    """First ``r`` with ``max|A - A_r| <= tol max|A|``, and whether the error later re-rises."""
    _check_tol(tol)
    target = tol * np.abs(A).max(initial=0.0)
    E = A.copy()
    err = np.abs(E).max(initial=0.0)
    limit = len(s) if r_max is None else min(r_max, len(s))
    r = 0
    while err > target and r < limit:
        E -= s[r] * np.outer(U[:, r], Vt[r])
        err = np.abs(E).max(initial=0.0)
        r += 1
    rerise = False
    if r < limit:
        # Look a short way past the crossing for a transient increase above target.
        for rr in range(r, min(limit, r + 10)):
            E -= s[rr] * np.outer(U[:, rr], Vt[rr])
            if np.abs(E).max(initial=0.0) > target:
                rerise = True
                break
    return r, rerise


def numerical_rank(K, tol: float, norm: str = "fro", factors=None) -> int:
    """Numerical rank at relative tolerance `tol` in the given norm."""
    A = _matrix(K)
    U, s, Vt = svd(A) if factors is None else factors
    if norm == "fro":
        return rank_fro(s, tol)
    if norm == "two":
        return rank_two(s, tol)
    if norm == "max":
        return rank_max(U, s, Vt, A, tol)[0]
    raise ConstraintError(f"unknown norm {norm!r}; choose from {NORMS}")


def singular_ratios(s: np.ndarray):
    """``sigma_i / sigma_{i+1}`` with denominators below ``sigma_1 N eps`` flagged.

    Returns ``(ratios, floored)``; floored entries are set to ``inf``.
    """
    s = np.asarray(s, dtype=float)
    if s.size < 2:
        return np.zeros(0), np.zeros(0, dtype=bool)
    floor = s[0] * s.size * np.finfo(float).eps
    den = s[1:]
    floored = den <= floor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(floored, np.inf, s[:-1] / np.where(floored, 1.0, den))
    return ratios, floored


def ratio_spikes(singular_values, threshold: float = 4.0, include_floored: bool = False):
    """1-based indices ``i`` with ``sigma_i / sigma_{i+1} > threshold``.

    Ratios whose denominator sits at round-off level are unreliable; they are
    skipped unless `include_floored`, in which case they are reported as
    ``inf``. A ratio whose numerator is also below the floor is always
    skipped.
    """
    if not threshold > 1:
        raise ConstraintError(f"threshold must exceed 1, got {threshold}")
    s = np.asarray(singular_values, dtype=float)
    ratios, floored = singular_ratios(s)
    out = []
    floor = s[0] * s.size * np.finfo(float).eps if s.size else 0.0
    for i, (r, fl) in enumerate(zip(ratios, floored)):
        if fl:
            if include_floored and s[i] > floor:
                out.append((i + 1, math.inf))
            continue
        if r > threshold:
            out.append((i + 1, float(r)))
    return out


def match_grouping(spikes: Sequence[int], d: int):
    """Greedy attempt to explain spike indices as cumulative group sizes.

    Walks the degree-``k`` group cardinalities ``comb(k+d-1, d-1)`` and, where
    a cumulative count overshoots the next spike, splits the group. Returns
    the list of group sizes reproducing the spikes, or ``None``. Diagnostic
    only.
    """
    groups = []
    total = 0
    k = 0
    pending = 0
    for idx in sorted(spikes):
        while total < idx:
            if pending == 0:
                pending = indexcomb.group_cardinality(d, k)
                k += 1
            take = min(pending, idx - total)
            if total + pending > idx:
                groups.append(take)
                total += take
                pending -= take
            else:
                groups.append(pending)
                total += pending
                pending = 0
        if total != idx:
            return None
    return groups


@dataclass
class SpectrumReport:
    singular_values: np.ndarray
    ranks: dict
    ratio_spikes: dict
    predicted_indices: list
    tolerances: list
    rerise: dict = field(default_factory=dict)
    grouping: Optional[list] = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(v) for v in self.singular_values],
            "ranks": self.ranks,
            "max_rank_rerise": self.rerise,
            "ratio_spikes": {str(k): [[i, r if math.isfinite(r) else "inf"] for i, r in v]
                             for k, v in self.ratio_spikes.items()},
            "predicted_indices": self.predicted_indices,
            "matched_grouping": self.grouping,
            "tolerances": self.tolerances,
            "metadata": self.metadata,
        }


def spectrum_report(K, d: int, tolerances: Sequence[float] = (1e-1, 1e-2, 1e-3),
                    norms: Sequence[str] = NORMS, thresholds: Sequence[float] = (4.0, 2.0),
                    k_max: Optional[int] = None) -> SpectrumReport:
    A = _matrix(K)
    U, s, Vt = svd(A)
    ranks, rerise = {}, {}
    for norm in norms:
        ranks[norm] = {}
        for tol in tolerances:
            if norm == "max":
                r, again = rank_max(U, s, Vt, A, tol)
                rerise[str(tol)] = again
            else:
                r = numerical_rank(A, tol, norm, (U, s, Vt))
            ranks[norm][str(tol)] = r
    spikes = {th: ratio_spikes(s, th) for th in thresholds}
    if k_max is None:
        k_max = indexcomb.default_k_max(d, min(A.shape))
    first = spikes[thresholds[0]] if thresholds else []
    return SpectrumReport(
        singular_values=s, ranks=ranks, ratio_spikes=spikes,
        predicted_indices=indexcomb.predicted_decay_indices(d, k_max),
        tolerances=list(tolerances), rerise=rerise,
        grouping=match_grouping([i for i, _ in first], d),
    )


def truncated_svd(K, r: int):
    U, s, Vt = svd(K)
    return U[:, :r], s[:r], Vt[:r]


def nystrom_leverage(K, r: int, oversample: int = 0, seed: int = 0, factors=None):
    """Nystrom approximation ``C W^+ R`` from columns sampled by rank-`r` leverage scores.

    Returns ``(L, Rt, info)`` with ``K ~ L @ Rt`` of rank at most `r`. Columns are
    drawn without replacement with probabilities proportional to the exact
    leverage scores of the top-`r` right singular subspace; rows use the same
    indices, so the method targets square (typically symmetric) kernels.
    """
    from .pointgen import make_rng

    A = _matrix(K)
    n = A.shape[1]
    c = r + oversample
    if r < 1 or c > n or A.shape[0] != n:
        raise ConstraintError(f"need square K and 1 <= r, r + oversample <= N; got r={r}, c={c}, shape={A.shape}")
    U, s, Vt = svd(A) if factors is None else factors
    lev = np.sum(Vt[:r] ** 2, axis=0)
    prob = lev / lev.sum()
    rng = make_rng(seed)
    nz = int(np.count_nonzero(prob))
    if nz >= c:
        idx = np.sort(rng.choice(n, size=c, replace=False, p=prob))
    else:
        rest = np.setdiff1d(np.arange(n), np.flatnonzero(prob))
        idx = np.sort(np.concatenate([np.flatnonzero(prob), rng.choice(rest, c - nz, replace=False)]))
    C = A[:, idx]
    W = A[np.ix_(idx, idx)]
    W_pinv = np.linalg.pinv(W, rcond=PINV_RTOL, hermitian=np.allclose(W, W.T))
    # Truncate C W^+ C^T-style product back to rank r via QR + small SVD.
    Q, Rq = np.linalg.qr(C)
    core = Rq @ W_pinv @ A[idx, :]
    Uc, sc, Vtc = np.linalg.svd(core, full_matrices=False)
    L = (Q @ Uc[:, :r]) * sc[:r]
    Rt = Vtc[:r]
    return L, Rt, {"columns": idx.tolist(), "leverage": "exact-leverage", "pinv_rtol": PINV_RTOL}


def randomized_svd(K, r: int, power_iters: int = 2, oversample: int = 10, seed: int = 0):
    """Range-finder SVD with `power_iters` re-orthonormalized subspace iterations."""
    from .pointgen import make_rng

    A = _matrix(K)
    m, n = A.shape
    ell = r + oversample
    if r < 1 or ell > min(m, n):
        raise ConstraintError(f"need 1 <= r and r + oversample <= min(shape); got r={r}, ell={ell}, shape={A.shape}")
    Omega = make_rng(seed).standard_normal((n, ell))
    Q, _ = np.linalg.qr(A @ Omega)
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(A.T @ Q)
        Q, _ = np.linalg.qr(A @ Z)
    Ub, s, Vt = np.linalg.svd(Q.T @ A, full_matrices=False)
    return (Q @ Ub)[:, :r], s[:r], Vt[:r]


def rel_fro_errors_svd(s: np.ndarray, ranks: Sequence[int]) -> list:
    tail = np.sqrt(np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]]))
    return [float(tail[min(r, len(s))] / tail[0]) for r in ranks]


METHODS = ("svd", "nystrom", "rsvd")


def reconstruction_curve(K, ranks: Sequence[int], methods: Sequence[str] = ("svd",),
                         seed: int = 0, oversample: int = 10, power_iters: int = 2):
    """Rows ``(rank, method, rel_fro_error)``; rank 0 is the zero approximation."""
    ranks = list(ranks)
    if ranks != sorted(ranks):
        raise ConstraintError("ranks must be sorted ascending")
    A = _matrix(K)
    factors = svd(A)
    norm = np.linalg.norm(A)
    rows = []
    for method in methods:
        if method == "svd":
            errs = rel_fro_errors_svd(factors[1], ranks)
            rows += [(r, "svd", e) for r, e in zip(ranks, errs)]
            continue
        for r in ranks:
            if r == 0:
                rows.append((0, method, 1.0))
                continue
            if method == "nystrom":
                over = min(oversample, A.shape[1] - r)
                L, Rt, _ = nystrom_leverage(A, r, over, seed, factors)
                approx = L @ Rt
            elif method == "rsvd":
                over = min(oversample, min(A.shape) - r)
                U, s, Vt = randomized_svd(A, r, power_iters, over, seed)
                approx = (U * s) @ Vt
            else:
                raise ConstraintError(f"unknown method {method!r}; choose from {METHODS}")
            rows.append((r, method, float(np.linalg.norm(A - approx) / norm)))
    return rows


def error_drops(ranks: Sequence[int], errors: Sequence[float], factor: float = 3.0) -> list:
    """Ranks ``r`` where ``err(prev) / err(r) >= factor`` along consecutive ranks."""
    out = []
    for (r0, e0), (r1, e1) in zip(zip(ranks, errors), zip(ranks[1:], errors[1:])):
        if e1 == 0 or e0 / e1 >= factor:
            out.append(r1)
    return out
