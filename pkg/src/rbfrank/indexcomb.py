"""Multi-indices and the closed-form term counts of the separable expansions.

A multi-index is stored as a plain ``tuple`` of non-negative ints. Within one
total degree the enumeration order is lexicographic with larger leading
exponents first, so ``(2, 0, 0)`` precedes ``(1, 1, 0)`` and ``(0, 0, 2)`` comes
last. Across degrees the order is graded (ascending ``|alpha|``).

Python integers never wrap, but every count here is checked against a signed
128-bit range so that callers porting results to fixed-width storage get an
explicit error instead of a silently truncated rank.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb
from typing import Iterator, Sequence, Tuple

from .errors import CombinatorialOverflowError, ContractError, InvalidDimensionError

MultiIndex = Tuple[int, ...]

INT128_MAX = 2**127 - 1


def _checked(value: int) -> int:
    if value > INT128_MAX:
        raise CombinatorialOverflowError(
            f"integer result has {value.bit_length()} bits; exceeds the 128-bit limit"
        )
    return value


def _check_dim(d: int) -> None:
    if d < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")


def _iter_fixed_degree(d: int, degree: int) -> Iterator[MultiIndex]:
    if d == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _iter_fixed_degree(d - 1, degree - first):
            yield (first,) + rest


@lru_cache(maxsize=256)
def enumerate_multiindices(d: int, total_degree: int) -> Tuple[MultiIndex, ...]:
    """All multi-indices of length `d` whose entries sum to `total_degree`.

    Parameters
    ----------
    d : int
        Number of variables, at least 1.
    total_degree : int
        Required value of ``|alpha|``.

    Returns
    -------
    tuple of tuple of int
        ``comb(total_degree + d - 1, d - 1)`` indices in lexicographic order,
        largest leading exponent first.
    """
    _check_dim(d)
    if total_degree < 0:
        raise ContractError(f"total degree must be >= 0, got {total_degree}")
    return tuple(_iter_fixed_degree(d, total_degree))


def enumerate_graded(d: int, max_degree: int) -> Iterator[MultiIndex]:
    """Multi-indices with ``|alpha| <= max_degree`` in graded order."""
    for deg in range(max_degree + 1):
        yield from enumerate_multiindices(d, deg)


def multinomial(m: int, alpha: Sequence[int]) -> int:
    """Multinomial coefficient ``m! / (alpha_1! ... alpha_d!)``."""
    if any(a < 0 for a in alpha):
        raise ContractError(f"multi-index entries must be >= 0: {tuple(alpha)}")
    if sum(alpha) != m:
        raise ContractError(f"|alpha| = {sum(alpha)} does not equal m = {m}")
    # Product of binomials avoids the huge intermediate m!.
    out = 1
    running = 0
    for a in alpha:
        running += a
        out *= comb(running, a)
    return _checked(out)


def monomial(x: Sequence[float], alpha: Sequence[int]) -> float:
    """Evaluate ``x ** alpha`` for a single point."""
    out = 1.0
    for xi, ai in zip(x, alpha):
        if ai:
            out *= xi**ai
    return out


def rank_chebyshev(n: int, d: int) -> int:
    """Term count of the Chebyshev-route separable form, ``comb(n+d+2, d+2)``."""
    _check_dim(d)
    if n < 0:
        raise ContractError(f"expansion order must be >= 0, got {n}")
    return _checked(comb(n + d + 2, d + 2))


def rank_fourier_taylor(M_f: int, M_t: int, d: int) -> int:
    """Real rank of the Fourier-Taylor separable form, ``4 M_f comb(M_t+d, d)``."""
    _check_dim(d)
    if M_f < 1 or M_t < 0:
        raise ContractError(f"need M_f >= 1 and M_t >= 0, got M_f={M_f}, M_t={M_t}")
    return _checked(4 * M_f * comb(M_t + d, d))


def group_cardinality(d: int, k: int) -> int:
    """Number of degree-`k` monomials in `d` variables, ``comb(k+d-1, d-1)``."""
    _check_dim(d)
    if k < 0:
        raise ContractError(f"group index must be >= 0, got {k}")
    return _checked(comb(k + d - 1, d - 1))


def predicted_decay_indices(d: int, k_max: int) -> list[int]:
    """Singular-value indices where large decays are expected, ``comb(k+d, d)``."""
    _check_dim(d)
    return [_checked(comb(k + d, d)) for k in range(k_max + 1)]


def default_k_max(d: int, size: int) -> int:
    """Largest `k` whose predicted decay index ``comb(k+d, d)`` fits in `size`."""
    _check_dim(d)
    k = -1
    while comb(k + 1 + d, d) <= size:
        k += 1
    return max(k, 0)


# Brute-force counters. These deliberately walk the nested sums term by term
# instead of calling the closed forms above; the tests compare the two.


def chebyshev_term_tuples(n: int, d: int) -> Iterator[tuple[int, int, int, MultiIndex]]:
    """Yield every ``(l, k, j, alpha)`` of the expanded ``sum_l b_l |x-y|^(2l)``.

    The products ``(|x|^2j x^alpha)(|y|^2(k-j) y^alpha)`` are pairwise distinct:
    the exponents ``(j, k-j, alpha)`` recover ``k`` and ``l = k + |alpha|``, so
    ``(j, k-j, alpha) -> (l, k, j, alpha)`` is a bijection and no two tuples
    share a product.
    """
    for l in range(n + 1):
        for k in range(l + 1):
            for j in range(k + 1):
                for alpha in enumerate_multiindices(d, l - k):
                    yield (l, k, j, alpha)


def count_chebyshev_terms(n: int, d: int) -> int:
    return sum(1 for _ in chebyshev_term_tuples(n, d))


def count_fourier_taylor_complex_terms(M_f: int, M_t: int, d: int) -> int:
    """Complex terms over modes ``j = +-1 .. +-M_f`` and Taylor orders ``<= M_t``."""
    count = 0
    for j in range(-M_f, M_f + 1):
        if j == 0:
            continue
        for k in range(M_t + 1):
            count += len(enumerate_multiindices(d, k))
    return count

