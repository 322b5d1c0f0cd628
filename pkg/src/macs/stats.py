"""Statistical helpers: normal tail, two-proportions z-test, edit distance."""

from __future__ import annotations

import math

from .errors import ContractViolation

_SQRT_2 = math.sqrt(2.0)


def normal_sf(x: float) -> float:
    """Standard normal survival function P(Z > x), exact to double precision."""
    return 0.5 * math.erfc(x / _SQRT_2)


def two_prop_ztest(
    successes1: int, n1: int, successes2: int, n2: int
) -> tuple[float, float]:
    """Pooled two-proportions z-test; returns (z, two-sided p)."""
    for successes, n in ((successes1, n1), (successes2, n2)):
        if n <= 0:
            raise ContractViolation(f"sample size must be positive, got {n}")
        if successes < 0 or successes > n:
            raise ContractViolation(f"successes {successes} outside [0, {n}]")
    p1 = successes1 / n1
    p2 = successes2 / n2
    pooled = (successes1 + successes2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0, 1.0
    z = (p1 - p2) / se
    p = 2.0 * normal_sf(abs(z))
    return z, min(p, 1.0)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (substitution, insertion, deletion)."""
    # Shared prefixes and suffixes cannot change the distance; stripping them
    # keeps the DP small for near-identical sequences.
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1]
