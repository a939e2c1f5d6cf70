"""Uniform monotone height functions on regular directed trees.

The root is pinned at 0, the depth-``n`` layer at ``-k``, and heights
never increase from parent to child.  Counting uses the symmetry of the
regular tree: the number of sub-configurations below a vertex depends
only on its depth and value, so the full table is ``O(n*k)`` counts.
Counts are arbitrary-precision integers by default; a log-domain mode
covers depths beyond the exact range with documented 1e-9 relative
tolerance on derived probabilities.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import SizeCapExceeded
from .seeding import derive_seed
from .trees import (DirectedTreeRegion, HeightAssignment,
                    build_regular_region)

EXACT = "exact"
LOGFLOAT = "logfloat"

DEFAULT_DIGIT_CAP = 2_000_000


def _logsumexp(values) -> float:
    m = max(values)
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


@dataclass(frozen=True)
class CountingTable:
    """Counts of monotone sub-configurations by depth and value.

    ``levels[j][a + drop]`` is the number of ways to fill the strict
    descendants (down to the interior floor) of a depth-``j`` vertex
    whose own height is ``a``, for ``1 <= j <= depth - 1``.  The deepest
    interior level holds all ones; above it each count is the ``d``-th
    power of a prefix sum of the level below.
    """

    branching: int
    depth: int
    drop: int
    mode: str
    levels: dict[int, tuple]

    def level(self, j: int) -> tuple:
        return self.levels[j]

    def total(self):
        """Number of monotone configurations (log-count in log mode)."""
        row = self.levels[1]
        if self.mode == EXACT:
            return sum(row) ** self.branching
        return self.branching * _logsumexp(row)

    def region(self) -> DirectedTreeRegion:
        return build_regular_region(self.branching, self.depth, "directed",
                                    (0, -self.drop))


def build_counting_table(d: int, n: int, k: int, mode: str = EXACT,
                         digit_cap: int = DEFAULT_DIGIT_CAP) -> CountingTable:
    """Bottom-up table for ``d`` children per vertex, depth ``n``, root
    pinned at 0 and depth-``n`` boundary at ``-k``."""
    if d < 1 or n < 2 or k < 0:
        raise ValueError("need d >= 1, n >= 2, k >= 0")
    if mode == EXACT and d >= 2:
        est_digits = d ** max(0, n - 2) * math.log10(k + 2)
        if est_digits > digit_cap:
            raise SizeCapExceeded(
                f"~{est_digits:.0f}-digit counts exceed cap {digit_cap}")
    levels: dict[int, tuple] = {}
    if mode == EXACT:
        row: tuple = tuple([1] * (k + 1))
        levels[n - 1] = row
        for j in range(n - 2, 0, -1):
            prefix = []
            acc = 0
            for w in row:
                acc += w
                prefix.append(acc)
            row = tuple(s ** d for s in prefix)
            levels[j] = row
    else:
        lrow = [0.0] * (k + 1)
        levels[n - 1] = tuple(lrow)
        for j in range(n - 2, 0, -1):
            new = []
            for a in range(k + 1):
                new.append(d * _logsumexp(lrow[:a + 1]))
            lrow = new
            levels[j] = tuple(lrow)
    return CountingTable(d, n, k, mode, levels)


def child_zero_probability(table: CountingTable):
    """Exact probability that a fixed child of the root sits at height 0."""
    row = table.levels[1]
    if table.mode == EXACT:
        return Fraction(row[-1], sum(row))
    return math.exp(row[-1] - _logsumexp(row))


def child_zero_lower_bound(d: int, n: int, k: int) -> Fraction:
    """Combinatorial lower bound ``1 - (1 - 1/(k+1))^(d^(n-2))`` for the
    probability that a child of the root sits at height 0."""
    if n < 2:
        raise ValueError("need n >= 2")
    return 1 - Fraction(k, k + 1) ** (d ** (n - 2))


def zero_marginal_probability(table: CountingTable, depth: int):
    """Probability that a fixed vertex at the given depth has height 0.

    Heights never exceed 0, so the event forces the whole ancestor line
    to 0 and the probability factors over depths.
    """
    if not 0 <= depth <= table.depth - 1:
        raise ValueError("depth outside the interior range")
    if table.mode == EXACT:
        p = Fraction(1)
        for j in range(1, depth + 1):
            row = table.levels[j]
            p *= Fraction(row[-1], sum(row))
        return p
    logp = 0.0
    for j in range(1, depth + 1):
        row = table.levels[j]
        logp += row[-1] - _logsumexp(row)
    return math.exp(logp)


def ancestral_sampler(table: CountingTable, seed: int,
                      max_depth: int | None = None) -> Iterator[HeightAssignment]:
    """Exact top-down sampler.

    A child of a depth-``j`` vertex with value ``a`` takes value ``b``
    with probability proportional to the level-``(j+1)`` count at ``b``,
    over ``-k <= b <= a``; tree factorisation makes the sampled law
    exactly the uniform one.  ``max_depth`` truncates the assignment to
    the top of the tree: the marginal law of those levels is unchanged
    since the table already integrates out everything below.
    """
    d, n, k = table.branching, table.depth, table.drop
    if max_depth is None:
        max_depth = n
    max_depth = min(max_depth, n)
    region = table.region()
    depths = region.depths()
    vertices = [v for v in region.topological_order() if depths[v] <= max_depth]
    rng = random.Random(seed)

    if table.mode == EXACT:
        prefix: dict[int, list[int]] = {}
        for j in range(1, n):
            acc, row = 0, []
            for w in table.levels[j]:
                acc += w
                row.append(acc)
            prefix[j] = row
    else:
        prefix = {}
        for j in range(1, n):
            weights = [math.exp(w - max(table.levels[j])) for w in table.levels[j]]
            acc, row = 0.0, []
            for w in weights:
                acc += w
                row.append(acc)
            prefix[j] = row

    while True:
        h: HeightAssignment = {region.root: 0}
        for v in vertices:
            if v == region.root:
                continue
            j = depths[v]
            if j == n:
                h[v] = -k
                continue
            a = h[region.parent[v]]
            row = prefix[j]
            if table.mode == EXACT:
                u = rng.randrange(row[a + k])
            else:
                u = rng.random() * row[a + k]
            h[v] = bisect_right(row, u, hi=a + k) - k
        yield h


@dataclass(frozen=True)
class FrozenRegionResult:
    branching: int
    depth: int
    log_factor: float
    cutoff: int
    analytic_bound: float
    analytic_bound_exact: Fraction
    empirical: float
    replicas: int
    sigma: float
    passed: bool


def frozen_region_lower_bound(d: int, n: int, m: int) -> Fraction:
    """Union bound for the event that all vertices within distance ``m``
    of the root stay at height 0 under the drop ``k = n``."""
    if m <= 0:
        return Fraction(1)
    return 1 - sum(Fraction(d) ** j * Fraction(n, n + 1) ** (d ** (n - j - 1))
                   for j in range(1, m + 1))


def frozen_region_experiment(d: int, n: int, c: float, replicas: int,
                             seed: int) -> FrozenRegionResult:
    """Estimate the probability that heights freeze at 0 down to depth
    ``m = floor(n - c*log n)`` (natural log) under the drop ``k = n``,
    and compare with the analytic union bound."""
    m = max(0, min(n - 1, math.floor(n - c * math.log(n))))
    table = build_counting_table(d, n, n)
    bound = frozen_region_lower_bound(d, n, m)
    hits = 0
    if m == 0:
        hits = replicas
    else:
        stream = ancestral_sampler(table, derive_seed(seed, "frozen-region"),
                                   max_depth=m)
        for _ in range(replicas):
            h = next(stream)
            if all(v == 0 for v in h.values()):
                hits += 1
    empirical = hits / replicas
    b = float(bound)
    sigma = math.sqrt(max(b * (1 - b), empirical * (1 - empirical)) / replicas)
    passed = empirical >= b - 3 * sigma
    return FrozenRegionResult(d, n, c, m, b, bound, empirical, replicas,
                              sigma, passed)
