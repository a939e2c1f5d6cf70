"""Uniform graph homomorphisms on finite tree regions.

Exact marginals by single-pass message passing, strong log-concavity
certification of every message, variance bounds, heat-bath Glauber
sampling, and the level-average martingale demonstration.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .constants import certification_threshold, frozen_variance_bound
from .errors import DisjointSupport, InfeasibleBoundary
from .pmf import (IntPMF, convolve_step, dirac, log_concavity_coefficient,
                  moments, product_normalize)
from .seeding import derive_seed
from .trees import (HeightAssignment, TreeRegion, build_regular_region,
                    hom_feasible_intervals, validate_hom_boundary)


@dataclass(frozen=True)
class MessageTable:
    """Per-vertex message laws collected while computing a marginal.

    ``messages[y]`` is the law of ``h(y)`` when the edge from ``y``
    toward the target is removed; boundary vertices map to Dirac masses.
    The entry at the target itself is the full marginal.
    """

    target: int
    messages: dict[int, IntPMF]


@dataclass(frozen=True)
class CertificationReport:
    passed: bool
    min_coefficient: Fraction | float
    threshold: Fraction
    worst_vertex: int | None
    message_count: int


@dataclass(frozen=True)
class VarianceCheck:
    variance: Fraction | float
    bound: float
    passed: bool


def _clip(pmf: IntPMF, lo: int, hi: int) -> IntPMF:
    """Restrict to [lo, hi] and renormalise (mass-preserving on trees:
    values outside a vertex's feasible interval can never be combined
    with a feasible value at the neighbor one step away)."""
    if pmf.base >= lo and pmf.top <= hi:
        return pmf
    first = 0
    while first < len(pmf.weights) and pmf.base + first * pmf.step < lo:
        first += 1
    last = len(pmf.weights) - 1
    while last >= 0 and pmf.base + last * pmf.step > hi:
        last -= 1
    if first > last:
        raise DisjointSupport("clipping removed the whole support")
    kept = pmf.weights[first:last + 1]
    if pmf.mode == "exact":
        total = sum(kept)
        weights = tuple(w / total for w in kept)
    else:
        z = max(kept)
        z += math.log(math.fsum(math.exp(w - z) for w in kept))
        weights = tuple(w - z for w in kept)
    return IntPMF(pmf.base + first * pmf.step, pmf.step, weights, pmf.mode)


def exact_marginal(region: TreeRegion, x: int, *, clip: bool = True,
                   validate: bool = True) -> tuple[IntPMF, MessageTable]:
    """Exact law of ``h(x)`` under the uniform homomorphism measure.

    One leaf-to-target pass: a boundary vertex emits a Dirac mass at its
    pinned height; an interior vertex emits the normalised product of its
    away-side neighbors' messages, each convolved with the symmetric unit
    step.  All messages are retained for certification.
    """
    if validate:
        report = validate_hom_boundary(region)
        if not report:
            raise InfeasibleBoundary(f"{report.reason} at {report.witness}")
    if x not in region.interior:
        d = dirac(region.boundary_heights[x])
        return d, MessageTable(x, {x: d})

    parent: dict[int, int | None] = {x: None}
    order = [x]
    stack = [x]
    while stack:
        v = stack.pop()
        if v in region.boundary_heights:
            continue  # the Markov property cuts recursion at the boundary
        for u in region.neighbors[v]:
            if u != parent[v]:
                parent[u] = v
                order.append(u)
                stack.append(u)

    intervals = hom_feasible_intervals(region) if clip else None
    messages: dict[int, IntPMF] = {}
    children: dict[int, list[int]] = {v: [] for v in order}
    for v in order[1:]:
        children[parent[v]].append(v)

    try:
        for v in reversed(order):
            if v in region.boundary_heights:
                messages[v] = dirac(region.boundary_heights[v])
                continue
            factors = [convolve_step(messages[c]) for c in children[v]
                       if c in messages]
            if not factors:
                # hanging interior vertex: only rescales the normaliser
                continue
            msg = product_normalize(factors)
            if clip:
                msg = _clip(msg, *intervals[v])
            messages[v] = msg
    except DisjointSupport as exc:
        raise InfeasibleBoundary(str(exc)) from exc
    return messages[x], MessageTable(x, messages)


def certify_messages(table: MessageTable,
                     threshold: Fraction | None = None) -> CertificationReport:
    """Check that every retained message is strongly log-concave with
    coefficient at least ``threshold`` (default: the certified rational
    lower bound for the squared cubic root).  Exact-mode messages are
    compared by exact rational arithmetic."""
    if threshold is None:
        threshold = certification_threshold()
    worst: tuple[Fraction | float, int | None] = (math.inf, None)
    for v, pmf in table.messages.items():
        coeff = log_concavity_coefficient(pmf)
        if coeff < worst[0]:
            worst = (coeff, v)
    passed = worst[0] >= threshold
    return CertificationReport(passed, worst[0], threshold, worst[1],
                               len(table.messages))


def marginal_variance_check(region: TreeRegion, x: int,
                            bound: float | None = None) -> VarianceCheck:
    """Variance of the exact marginal against the frozen reference bound."""
    if bound is None:
        bound = frozen_variance_bound()
    marginal, _ = exact_marginal(region, x)
    _, var = moments(marginal)
    return VarianceCheck(var, bound, var <= Fraction(bound))


# -- Glauber heat-bath dynamics ---------------------------------------------


def initial_configuration(region: TreeRegion) -> HeightAssignment:
    """Deterministic feasible extension of the boundary heights.

    BFS from the root; each interior vertex takes the midpoint of its
    feasible interval after intersecting with the unit-step constraints
    of already-assigned neighbors, ties broken toward the lower value.
    """
    report = validate_hom_boundary(region)
    if not report:
        raise InfeasibleBoundary(f"{report.reason} at {report.witness}")
    intervals = hom_feasible_intervals(region)
    h: HeightAssignment = dict(region.boundary_heights)
    for v in region.bfs_order(0):
        if v in h:
            continue
        lo, hi = intervals[v]
        for u in region.neighbors[v]:
            if u in h:
                lo = max(lo, h[u] - 1)
                hi = min(hi, h[u] + 1)
        if lo > hi:
            raise InfeasibleBoundary(f"no candidate at vertex {v}")
        n_candidates = (hi - lo) // 2 + 1
        h[v] = lo + 2 * ((n_candidates - 1) // 2)
    return h


def _conditional_update(heights: list[int], v: int, adj: Sequence[int], rng) -> None:
    mn = mx = heights[adj[0]]
    for u in adj[1:]:
        hu = heights[u]
        if hu < mn:
            mn = hu
        elif hu > mx:
            mx = hu
    if mn == mx:
        heights[v] = mn - 1 + 2 * rng.getrandbits(1)
    elif mx - mn == 2:
        heights[v] = mn + 1
    else:
        raise RuntimeError(f"invalid neighborhood spread at vertex {v}")


def glauber_sampler(region: TreeRegion, sweeps: int, burn_in: int,
                    seed: int) -> Iterator[HeightAssignment]:
    """Heat-bath single-site dynamics; yields one assignment per sweep
    after burn-in.  Each sweep resamples every interior vertex in fixed
    increasing order; deterministic given the seed."""
    start = initial_configuration(region)
    heights = [start.get(v, 0) for v in range(region.vertex_count)]
    order = sorted(region.interior)
    adjacency = region.neighbors
    rng = random.Random(seed)
    for sweep in range(burn_in + sweeps):
        for v in order:
            _conditional_update(heights, v, adjacency[v], rng)
        if sweep >= burn_in:
            yield {v: heights[v] for v in range(region.vertex_count)}


def glauber_marginal_counts(region: TreeRegion, x: int, samples: int,
                            burn_in_sweeps: int, seed: int) -> dict[int, int]:
    """Occupation counts of ``h(x)``, recorded after every single-site
    update once burn-in sweeps have completed.  This is the estimator the
    sampler-versus-exact acceptance check runs on."""
    start = initial_configuration(region)
    heights = [start.get(v, 0) for v in range(region.vertex_count)]
    order = sorted(region.interior)
    adjacency = region.neighbors
    rng = random.Random(seed)
    for _ in range(burn_in_sweeps):
        for v in order:
            _conditional_update(heights, v, adjacency[v], rng)
    counts: dict[int, int] = {}
    recorded = 0
    n_order = len(order)
    i = 0
    while recorded < samples:
        v = order[i]
        _conditional_update(heights, v, adjacency[v], rng)
        hx = heights[x]
        counts[hx] = counts.get(hx, 0) + 1
        recorded += 1
        i += 1
        if i == n_order:
            i = 0
    return counts


def glauber_transition_exact(region: TreeRegion, law: dict[tuple, Fraction],
                             v: int) -> dict[tuple, Fraction]:
    """Push a distribution over full configurations through one exact
    heat-bath update at ``v`` (configurations keyed by the tuple of
    heights in vertex order).  Used to verify stationarity on small
    regions by exact transfer computation."""
    out: dict[tuple, Fraction] = {}
    for config, p in law.items():
        values = [config[u] for u in region.neighbors[v]]
        mn, mx = min(values), max(values)
        if mn == mx:
            targets = (mn - 1, mn + 1)
        elif mx - mn == 2:
            targets = (mn + 1,)
        else:
            raise RuntimeError("invalid configuration in exact transition")
        share = p / len(targets)
        for t in targets:
            new = list(config)
            new[v] = t
            key = tuple(new)
            out[key] = out.get(key, 0) + share
    return out


# -- martingale-norm profile -------------------------------------------------


@dataclass(frozen=True)
class ProfilePoint:
    radius: int
    mean: float
    half_width: float
    replicas: int


def variance_profile(degree: int, radii: Sequence[int], replicas: int,
                     seed: int, *, sampler_depth: int | None = None,
                     burn_in: int = 64) -> list[ProfilePoint]:
    """Monte-Carlo profile of the boundary-averaged marginal variance.

    For each replica a boundary height function is drawn by Glauber
    equilibration on a strictly larger ball with zero boundary; for each
    radius ``k`` the exact variance of the centre height given the
    sampled sphere values is computed, and the replica average estimates
    the martingale norm at ``k``.  Radius 0 contributes exactly 0.
    """
    radii = sorted(radii)
    if sampler_depth is None:
        sampler_depth = max(radii) + 1
    if sampler_depth <= max(radii):
        raise ValueError("sampler region must be strictly larger")
    big = build_regular_region(degree, sampler_depth, "undirected", 0)
    subregions = {k: build_regular_region(degree, k, "undirected", 0)
                  for k in radii}
    values: dict[int, list[float]] = {k: [] for k in radii}
    for r in range(replicas):
        chain_seed = derive_seed(seed, "variance-profile", r)
        sample = next(glauber_sampler(big, 1, burn_in, chain_seed))
        for k in radii:
            if k == 0:
                values[k].append(0.0)
                continue
            sub = subregions[k]
            heights = {v: sample[v] for v in sub.boundary_heights}
            region_k = TreeRegion(sub.neighbors, sub.interior, heights)
            marginal, _ = exact_marginal(region_k, 0, validate=False)
            values[k].append(float(moments(marginal)[1]))
    points = []
    for k in radii:
        arr = np.asarray(values[k])
        half = 1.96 * arr.std(ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
        points.append(ProfilePoint(k, float(arr.mean()), float(half), replicas))
    return points


# -- level-average martingale demo -------------------------------------------


@dataclass(frozen=True)
class OffsetDemo:
    level_edge_counts: list[int]
    expected_increment_variance: list[float]
    observed_mean_square_increment: list[float]
    fractional_histogram: np.ndarray
    level_averages: np.ndarray  # (replicas, depth + 1)


def height_offset_demo(degree: int, depth: int, replicas: int,
                       seed: int) -> OffsetDemo:
    """Sample i.i.d. +-1 gradients on the regular tree, anchored at the
    root, and track the per-level empirical height averages.

    The level average gains the mean of as many independent +-1 coins as
    there are edges entering the new level, so the sum of those coins is
    drawn as a binomial.  Returns the level sequences, their increment
    variances, and the histogram of the fractional part at the deepest
    level (bins of width 0.1).
    """
    if degree < 3:
        raise ValueError("the irreducible setting needs degree >= 3")
    rng = np.random.default_rng(derive_seed(seed, "offset-demo"))
    edge_counts = [degree * (degree - 1) ** (k - 1) for k in range(1, depth + 1)]
    a = np.zeros((replicas, depth + 1))
    for k, m in enumerate(edge_counts, start=1):
        coins = rng.binomial(m, 0.5, size=replicas)
        a[:, k] = a[:, k - 1] + (2.0 * coins - m) / m
    increments = np.diff(a, axis=1)
    observed = (increments ** 2).mean(axis=0)
    hist, _ = np.histogram(a[:, depth] % 1.0, bins=10, range=(0.0, 1.0))
    return OffsetDemo(edge_counts, [1.0 / m for m in edge_counts],
                      observed.tolist(), hist, a)
