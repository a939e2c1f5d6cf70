"""Flows on directed trees and their geometric-increment measures.

A flow assigns a positive (possibly infinite) rate to every directed
edge so that each parent edge carries the sum of its children's rates.
The associated measure makes edge increments independent geometric
variables; this module validates flows, samples the measure, realises
the min-of-geometrics identity, classifies localisation of ancestor-ray
families, and runs the single-site heat-bath (DLR) and exchangeability
checks.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from scipy import stats

from .errors import (EmptyEdgeSet, EmptyInterval, InvalidFlow,
                     MissingEdgeWeight, NonPositiveRate)
from .pmf import EXACT, LOGFLOAT, IntPMF, geometric_pmf
from .trees import DirectedTreeRegion, HeightAssignment, enumerate_heights

Rate = Fraction | float
Edge = tuple[int, int]  # (child, parent)


@dataclass(frozen=True)
class Flow:
    """Edge rates in (0, +inf], keyed by (child, parent)."""

    rates: dict[Edge, Rate]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", dict(self.rates))
        for edge, rate in self.rates.items():
            if not rate > 0:
                raise NonPositiveRate(f"rate {rate} on edge {edge}")

    def rate(self, edge: Edge) -> Rate:
        try:
            return self.rates[edge]
        except KeyError:
            raise MissingEdgeWeight(f"no rate on edge {edge}") from None


@dataclass(frozen=True)
class FlowReport:
    valid: bool
    violations: tuple = ()  # (vertex, residual) pairs


def validate_flow(region: DirectedTreeRegion, flow: Flow) -> FlowReport:
    """Check the flow condition at every vertex whose parent edge and
    children edges all lie in the region; residuals are exact when the
    rates are rational."""
    for edge in region.edges():
        flow.rate(edge)  # MissingEdgeWeight on gaps
    violations = []
    for v in range(region.vertex_count):
        p = region.parent[v]
        kids = region.children[v]
        if p is None or not kids:
            continue
        parent_rate = flow.rate((v, p))
        child_rates = [flow.rate((c, v)) for c in kids]
        if any(r == math.inf for r in child_rates) or parent_rate == math.inf:
            if parent_rate != math.inf or not any(r == math.inf for r in child_rates):
                violations.append((v, math.inf))
            continue
        residual = parent_rate - sum(child_rates)
        if residual != 0:
            violations.append((v, residual))
    return FlowReport(not violations, tuple(violations))


def balanced_flow(region: DirectedTreeRegion, leaf_rate: Rate = 1) -> Flow:
    """The generation-invariant flow on a regular region: every edge out
    of a vertex with ``m`` descendants-per-level growth carries the sum
    of the rates below it, with deepest edges carrying ``leaf_rate``."""
    rates: dict[Edge, Rate] = {}
    for v in reversed(region.topological_order()):
        p = region.parent[v]
        if p is None:
            continue
        kids = region.children[v]
        if not kids:
            rates[(v, p)] = leaf_rate
        else:
            rates[(v, p)] = sum(rates[(c, v)] for c in kids)
    return Flow(rates)


# -- sampling ----------------------------------------------------------------


def gradient_laws(region: DirectedTreeRegion, flow: Flow,
                  eps: float = 1e-12, mode: str = LOGFLOAT) -> dict[Edge, IntPMF]:
    """Truncated geometric law of every edge increment."""
    return {edge: geometric_pmf(rate=float(flow.rate(edge)) if flow.rate(edge) != math.inf else math.inf,
                                eps=eps, mode=mode)
            for edge in region.edges()}


def sample_flow_measure(region: DirectedTreeRegion, flow: Flow, eps: float,
                        seed: int, anchor: int | None = None) -> Iterator[HeightAssignment]:
    """Stream of height assignments with independent geometric edge
    increments (truncated at tail mass ``eps``), anchored to 0 at
    ``anchor``.  Deterministic given the seed; the anchor only shifts
    the representative, never the gradients."""
    report = validate_flow(region, flow)
    if not report.valid:
        raise InvalidFlow(f"flow condition fails at {report.violations}")
    if anchor is None:
        anchor = region.root
    edges = sorted(region.edges())
    laws = gradient_laws(region, flow, eps)
    rng = random.Random(seed)
    draws = {edge: laws[edge].sampler(rng) for edge in edges}

    # traversal from the anchor over the undirected view
    adjacency: dict[int, list[tuple[int, Edge, int]]] = {
        v: [] for v in range(region.vertex_count)}
    for child, parent in edges:
        adjacency[parent].append((child, (child, parent), -1))
        adjacency[child].append((parent, (child, parent), +1))
    plan: list[tuple[int, int, Edge, int]] = []
    seen = {anchor}
    queue = [anchor]
    while queue:
        v = queue.pop()
        for u, edge, sign in adjacency[v]:
            if u not in seen:
                seen.add(u)
                plan.append((u, v, edge, sign))
                queue.append(u)

    while True:
        grads = {edge: draws[edge]() for edge in edges}
        h: HeightAssignment = {anchor: 0}
        for v, pv, edge, sign in plan:
            h[v] = h[pv] + sign * grads[edge]
        yield h


# -- closed-form identities ---------------------------------------------------


def min_gradient_law(rates: Sequence[Rate] | None = None, *,
                     ratios: Sequence[Fraction] | None = None,
                     eps: float = 1e-12, mode: str = EXACT) -> IntPMF:
    """Law of the minimum of independent geometric variables.

    The minimum of geometrics with rates ``a_1..a_n`` is geometric with
    rate ``a_1 + ... + a_n`` (step-down ratios multiply), an exact
    identity rather than an approximation; the result is the truncated
    PMF of that summed-rate law.
    """
    if ratios is not None:
        if len(ratios) == 0:
            raise EmptyEdgeSet("no edges in the minimum")
        total = Fraction(1)
        for r in ratios:
            total *= Fraction(r)
        return geometric_pmf(ratio=total, eps=eps, mode=mode)
    if not rates:
        raise EmptyEdgeSet("no edges in the minimum")
    if any(r == math.inf for r in rates):
        return geometric_pmf(rate=math.inf, eps=eps, mode=mode)
    return geometric_pmf(rate=math.fsum(float(r) for r in rates), eps=eps, mode=mode)


def ray_variance(rates: Sequence[Rate] | None = None, *,
                 ratios: Sequence[Fraction] | None = None) -> Fraction | float:
    """Variance of the height difference across a directed ray.

    Each edge contributes ``r / (1 - r)^2`` with ``r`` the step-down
    ratio of its geometric increment; rational ratios give an exact
    rational value.
    """
    if ratios is not None:
        total = Fraction(0)
        for r in ratios:
            r = Fraction(r)
            if not 0 <= r < 1:
                raise NonPositiveRate(f"ratio {r} not in [0, 1)")
            total += r / (1 - r) ** 2
        return total
    if rates is None:
        raise ValueError("provide rates or ratios")
    total_f = 0.0
    for a in rates:
        if a == math.inf:
            continue
        if not a > 0:
            raise NonPositiveRate(f"rate {a} is not positive")
        r = math.exp(-float(a))
        total_f += r / (1.0 - r) ** 2
    return total_f


@dataclass(frozen=True)
class DLRReport:
    passed: bool
    conditional: IntPMF
    lo: int
    hi: int
    max_ratio_deviation: Fraction


def dlr_single_site_check(parent_ratio: Fraction, child_ratios: Sequence[Fraction],
                          parent_height: int, child_heights: Sequence[int]) -> DLRReport:
    """Conditional law of a height given its neighbors under the flow
    measure, computed exactly in the step-down-ratio domain.

    The weight of value ``v`` is ``rho_p^(P - v) * prod_i rho_i^(v - c_i)``
    on ``[max c, P]``; when the flow condition holds (``rho_p`` equals
    the product of the children ratios) the exponent cancels and the law
    is exactly uniform, which is what PASS certifies.
    """
    if len(child_ratios) != len(child_heights) or not child_ratios:
        raise EmptyEdgeSet("need matching, nonempty children data")
    lo = max(child_heights)
    hi = parent_height
    if lo > hi:
        raise EmptyInterval(f"children reach {lo} above parent {hi}")
    parent_ratio = Fraction(parent_ratio)
    child_ratios = [Fraction(r) for r in child_ratios]
    if not 0 < parent_ratio < 1 or any(not 0 < r < 1 for r in child_ratios):
        raise NonPositiveRate("ratios must lie strictly between 0 and 1")
    weights = []
    for v in range(lo, hi + 1):
        w = parent_ratio ** (hi - v)
        for r, c in zip(child_ratios, child_heights):
            w *= r ** (v - c)
        weights.append(w)
    total = sum(weights)
    pmf = IntPMF(lo, 1, tuple(w / total for w in weights), EXACT)
    target = Fraction(1, hi - lo + 1)
    deviation = max(abs(w / total - target) for w in weights)
    return DLRReport(deviation == 0, pmf, lo, hi, deviation)


# -- localisation classification ----------------------------------------------


LOCALISED = "Localised"
DELOCALISED = "Delocalised"
UNDECIDED = "Undecided"

#: observed geometric decay of the terms certifies summability
_GEOMETRIC_CEILING = 0.95
#: Raabe exponent margins; slowly-varying tables fall through to Undecided
_RAABE_LOCALISED = 1.5
_RAABE_DELOCALISED = 0.5


@dataclass(frozen=True)
class RaySpec:
    """Rates along an ancestor ray, generation by generation.

    Families: ``constant`` (rate ``base`` forever), ``geometric`` (rate
    ``base * growth**g``), or ``table`` (explicit rates; classification
    may return Undecided beyond what the finite table supports).
    """

    family: str
    base: Rate = Fraction(1)
    growth: Rate = Fraction(2)
    table: tuple = ()

    def __post_init__(self) -> None:
        if self.family not in ("constant", "geometric", "table"):
            raise ValueError(f"unknown ray family {self.family!r}")
        if self.family == "table":
            object.__setattr__(self, "table", tuple(self.table))
            if any(not t > 0 for t in self.table):
                raise NonPositiveRate("table rates must be positive")
        else:
            if not self.base > 0:
                raise NonPositiveRate("base rate must be positive")
            if self.family == "geometric" and not self.growth > 0:
                raise NonPositiveRate("growth factor must be positive")

    def rate_at(self, g: int) -> float:
        if self.family == "constant":
            return float(self.base)
        if self.family == "geometric":
            return float(self.base) * float(self.growth) ** g
        return float(self.table[g])


@dataclass(frozen=True)
class LocalisationReport:
    classification: str
    partial_sum: float
    last_term: float
    terms_used: int
    detail: str = ""


def localisation_test(spec: RaySpec, partial_terms: int = 256) -> LocalisationReport:
    """Classify the summability of ``sum_g exp(-rate_g)`` along the ray.

    The constant and geometric families are decided in closed form.  A
    table is decided by a ratio test and a Raabe-style exponent estimate
    on the budgeted prefix, with conservative margins: slowly varying
    sequences are reported Undecided rather than guessed.
    """
    if spec.family == "constant":
        t = math.exp(-float(spec.base))
        n = partial_terms
        return LocalisationReport(DELOCALISED, n * t, t, n,
                                  "constant terms do not vanish")
    if spec.family == "geometric":
        growth = float(spec.growth)
        budget = min(partial_terms, 64)
        terms = [math.exp(-spec.rate_at(g)) for g in range(budget)]
        if growth > 1:
            return LocalisationReport(LOCALISED, math.fsum(terms), terms[-1],
                                      budget, "super-exponentially decaying terms")
        detail = ("constant terms" if growth == 1
                  else "rates vanish, terms tend to one")
        return LocalisationReport(DELOCALISED, math.fsum(terms), terms[-1],
                                  budget, detail)

    budget = min(partial_terms, len(spec.table))
    rates = [float(spec.table[g]) for g in range(budget)]
    terms = [math.exp(-a) for a in rates]
    partial = math.fsum(terms)
    if budget < 8:
        return LocalisationReport(UNDECIDED, partial, terms[-1] if terms else 0.0,
                                  budget, "table too short")
    start = budget // 2
    # log-domain ratios t_{g+1}/t_g = exp(rate_g - rate_{g+1})
    log_ratios = [rates[g] - rates[g + 1] for g in range(start, budget - 1)]
    if min(log_ratios) >= -1e-12:
        return LocalisationReport(DELOCALISED, partial, terms[-1], budget,
                                  "terms do not decrease")
    if max(log_ratios) <= math.log(_GEOMETRIC_CEILING):
        return LocalisationReport(LOCALISED, partial, terms[-1], budget,
                                  "observed geometric decay")
    raabe = [(start + i) * math.expm1(rates[start + i + 1] - rates[start + i])
             for i in range(len(log_ratios))]
    if min(raabe) >= _RAABE_LOCALISED:
        return LocalisationReport(LOCALISED, partial, terms[-1], budget,
                                  f"power-law decay, exponent >= {_RAABE_LOCALISED}")
    if max(raabe) <= _RAABE_DELOCALISED:
        return LocalisationReport(DELOCALISED, partial, terms[-1], budget,
                                  f"power-law decay, exponent <= {_RAABE_DELOCALISED}")
    return LocalisationReport(UNDECIDED, partial, terms[-1], budget,
                              "ratio and exponent tests inconclusive")


# -- exchangeability -----------------------------------------------------------


def descendant_edge_sets(region: DirectedTreeRegion, x: int,
                         n: int) -> list[list[Edge]]:
    """Edge sets per generation below ``x``: set ``k`` holds the edges
    from the distance-``k`` descendants of ``x`` to their parents (set 0
    is the single edge from ``x`` to its own parent)."""
    if region.parent[x] is None:
        raise ValueError("x must have a parent")
    sets: list[list[Edge]] = [[(x, region.parent[x])]]
    level = [x]
    for _ in range(1, n):
        level = [c for v in level for c in region.children[v]]
        if not level:
            raise EmptyEdgeSet("region too shallow for the requested depth")
        sets.append([(c, region.parent[c]) for c in level])
    return sets


def min_gradient_sequence(assignment: Mapping[int, int],
                          edge_sets: Sequence[Sequence[Edge]]) -> tuple[int, ...]:
    return tuple(min(assignment[p] - assignment[c] for c, p in es)
                 for es in edge_sets)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


@dataclass(frozen=True)
class ExchangeabilityReport:
    mode: str
    passed: bool
    max_deviation: int | None = None
    p_value: float | None = None
    sums_checked: int = 0
    samples: int = 0


def exchangeability_check_monotone(region: DirectedTreeRegion, x: int, n: int, *,
                                   flow: Flow | None = None, samples: int = 0,
                                   seed: int | None = None, eps: float = 1e-9,
                                   cap: int = 10_000_000) -> ExchangeabilityReport:
    """Exchangeability of the per-generation minimum gradients below ``x``.

    Exact mode (no flow): enumerate the boundary-pinned region and check
    that, conditional on their sum, the min-gradient vectors are uniform
    over all nonnegative compositions — every count equal, exactly.

    Statistical mode (flow given): sample the flow measure and run a
    pairwise symmetry (Bowker) test on the first two coordinates.
    """
    edge_sets = descendant_edge_sets(region, x, n)
    if flow is None:
        counts: dict[tuple[int, ...], int] = {}
        for h in enumerate_heights(region, "monotone", cap):
            vec = min_gradient_sequence(h, edge_sets)
            counts[vec] = counts.get(vec, 0) + 1
        by_sum: dict[int, list[tuple[int, ...]]] = {}
        for vec in counts:
            by_sum.setdefault(sum(vec), []).append(vec)
        max_dev = 0
        for a in by_sum:
            values = [counts.get(comp, 0) for comp in _compositions(a, n)]
            max_dev = max(max_dev, max(values) - min(values))
        return ExchangeabilityReport("exact", max_dev == 0, max_dev,
                                     sums_checked=len(by_sum))
    if n < 2 or samples < 1 or seed is None:
        raise ValueError("statistical mode needs n >= 2, samples and a seed")
    stream = sample_flow_measure(region, flow, eps, seed)
    pair_counts: dict[tuple[int, int], int] = {}
    for h in itertools.islice(stream, samples):
        vec = min_gradient_sequence(h, edge_sets)
        key = (vec[0], vec[1])
        pair_counts[key] = pair_counts.get(key, 0) + 1
    stat = 0.0
    df = 0
    for (a, b), nab in pair_counts.items():
        if a >= b:
            continue
        nba = pair_counts.get((b, a), 0)
        if nab + nba == 0:
            continue
        stat += (nab - nba) ** 2 / (nab + nba)
        df += 1
    p_value = float(stats.chi2.sf(stat, df)) if df else 1.0
    return ExchangeabilityReport("statistical", p_value > 0.01,
                                 p_value=p_value, samples=samples)


# -- flow description files -----------------------------------------------------


def flow_spec(region_spec_dict: dict, *, family: str = "balanced",
              leaf_rate: Fraction = Fraction(1),
              edges: Mapping[Edge, Fraction] | None = None) -> dict:
    spec: dict = {"region": region_spec_dict}
    if family == "balanced":
        spec["flow"] = {"family": "balanced",
                        "leaf_rate": _frac_str(Fraction(leaf_rate))}
    elif family == "edges":
        spec["flow"] = {"family": "edges",
                        "edges": sorted([c, p, _frac_str(Fraction(r))]
                                        for (c, p), r in edges.items())}
    else:
        raise ValueError(f"unknown flow family {family!r}")
    return spec


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def _parse_frac(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def build_flow_from_spec(spec: dict, region: DirectedTreeRegion) -> Flow:
    data = spec["flow"]
    if data["family"] == "balanced":
        return balanced_flow(region, _parse_frac(data["leaf_rate"]))
    rates = {(int(c), int(p)): _parse_frac(r) for c, p, r in data["edges"]}
    return Flow(rates)
