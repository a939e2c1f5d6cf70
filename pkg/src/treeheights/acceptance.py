"""Acceptance suite: one runner per criterion, shared by CLI and tests.

Every runner pins its budgets and tolerances in code; results carry a
details mapping that serializes deterministically (no timing data), so
two runs with the same master seed produce byte-identical reports.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import flows, monotone
from .constants import load_reference_constants, parse_fraction
from .errors import EnumerationCapExceeded
from .homomorphisms import (certify_messages, exact_marginal,
                            glauber_marginal_counts, height_offset_demo,
                            marginal_variance_check)
from .pmf import (EXACT, IntPMF, convolve_step, dirac, from_pairs,
                  geometric_pmf, lambda_root, log_concavity_coefficient,
                  moments, total_variation)
from .records import _json_ready
from .seeding import derive_seed
from .trees import (build_regular_region, count_heights, enumerate_heights,
                    random_hom_boundary, random_hom_region,
                    validate_hom_boundary)

DEFAULT_MASTER_SEED = 20250810


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    details: dict
    runtime: float = field(default=0.0, compare=False)


# -- randomized instance generators ------------------------------------------


def random_slc_pmf(rng: random.Random, coefficient: Fraction,
                   max_support: int = 41, step: int = 2) -> IntPMF:
    """Exact-mode PMF whose log-concavity coefficient is >= ``coefficient``
    by construction: successive weight ratios shrink by at least that
    factor, with a randomly placed mode and random rational jitter."""
    size = rng.randint(1, max_support)
    shift = step * rng.randint(-3, 3)
    if size == 1:
        return dirac(shift)
    c = Fraction(coefficient)
    mode_index = rng.randint(0, size - 1)
    ratio = c ** mode_index * Fraction(rng.randint(8, 32), 16)
    weights = [Fraction(1)]
    for _ in range(size - 1):
        weights.append(weights[-1] * ratio)
        ratio /= c * Fraction(rng.randint(16, 32), 16)
    total = sum(weights)
    return IntPMF(shift - step * mode_index, step,
                  tuple(w / total for w in weights), EXACT)


def _random_ratio(rng: random.Random) -> Fraction:
    den = rng.randint(7, 40)
    return Fraction(rng.randint(1, den - 1), den)


# -- criterion 1: oracle equivalence ------------------------------------------


def criterion_oracle_equivalence(seed: int) -> CriterionResult:
    rng = random.Random(derive_seed(seed, "c1"))
    start = time.perf_counter()
    regions = 0
    marginals = 0
    mismatches = 0
    max_abs_boundary = 0
    while regions < 200:
        region = random_hom_region(rng, 16)
        region = random_hom_boundary(region, rng, rng.randint(-1, 1))
        if not validate_hom_boundary(region):
            continue
        regions += 1
        max_abs_boundary = max(max_abs_boundary,
                               max(abs(b) for b in region.boundary_heights.values()))
        counts: dict[int, dict[int, int]] = {x: {} for x in region.interior}
        for h in enumerate_heights(region, "hom"):
            for x in counts:
                counts[x][h[x]] = counts[x].get(h[x], 0) + 1
        for x in sorted(region.interior):
            oracle = from_pairs(counts[x], normalize=True)
            computed, _ = exact_marginal(region, x, validate=False)
            marginals += 1
            if oracle != computed:
                mismatches += 1
    runtime = time.perf_counter() - start
    passed = mismatches == 0 and max_abs_boundary <= 4 and runtime < 60.0
    details = {
        "regions": regions,
        "marginals_compared": marginals,
        "mismatches": mismatches,
        "max_abs_boundary": max_abs_boundary,
        "runtime_limit_s": 60.0,
    }
    return CriterionResult(1, "hom-oracle-equivalence", passed, details, runtime)


# -- criterion 2: root certification and convolution lemma --------------------


def criterion_root_certification(seed: int) -> CriterionResult:
    lam = lambda_root(1e-9)

    def cubic(x):
        return x ** 3 - 3 * x ** 2 - x - 1

    bracket_ok = cubic(Fraction(3)) == -4 and cubic(Fraction(4)) == 11
    value_ok = 3.3829 < lam.value < 3.3831 and lam.residual <= 1e-9
    stored = load_reference_constants()
    frozen_ok = (parse_fraction(stored["lambda_lower"]) == lam.lower
                 and abs(stored["lambda_value"] - lam.value) < 1e-12)

    rng = random.Random(derive_seed(seed, "c2"))
    generation_floor = lam.upper * lam.upper  # certainly above the true square
    threshold = lam.lower
    trials = 10_000
    counterexamples = 0
    for _ in range(trials):
        p = random_slc_pmf(rng, generation_floor, max_support=41, step=2)
        if log_concavity_coefficient(convolve_step(p)) < threshold:
            counterexamples += 1
    passed = bracket_ok and value_ok and frozen_ok and counterexamples == 0
    details = {
        "lambda": lam.value,
        "residual": lam.residual,
        "bracket_signs_ok": bracket_ok,
        "frozen_constants_ok": frozen_ok,
        "trials": trials,
        "counterexamples": counterexamples,
        "certified_lower": lam.lower,
        "certified_upper": lam.upper,
    }
    return CriterionResult(2, "slc-root-certification", passed, details)


# -- criterion 3: message certification and variance bound --------------------


_BALL_SHAPES = [(d, n) for d in (3, 4, 5) for n in (1, 2, 3, 4, 5)]


def criterion_message_certification(seed: int) -> CriterionResult:
    from .trees import regular_tree_size

    rng = random.Random(derive_seed(seed, "c3"))
    weights = [1.0 / regular_tree_size(d, n, "undirected")
               for d, n in _BALL_SHAPES]
    instances = 10_000
    cert_failures = 0
    var_failures = 0
    max_variance = 0.0
    min_coefficient = math.inf
    for i in range(instances):
        if i % 2 == 0:
            d, n = rng.choices(_BALL_SHAPES, weights)[0]
            region = build_regular_region(d, n, "undirected", 0)
        else:
            region = random_hom_region(rng, rng.randint(8, 32))
        region = random_hom_boundary(region, rng, rng.randint(-2, 2))
        x = rng.choice(sorted(region.interior))
        marginal, table = exact_marginal(region, x, validate=False)
        report = certify_messages(table)
        if not report.passed:
            cert_failures += 1
        if report.min_coefficient < min_coefficient:
            min_coefficient = report.min_coefficient
        check = marginal_variance_check(region, x)
        _, var = moments(marginal)
        max_variance = max(max_variance, float(var))
        if not check.passed:
            var_failures += 1
    passed = cert_failures == 0 and var_failures == 0
    details = {
        "instances": instances,
        "certification_failures": cert_failures,
        "variance_failures": var_failures,
        "min_message_coefficient": float(min_coefficient),
        "max_marginal_variance": max_variance,
        "variance_bound": load_reference_constants()["variance_bound"],
    }
    return CriterionResult(3, "message-certification-variance", passed, details)


# -- criterion 4: Glauber versus exact marginals -------------------------------


def _glauber_fixtures(seed: int):
    rng = random.Random(derive_seed(seed, "c4-fixtures"))
    fixtures = [
        build_regular_region(3, 1, "undirected", 0),
        build_regular_region(3, 2, "undirected", 0),
        build_regular_region(3, 2, "undirected", ("ramp", -2)),
        build_regular_region(4, 2, "undirected", 0),
        build_regular_region(5, 1, "undirected", 0),
        build_regular_region(3, 1, "undirected", [0, 0, 2]),  # frozen
        build_regular_region(3, 2, "undirected", [0, 0, 0, 2, 2, 0]),
        build_regular_region(4, 2, "undirected", ("ramp", 0)),
    ]
    while len(fixtures) < 10:
        region = random_hom_region(rng, 14)
        region = random_hom_boundary(region, rng, 0)
        if len(region.interior) <= 10 and validate_hom_boundary(region):
            fixtures.append(region)
    return fixtures


def criterion_glauber_vs_exact(seed: int) -> CriterionResult:
    start = time.perf_counter()
    samples = 1_000_000
    burn_in = 200
    tol = 0.02
    distances = []
    for i, region in enumerate(_glauber_fixtures(seed)):
        assert len(region.interior) <= 10
        x = 0 if 0 in region.interior else sorted(region.interior)[0]
        exact, _ = exact_marginal(region, x)
        counts = glauber_marginal_counts(region, x, samples, burn_in,
                                         derive_seed(seed, "c4-chain", i))
        empirical = {k: v / samples for k, v in counts.items()}
        distances.append(float(total_variation(
            empirical, {k: float(v) for k, v in exact.as_dict().items()})))
    runtime = time.perf_counter() - start
    passed = max(distances) <= tol and runtime < 300.0
    details = {
        "fixtures": len(distances),
        "samples_per_fixture": samples,
        "tv_tolerance": tol,
        "max_tv": max(distances),
        "tv_distances": distances,
        "runtime_limit_s": 300.0,
    }
    return CriterionResult(4, "glauber-vs-exact", passed, details, runtime)


# -- criterion 5: flow identities ----------------------------------------------


def _oracle_min_pmf(ratios: list[Fraction], support_len: int) -> IntPMF:
    """Independent tail-product construction of the law of the minimum,
    restricted and renormalised to {0..K}: P(min >= k) is the product of
    the individual untruncated tails r_i^k."""
    def tail(k: int) -> Fraction:
        out = Fraction(1)
        for r in ratios:
            out *= Fraction(r) ** k
        return out

    upper = tail(support_len)
    ws = tuple((tail(k) - tail(k + 1)) / (1 - upper)
               for k in range(support_len))
    return IntPMF(0, 1, ws, EXACT)


def criterion_flow_identities(seed: int) -> CriterionResult:
    rng = random.Random(derive_seed(seed, "c5"))
    eps = 1e-9

    min_law_failures = 0
    ratio_sets = [[Fraction(1, 2), Fraction(1, 2)]]
    ratio_sets += [[_random_ratio(rng) for _ in range(rng.randint(1, 4))]
                   for _ in range(10)]
    for ratios in ratio_sets:
        law = flows.min_gradient_law(ratios=ratios, eps=eps)
        oracle = _oracle_min_pmf(ratios, len(law.weights))
        prod = Fraction(1)
        for r in ratios:
            prod *= Fraction(r)
        tail_identity = all(
            math.prod([Fraction(r) ** k for r in ratios]) == prod ** k
            for k in range(len(law.weights) + 1))
        if law != oracle or not tail_identity:
            min_law_failures += 1

    dlr_trials = 10_000
    dlr_failures = 0
    for _ in range(dlr_trials):
        m = rng.randint(2, 4)
        child_ratios = [_random_ratio(rng) for _ in range(m)]
        parent_ratio = math.prod(child_ratios, start=Fraction(1))
        child_heights = [rng.randint(-5, 5) for _ in range(m)]
        parent_height = max(child_heights) + rng.randint(0, 6)
        report = flows.dlr_single_site_check(parent_ratio, child_ratios,
                                             parent_height, child_heights)
        if not report.passed:
            dlr_failures += 1
    # negative control: breaking the flow condition must break uniformity
    control = flows.dlr_single_site_check(
        Fraction(1, 2), [Fraction(1, 3), Fraction(1, 3)], 3, [0, 0])
    negative_ok = not control.passed

    chain = build_regular_region(1, 5, "directed", (0, 0))
    flow = flows.Flow({e: Fraction(1) for e in chain.edges()})
    exact_var = flows.ray_variance(rates=[1.0] * 5)
    n_samples = 100_000
    stream = flows.sample_flow_measure(chain, flow, 1e-12,
                                       derive_seed(seed, "c5-ray"))
    leaf = chain.vertex_count - 1
    draws = np.fromiter((h[leaf] for h in itertools.islice(stream, n_samples)),
                        dtype=float, count=n_samples)
    sample_var = float(draws.var(ddof=1))
    centered = draws - draws.mean()
    m4 = float((centered ** 4).mean())
    sigma_var = math.sqrt(max(m4 - sample_var ** 2, 0.0) / n_samples)
    ray_ok = abs(sample_var - exact_var) <= 3 * sigma_var

    passed = (min_law_failures == 0 and dlr_failures == 0 and negative_ok
              and ray_ok)
    details = {
        "min_law_sets": len(ratio_sets),
        "min_law_failures": min_law_failures,
        "dlr_trials": dlr_trials,
        "dlr_failures": dlr_failures,
        "dlr_negative_control_ok": negative_ok,
        "ray_exact_variance": exact_var,
        "ray_sample_variance": sample_var,
        "ray_three_sigma": 3 * sigma_var,
    }
    return CriterionResult(5, "flow-identities", passed, details)


# -- criterion 6: localisation classification ----------------------------------


def criterion_localisation(seed: int) -> CriterionResult:
    del seed  # fully deterministic
    budget = 256
    constant = flows.localisation_test(
        flows.RaySpec("constant", base=Fraction(1, 2)), budget)
    geometric = flows.localisation_test(
        flows.RaySpec("geometric", base=Fraction(1), growth=Fraction(2)), budget)
    square_table = flows.RaySpec(
        "table", table=tuple(2 * math.log(g + 1) for g in range(budget)))
    square = flows.localisation_test(square_table, budget)
    harmonic_table = flows.RaySpec(
        "table", table=tuple(math.log(g + 1) for g in range(budget)))
    harmonic = flows.localisation_test(harmonic_table, budget)
    passed = (constant.classification == flows.DELOCALISED
              and geometric.classification == flows.LOCALISED
              and square.classification == flows.LOCALISED
              and harmonic.classification == flows.UNDECIDED)
    details = {
        "constant": constant.classification,
        "geometric_factor_2": geometric.classification,
        "inverse_square_table": square.classification,
        "harmonic_table": harmonic.classification,
        "budget": budget,
    }
    return CriterionResult(6, "localisation-criterion", passed, details)


# -- criterion 7: child-zero bound and counting --------------------------------


def criterion_child_zero_bound(seed: int) -> CriterionResult:
    del seed
    bound_failures = 0
    cases = 0
    brute_checked = 0
    brute_failures = 0
    for d in (2, 3):
        for n in range(2, 11):
            for k in range(0, 11):
                table = monotone.build_counting_table(d, n, k)
                cases += 1
                exact = monotone.child_zero_probability(table)
                if exact < monotone.child_zero_lower_bound(d, n, k):
                    bound_failures += 1
                try:
                    brute = count_heights(table.region(), "monotone",
                                          cap=200_000)
                except EnumerationCapExceeded:
                    continue
                brute_checked += 1
                if brute != table.total():
                    brute_failures += 1
    passed = bound_failures == 0 and brute_failures == 0 and brute_checked > 0
    details = {
        "cases": cases,
        "bound_failures": bound_failures,
        "bruteforce_cases": brute_checked,
        "bruteforce_failures": brute_failures,
        "enumeration_cap": 200_000,
    }
    return CriterionResult(7, "child-zero-bound", passed, details)


# -- criterion 8: finite-volume freezing ----------------------------------------


def criterion_finite_volume(seed: int) -> CriterionResult:
    result = monotone.frozen_region_experiment(2, 12, 3.0, 1000,
                                               derive_seed(seed, "c8"))
    trend = []
    for n in (4, 6, 8, 10):
        table = monotone.build_counting_table(2, n, n)
        trend.append(monotone.zero_marginal_probability(table, 2))
    monotone_ok = all(a <= b for a, b in zip(trend, trend[1:]))
    passed = result.passed and monotone_ok
    details = {
        "cutoff_depth": result.cutoff,
        "analytic_bound": result.analytic_bound,
        "empirical": result.empirical,
        "replicas": result.replicas,
        "three_sigma": 3 * result.sigma,
        "depth2_zero_trend": [float(t) for t in trend],
        "trend_nondecreasing": monotone_ok,
    }
    return CriterionResult(8, "finite-volume-freezing", passed, details)


# -- criterion 9: level-average martingale --------------------------------------


def criterion_martingale_demo(seed: int) -> CriterionResult:
    replicas = 10_000
    demo = height_offset_demo(3, 20, replicas, derive_seed(seed, "c9"))
    variance_ok = True
    worst_z = 0.0
    for m, observed in zip(demo.level_edge_counts,
                           demo.observed_mean_square_increment):
        # estimator variance of the mean of squared averages of m coins
        sigma = math.sqrt((2 * m - 2) / m ** 3 / replicas) if m > 1 else 0.0
        z = abs(observed - 1.0 / m) / sigma if sigma else 0.0
        worst_z = max(worst_z, z)
        if z > 3.0:
            variance_ok = False
    hist = demo.fractional_histogram
    hist_ok = hist.max() <= 0.9 * replicas
    anchored = bool(np.all(demo.level_averages[:, 0] == 0.0))
    passed = variance_ok and hist_ok and anchored
    details = {
        "replicas": replicas,
        "depth": 20,
        "worst_increment_z": worst_z,
        "max_histogram_mass": float(hist.max()) / replicas,
        "histogram_threshold": 0.9,
        "anchored_at_zero": anchored,
    }
    return CriterionResult(9, "level-average-martingale", passed, details)


# -- orchestration ---------------------------------------------------------------


_RUNNERS = {
    1: criterion_oracle_equivalence,
    2: criterion_root_certification,
    3: criterion_message_certification,
    4: criterion_glauber_vs_exact,
    5: criterion_flow_identities,
    6: criterion_localisation,
    7: criterion_child_zero_bound,
    8: criterion_finite_volume,
    9: criterion_martingale_demo,
}


def run_criteria(seed: int, ids=None) -> list[CriterionResult]:
    results = []
    for cid in sorted(ids or _RUNNERS):
        start = time.perf_counter()
        result = _RUNNERS[cid](seed)
        result.runtime = time.perf_counter() - start
        results.append(result)
    return results


def serialize_results(results) -> bytes:
    payload = [{"cid": r.cid, "name": r.name, "passed": r.passed,
                "details": _json_ready(r.details)} for r in results]
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def run_acceptance(seed: int = DEFAULT_MASTER_SEED, *, determinism: str = "full",
                   ids=None) -> list[CriterionResult]:
    """Run criteria 1-9 and, unless disabled, re-run them to verify that
    the serialized report is byte-identical (criterion 10).

    ``determinism="full"`` repeats every requested criterion;
    ``"subset"`` repeats a representative stochastic subset to bound the
    runtime; ``"off"`` skips criterion 10.
    """
    results = run_criteria(seed, ids)
    if determinism == "off":
        return results
    if determinism == "full":
        repeat_ids = sorted(ids or _RUNNERS)
    elif determinism == "subset":
        repeat_ids = [c for c in (5, 8, 9) if ids is None or c in ids]
    else:
        raise ValueError(f"unknown determinism scope {determinism!r}")
    start = time.perf_counter()
    first = [r for r in results if r.cid in repeat_ids]
    second = run_criteria(seed, repeat_ids)
    identical = serialize_results(first) == serialize_results(second)
    results.append(CriterionResult(
        10, "determinism", identical,
        {"scope": determinism, "criteria_repeated": repeat_ids,
         "byte_identical": identical},
        time.perf_counter() - start))
    return results
