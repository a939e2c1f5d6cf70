"""Command-line front end.

Every subcommand accepts ``--seed``, ``--replicas``, ``--out`` and
``--format`` plus a JSON config file via ``--config`` whose keys fill in
any flag not given on the command line (flags win).  Output files are
deterministic for a fixed resolved config: exact values are written as
``p/q`` strings, floats with 17 significant digits, and wall-clock goes
to stderr only.

Exit codes: 0 success, 1 acceptance failure, 2 config/usage errors,
3 infeasible model, 4 size-cap exceeded.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import random
import sys
import time
from fractions import Fraction

from . import acceptance, flows, monotone
from .errors import (EmptyEdgeSet, EmptyInterval, EnumerationCapExceeded,
                     InfeasibleBoundary, InvalidFlow, MissingEdgeWeight,
                     NonPositiveRate, SizeCapExceeded)
from .homomorphisms import (certify_messages, exact_marginal,
                            glauber_marginal_counts, height_offset_demo,
                            marginal_variance_check)
from .pmf import moments, total_variation
from .records import ExperimentRecord, format_cell, write_records
from .seeding import derive_seed
from .trees import build_from_spec, build_regular_region, random_hom_boundary

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SIZE_CAP = 4


def _parse_boundary(text: str):
    if text.startswith("ramp:"):
        return "ramp", int(text.split(":", 1)[1])
    if "," in text:
        return [int(v) for v in text.split(",")]
    return int(text)


def _undirected_region(args):
    if getattr(args, "region", None):
        return build_from_spec(args.region)
    return build_regular_region(args.degree, args.depth, "undirected",
                                _parse_boundary(args.boundary))


def _directed_region(args):
    if getattr(args, "region", None):
        return build_from_spec(args.region)
    return build_regular_region(args.children, args.depth, "directed",
                                (0, -args.drop))


def _emit(args, config: dict, columns, records) -> None:
    data = write_records(args.out, config, columns, records, args.format)
    if args.out is None:
        sys.stdout.write(data.decode())


def _config_of(args, **extra) -> dict:
    skip = {"func", "out", "config"}
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in skip and not k.startswith("_") and v is not None}
    cfg.update(extra)
    return cfg


def _pmf_string(pmf) -> str:
    return ";".join(f"{k}:{format_cell(w)}" for k, w in pmf.items())


# -- subcommand handlers -------------------------------------------------------


def cmd_hom_marginal(args) -> int:
    region = _undirected_region(args)
    marginal, _ = exact_marginal(region, args.target)
    mean, var = moments(marginal)
    rec = ExperimentRecord("hom-marginal", {
        "target": args.target, "marginal": _pmf_string(marginal),
        "mean": mean, "variance": var,
    })
    _emit(args, _config_of(args), ["target", "marginal", "mean", "variance"], [rec])
    return EXIT_OK


def cmd_hom_certify(args) -> int:
    region = _undirected_region(args)
    _, table = exact_marginal(region, args.target)
    report = certify_messages(table)
    rec = ExperimentRecord("hom-certify", {
        "target": args.target,
        "messages": report.message_count,
        "min_coefficient": report.min_coefficient,
        "threshold": report.threshold,
        "status": "PASS" if report.passed else "FAIL",
    })
    _emit(args, _config_of(args),
          ["target", "messages", "min_coefficient", "threshold", "status"], [rec])
    return EXIT_OK


def cmd_hom_variance(args) -> int:
    region = _undirected_region(args)
    rng = random.Random(derive_seed(args.seed, "hom-variance"))
    records = []
    for i in range(args.replicas):
        sampled = random_hom_boundary(region, rng, rng.randint(-2, 2))
        check = marginal_variance_check(sampled, args.target)
        records.append(ExperimentRecord("hom-variance", {
            "replica": i, "variance": check.variance, "bound": check.bound,
            "status": "PASS" if check.passed else "FAIL",
        }))
    _emit(args, _config_of(args),
          ["replica", "variance", "bound", "status"], records)
    return EXIT_OK


def cmd_hom_glauber(args) -> int:
    region = _undirected_region(args)
    exact, _ = exact_marginal(region, args.target)
    counts = glauber_marginal_counts(region, args.target, args.samples,
                                     args.burn_in,
                                     derive_seed(args.seed, "hom-glauber"))
    empirical = {k: v / args.samples for k, v in sorted(counts.items())}
    tv = float(total_variation(
        empirical, {k: float(v) for k, v in exact.as_dict().items()}))
    rec = ExperimentRecord("hom-glauber", {
        "target": args.target, "samples": args.samples, "tv": tv,
        "empirical": ";".join(f"{k}:{v:.17g}" for k, v in empirical.items()),
        "exact": _pmf_string(exact),
    })
    _emit(args, _config_of(args),
          ["target", "samples", "tv", "empirical", "exact"], [rec])
    return EXIT_OK


def cmd_offset_demo(args) -> int:
    demo = height_offset_demo(args.degree, args.depth, args.replicas, args.seed)
    records = []
    for level, (m, expected, observed) in enumerate(
            zip(demo.level_edge_counts, demo.expected_increment_variance,
                demo.observed_mean_square_increment), start=1):
        records.append(ExperimentRecord("offset-demo-level", {
            "level": level, "edge_count": m,
            "expected_variance": expected, "observed_mean_square": observed,
        }))
    records.append(ExperimentRecord("offset-demo-histogram", {
        "histogram": ";".join(str(int(v)) for v in demo.fractional_histogram),
    }))
    _emit(args, _config_of(args),
          ["level", "edge_count", "expected_variance", "observed_mean_square",
           "histogram"], records)
    return EXIT_OK


def cmd_flow_validate(args) -> int:
    region = _directed_region(args)
    flow = flows.balanced_flow(region, Fraction(args.leaf_rate))
    if args.perturb_edge is not None:
        child = args.perturb_edge
        parent = region.parent[child]
        rates = dict(flow.rates)
        rates[(child, parent)] = rates[(child, parent)] + 1
        flow = flows.Flow(rates)
    report = flows.validate_flow(region, flow)
    rec = ExperimentRecord("flow-validate", {
        "edges": sum(1 for _ in region.edges()),
        "status": "VALID" if report.valid else "INVALID",
        "violations": ";".join(f"{v}:{format_cell(r)}"
                               for v, r in report.violations),
    })
    _emit(args, _config_of(args), ["edges", "status", "violations"], [rec])
    return EXIT_OK


def cmd_flow_sample(args) -> int:
    region = _directed_region(args)
    flow = flows.balanced_flow(region, Fraction(args.leaf_rate))
    stream = flows.sample_flow_measure(region, flow, args.eps,
                                       derive_seed(args.seed, "flow-sample"),
                                       anchor=args.anchor)
    sums: dict[tuple[int, int], float] = {e: 0.0 for e in region.edges()}
    for h in itertools.islice(stream, args.samples):
        for (c, p) in sums:
            sums[(c, p)] += h[p] - h[c]
    laws = flows.gradient_laws(region, flow, args.eps)
    records = []
    for edge in sorted(sums):
        exact_mean, _ = moments(laws[edge])
        records.append(ExperimentRecord("flow-sample", {
            "edge": f"{edge[0]}->{edge[1]}",
            "empirical_mean": sums[edge] / args.samples,
            "exact_mean": float(exact_mean),
        }))
    _emit(args, _config_of(args),
          ["edge", "empirical_mean", "exact_mean"], records)
    return EXIT_OK


def cmd_flow_localise(args) -> int:
    if args.family == "table":
        table = tuple(float(x) for x in args.table.split(","))
        spec = flows.RaySpec("table", table=table)
    else:
        spec = flows.RaySpec(args.family, base=Fraction(args.base),
                             growth=Fraction(args.growth))
    report = flows.localisation_test(spec, args.budget)
    rec = ExperimentRecord("flow-localise", {
        "family": args.family, "classification": report.classification,
        "partial_sum": report.partial_sum, "last_term": report.last_term,
        "terms_used": report.terms_used, "detail": report.detail,
    })
    _emit(args, _config_of(args),
          ["family", "classification", "partial_sum", "last_term",
           "terms_used", "detail"], [rec])
    return EXIT_OK


def cmd_flow_ray_variance(args) -> int:
    rates = [float(x) for x in args.rates.split(",")]
    exact = flows.ray_variance(rates=rates)
    chain = build_regular_region(1, len(rates), "directed", (0, 0))
    flow = flows.Flow({(v, v - 1): rates[v - 1]
                       for v in range(1, len(rates) + 1)})
    stream = flows.sample_flow_measure(chain, flow, 1e-12,
                                       derive_seed(args.seed, "ray-variance"))
    leaf = chain.vertex_count - 1
    values = [h[leaf] for h in itertools.islice(stream, args.samples)]
    mean = sum(values) / len(values)
    sample_var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    m4 = sum((v - mean) ** 4 for v in values) / len(values)
    sigma = math.sqrt(max(m4 - sample_var ** 2, 0.0) / len(values))
    rec = ExperimentRecord("flow-ray-variance", {
        "edges": len(rates), "exact": float(exact), "monte_carlo": sample_var,
        "three_sigma": 3 * sigma,
        "status": "PASS" if abs(sample_var - exact) <= 3 * sigma else "FAIL",
    })
    _emit(args, _config_of(args),
          ["edges", "exact", "monte_carlo", "three_sigma", "status"], [rec])
    return EXIT_OK


def cmd_flow_dlr(args) -> int:
    rng = random.Random(derive_seed(args.seed, "flow-dlr"))
    failures = 0
    worst = Fraction(0)
    for _ in range(args.replicas):
        m = rng.randint(2, 4)
        child_ratios = [Fraction(rng.randint(1, 9), rng.randint(10, 19))
                        for _ in range(m)]
        parent_ratio = math.prod(child_ratios, start=Fraction(1))
        child_heights = [rng.randint(-5, 5) for _ in range(m)]
        parent_height = max(child_heights) + rng.randint(0, 6)
        report = flows.dlr_single_site_check(parent_ratio, child_ratios,
                                             parent_height, child_heights)
        worst = max(worst, report.max_ratio_deviation)
        if not report.passed:
            failures += 1
    rec = ExperimentRecord("flow-dlr", {
        "replicas": args.replicas, "failures": failures,
        "max_deviation": worst,
        "status": "PASS" if failures == 0 else "FAIL",
    })
    _emit(args, _config_of(args),
          ["replicas", "failures", "max_deviation", "status"], [rec])
    return EXIT_OK


def cmd_mono_count(args) -> int:
    table = monotone.build_counting_table(args.children, args.depth, args.drop,
                                          args.mode)
    total = table.total()
    rec = ExperimentRecord("mono-count", {
        "total": str(total) if args.mode == "exact" else total,
        "child_zero": monotone.child_zero_probability(table),
    })
    _emit(args, _config_of(args), ["total", "child_zero"], [rec])
    return EXIT_OK


def cmd_mono_sample(args) -> int:
    table = monotone.build_counting_table(args.children, args.depth, args.drop)
    stream = monotone.ancestral_sampler(table, derive_seed(args.seed, "mono-sample"))
    region = table.region()
    depths = region.depths()
    hits = [0] * args.depth
    for h in itertools.islice(stream, args.replicas):
        for v, value in h.items():
            if value == 0 and 1 <= depths[v] <= args.depth - 1:
                hits[depths[v]] += 1
    per_level = [sum(1 for v in range(region.vertex_count) if depths[v] == j)
                 for j in range(args.depth)]
    records = []
    for j in range(1, args.depth):
        records.append(ExperimentRecord("mono-sample", {
            "depth": j,
            "empirical_zero": hits[j] / (args.replicas * per_level[j]),
            "exact_zero": monotone.zero_marginal_probability(table, j),
        }))
    _emit(args, _config_of(args), ["depth", "empirical_zero", "exact_zero"],
          records)
    return EXIT_OK


def cmd_mono_child_zero(args) -> int:
    table = monotone.build_counting_table(args.children, args.depth, args.drop)
    exact = monotone.child_zero_probability(table)
    bound = monotone.child_zero_lower_bound(args.children, args.depth, args.drop)
    rec = ExperimentRecord("mono-child-zero", {
        "exact": exact, "lower_bound": bound,
        "status": "PASS" if exact >= bound else "FAIL",
    })
    _emit(args, _config_of(args), ["exact", "lower_bound", "status"], [rec])
    return EXIT_OK


def cmd_frozen_region(args) -> int:
    result = monotone.frozen_region_experiment(
        args.children, args.depth, args.log_factor, args.replicas,
        derive_seed(args.seed, "frozen-region"))
    rec = ExperimentRecord("frozen-region", {
        "cutoff": result.cutoff, "analytic_bound": result.analytic_bound,
        "empirical": result.empirical, "three_sigma": 3 * result.sigma,
        "status": "PASS" if result.passed else "FAIL",
    })
    _emit(args, _config_of(args),
          ["cutoff", "analytic_bound", "empirical", "three_sigma", "status"],
          [rec])
    return EXIT_OK


def cmd_verify(args) -> int:
    ids = ([int(x) for x in args.criteria.split(",")]
           if args.criteria else None)
    start = time.perf_counter()
    results = acceptance.run_acceptance(args.seed, determinism=args.determinism,
                                        ids=ids)
    records = []
    for r in results:
        records.append(ExperimentRecord("verify", {
            "criterion": r.cid, "name": r.name,
            "status": "PASS" if r.passed else "FAIL",
            "details": json.dumps(acceptance._json_ready(r.details),
                                  sort_keys=True, separators=(",", ":")),
        }))
        print(f"  [{'PASS' if r.passed else 'FAIL'}] criterion {r.cid:2d}  {r.name}")
        print(f"         {r.runtime:8.1f}s", file=sys.stderr)
    if args.out is not None:
        write_records(args.out, _config_of(args),
                      ["criterion", "name", "status", "details"], records,
                      args.format)
    failed = [r.cid for r in results if not r.passed]
    total = time.perf_counter() - start
    print(f"verify: {len(results) - len(failed)}/{len(results)} criteria passed"
          f" ({total:.1f}s)", file=sys.stderr)
    if failed:
        print(f"failed criteria: {failed}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _add_common(sub, replicas: int | None = None) -> None:
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--replicas", type=int, default=replicas)
    sub.add_argument("--out", default=None)
    sub.add_argument("--format", choices=("csv", "json"), default=None)
    sub.add_argument("--config", default=None,
                     help="JSON file whose keys fill in unset flags")


def _add_undirected(sub) -> None:
    sub.add_argument("--degree", type=int, default=3)
    sub.add_argument("--depth", type=int, default=2)
    sub.add_argument("--boundary", default="0",
                     help="constant, comma list, or ramp:OFFSET")
    sub.add_argument("--target", type=int, default=0)


def _add_directed(sub) -> None:
    sub.add_argument("--children", type=int, default=2)
    sub.add_argument("--depth", type=int, default=3)
    sub.add_argument("--drop", type=int, default=2,
                     help="boundary height at the deepest layer is -drop")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeheights",
        description="Exact inference, counting and Monte Carlo for integer "
                    "height functions on trees")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    specs = [
        ("hom-marginal", cmd_hom_marginal, (_add_undirected,), {}),
        ("hom-certify", cmd_hom_certify, (_add_undirected,), {}),
        ("hom-variance", cmd_hom_variance, (_add_undirected,), {"replicas": 100}),
        ("hom-glauber", cmd_hom_glauber, (_add_undirected,), {}),
        ("offset-demo", cmd_offset_demo, (), {"replicas": 10_000}),
        ("flow-validate", cmd_flow_validate, (_add_directed,), {}),
        ("flow-sample", cmd_flow_sample, (_add_directed,), {}),
        ("flow-localise", cmd_flow_localise, (), {}),
        ("flow-ray-variance", cmd_flow_ray_variance, (), {}),
        ("flow-dlr", cmd_flow_dlr, (), {"replicas": 10_000}),
        ("mono-count", cmd_mono_count, (_add_directed,), {}),
        ("mono-sample", cmd_mono_sample, (_add_directed,), {"replicas": 10_000}),
        ("mono-child-zero", cmd_mono_child_zero, (_add_directed,), {}),
        ("frozen-region", cmd_frozen_region, (_add_directed,), {"replicas": 1000}),
        ("verify", cmd_verify, (), {}),
    ]
    for name, func, extras, kw in specs:
        sub = subs.add_parser(name)
        _add_common(sub, kw.get("replicas"))
        for extra in extras:
            extra(sub)
        sub.set_defaults(func=func)

    for name, sub in subs.choices.items():
        if name == "hom-glauber":
            sub.add_argument("--samples", type=int, default=100_000)
            sub.add_argument("--burn-in", type=int, default=200)
        elif name == "offset-demo":
            sub.add_argument("--degree", type=int, default=3)
            sub.add_argument("--depth", type=int, default=20)
        elif name in ("flow-validate", "flow-sample"):
            sub.add_argument("--leaf-rate", default="1")
            if name == "flow-validate":
                sub.add_argument("--perturb-edge", type=int, default=None,
                                 help="add 1 to this child's parent edge "
                                      "(negative control)")
            else:
                sub.add_argument("--samples", type=int, default=10_000)
                sub.add_argument("--eps", type=float, default=1e-12)
                sub.add_argument("--anchor", type=int, default=None)
        elif name == "flow-localise":
            sub.add_argument("--family",
                             choices=("constant", "geometric", "table"),
                             default="geometric")
            sub.add_argument("--base", default="1")
            sub.add_argument("--growth", default="2")
            sub.add_argument("--table", default="")
            sub.add_argument("--budget", type=int, default=256)
        elif name == "flow-ray-variance":
            sub.add_argument("--rates", default="1,1,1,1,1")
            sub.add_argument("--samples", type=int, default=100_000)
        elif name == "mono-count":
            sub.add_argument("--mode", choices=("exact", "logfloat"),
                             default="exact")
        elif name == "frozen-region":
            sub.add_argument("--log-factor", type=float, default=3.0)
        elif name == "verify":
            sub.add_argument("--determinism",
                             choices=("full", "subset", "off"), default="full")
            sub.add_argument("--criteria", default=None,
                             help="comma-separated criterion ids (default all)")
    return parser


def _merge_config(args) -> None:
    if not getattr(args, "config", None):
        if args.seed is None:
            args.seed = acceptance.DEFAULT_MASTER_SEED
        if args.format is None:
            args.format = "csv"
        return
    with open(args.config, encoding="utf-8") as fh:
        config = json.load(fh)
    for key, value in config.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)
    if args.seed is None:
        args.seed = acceptance.DEFAULT_MASTER_SEED
    if args.format is None:
        args.format = "csv"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        rc = args.func(args)
    except (InfeasibleBoundary, EmptyInterval, InvalidFlow, EmptyEdgeSet,
            MissingEdgeWeight, NonPositiveRate) as exc:
        print(f"infeasible model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SizeCapExceeded, EnumerationCapExceeded) as exc:
        print(f"size cap: {exc}", file=sys.stderr)
        return EXIT_SIZE_CAP
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wall-clock: {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return rc


if __name__ == "__main__":
    sys.exit(main())
