"""Finitely supported probability mass functions on an integer lattice.

Two weight representations are supported.  ``exact`` mode stores
:class:`fractions.Fraction` weights and makes every operation an identity
of rational arithmetic; it is the default for all correctness-critical
log-concavity checks.  ``logfloat`` mode stores log-probabilities as
floats and is meant for large instances; the two modes agree within
1e-9 on shared inputs.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import AlphaNotAboveOne, DisjointSupport, NonPositiveRate

EXACT = "exact"
LOGFLOAT = "logfloat"

#: admissible drift of total mass after exponentiation in logfloat mode
LOGFLOAT_MASS_TOL = 1e-12

Weight = Union[Fraction, float]


def _logsumexp(values: Sequence[float]) -> float:
    m = max(values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


@dataclass(frozen=True)
class IntPMF:
    """PMF supported on the contiguous lattice ``{base + i*step}``.

    ``weights[i]`` is the mass at ``base + i*step``: a positive Fraction
    in exact mode, a finite log-probability in logfloat mode.  The support
    is trimmed (first and last weights positive) and has no interior
    holes, so every stored weight is strictly positive.  Single-point
    PMFs are normalised to ``step == 1``.
    """

    base: int
    step: int
    weights: tuple
    mode: str = EXACT

    def __post_init__(self) -> None:
        if self.mode not in (EXACT, LOGFLOAT):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.step not in (1, 2):
            raise ValueError("step must be 1 or 2")
        if not self.weights:
            raise ValueError("empty support")
        if len(self.weights) == 1 and self.step != 1:
            object.__setattr__(self, "step", 1)
        if self.mode == EXACT:
            ws = tuple(Fraction(w) for w in self.weights)
            object.__setattr__(self, "weights", ws)
            if any(w <= 0 for w in ws):
                raise ValueError("exact weights must be strictly positive")
            if sum(ws) != 1:
                raise ValueError("exact weights must sum to one")
        else:
            ws = tuple(float(w) for w in self.weights)
            object.__setattr__(self, "weights", ws)
            if any(math.isinf(w) or math.isnan(w) for w in ws):
                raise ValueError("log-weights must be finite")
            mass = math.fsum(math.exp(w) for w in ws)
            if abs(mass - 1.0) > LOGFLOAT_MASS_TOL:
                raise ValueError(f"log-weights exponentiate to {mass}, not 1")

    # -- basic accessors ------------------------------------------------

    @property
    def top(self) -> int:
        return self.base + (len(self.weights) - 1) * self.step

    def support(self) -> range:
        return range(self.base, self.top + 1, self.step)

    def items(self) -> Iterator[tuple[int, Weight]]:
        return zip(self.support(), self.weights)

    def prob(self, k: int) -> Weight:
        """Mass at ``k`` in linear domain (0 outside the support)."""
        zero = Fraction(0) if self.mode == EXACT else 0.0
        if k < self.base or k > self.top or (k - self.base) % self.step:
            return zero
        w = self.weights[(k - self.base) // self.step]
        return w if self.mode == EXACT else math.exp(w)

    def probs(self) -> tuple:
        """All weights in linear domain, in support order."""
        if self.mode == EXACT:
            return self.weights
        return tuple(math.exp(w) for w in self.weights)

    def as_dict(self) -> dict[int, Weight]:
        return dict(zip(self.support(), self.probs()))

    def to_logfloat(self) -> "IntPMF":
        if self.mode == LOGFLOAT:
            return self
        return IntPMF(self.base, self.step,
                      tuple(math.log(w) for w in self.weights), LOGFLOAT)

    def is_dirac(self) -> bool:
        return len(self.weights) == 1

    def sampler(self, rng) -> "callable":
        """Return a closure drawing values with ``rng.random()``."""
        probs = [float(w) for w in self.probs()]
        cdf = []
        acc = 0.0
        for p in probs:
            acc += p
            cdf.append(acc)
        cdf[-1] = 1.0
        support = list(self.support())

        def draw() -> int:
            return support[bisect_right(cdf, rng.random())]

        return draw


def dirac(value: int, mode: str = EXACT) -> IntPMF:
    w = (Fraction(1),) if mode == EXACT else (0.0,)
    return IntPMF(value, 1, w, mode)


def from_pairs(pairs: Mapping[int, Weight] | Iterable[tuple[int, Weight]],
               mode: str = EXACT, normalize: bool = False) -> IntPMF:
    """Build a PMF from ``{point: linear weight}`` data.

    The points must form a contiguous lattice of step 1 or 2 once sorted.
    """
    d = dict(pairs)
    points = sorted(d)
    if not points:
        raise ValueError("no support points")
    if len(points) == 1:
        step = 1
    else:
        steps = {b - a for a, b in zip(points, points[1:])}
        if len(steps) != 1 or steps.pop() not in (1, 2):
            raise ValueError("support is not a contiguous step-1/2 lattice")
        step = points[1] - points[0]
    if mode == EXACT:
        ws = [Fraction(d[p]) for p in points]
        if normalize:
            total = sum(ws)
            ws = [w / total for w in ws]
        return IntPMF(points[0], step, tuple(ws), EXACT)
    ws = [float(d[p]) for p in points]
    if normalize:
        total = math.fsum(ws)
        ws = [w / total for w in ws]
    return IntPMF(points[0], step, tuple(math.log(w) for w in ws), LOGFLOAT)


# -- operations ---------------------------------------------------------


def convolve_step(p: IntPMF) -> IntPMF:
    """Convolve with the symmetric unit step (mass 1/2 at -1 and at +1).

    The result lives on the opposite parity class; its support gains one
    lattice site on each end.  Exact mode stays exact.
    """
    step = 2 if p.is_dirac() else p.step
    lo, hi = p.base - 1, p.top + 1
    if p.mode == EXACT:
        half = Fraction(1, 2)
        ws = tuple(half * (p.prob(k - 1) + p.prob(k + 1))
                   for k in range(lo, hi + 1, step))
        return IntPMF(lo, step, ws, EXACT)
    log_half = math.log(0.5)
    out = []
    for k in range(lo, hi + 1, step):
        terms = []
        for j in (k - 1, k + 1):
            if p.base <= j <= p.top and (j - p.base) % p.step == 0:
                terms.append(p.weights[(j - p.base) // p.step])
        out.append(log_half + _logsumexp(terms))
    return IntPMF(lo, step, tuple(out), LOGFLOAT)


def product_normalize(ps: Sequence[IntPMF]) -> IntPMF:
    """Pointwise product of PMFs on a common lattice, renormalised.

    Raises :class:`DisjointSupport` when the supports have no common
    point (including parity mismatch on step-2 lattices).
    """
    if not ps:
        raise ValueError("need at least one factor")
    mode = ps[0].mode
    if any(q.mode != mode for q in ps):
        raise ValueError("mixed weight modes in product")
    steps = {q.step for q in ps if not q.is_dirac()}
    if len(steps) > 1:
        raise ValueError("factors live on different lattices")
    step = steps.pop() if steps else 1
    if step == 2:
        parities = {q.base % 2 for q in ps}
        if len(parities) > 1:
            raise DisjointSupport("parity mismatch between factors")
    lo = max(q.base for q in ps)
    hi = min(q.top for q in ps)
    if lo > hi:
        raise DisjointSupport(f"empty support intersection [{lo}, {hi}]")
    points = range(lo, hi + 1, step)
    if mode == EXACT:
        ws = []
        for k in points:
            w = Fraction(1)
            for q in ps:
                w *= q.prob(k)
            ws.append(w)
        total = sum(ws)
        if total == 0:
            raise DisjointSupport("product has zero total mass")
        return IntPMF(lo, step, tuple(w / total for w in ws), EXACT)
    logs = []
    for k in points:
        acc = 0.0
        for q in ps:
            if k < q.base or k > q.top or (k - q.base) % q.step:
                acc = -math.inf
                break
            acc += q.weights[(k - q.base) // q.step]
        logs.append(acc)
    z = _logsumexp(logs)
    if z == -math.inf:
        raise DisjointSupport("product has zero total mass")
    out = [w - z for w in logs]
    if -math.inf in out:
        # trim end holes introduced by step-1/dirac overlap corner cases
        keep = [i for i, w in enumerate(out) if w > -math.inf]
        if keep != list(range(keep[0], keep[-1] + 1)):
            raise DisjointSupport("product support is not contiguous")
        return IntPMF(lo + keep[0] * step, step,
                      tuple(out[i] for i in keep), LOGFLOAT)
    return IntPMF(lo, step, tuple(out), LOGFLOAT)


def log_concavity_coefficient(p: IntPMF) -> Weight:
    """Strong log-concavity coefficient of ``p``.

    Returns ``min_k p(k)^2 / (p(k-s) p(k+s))`` over interior support
    points, where ``s`` is the lattice step; ``+inf`` when the support
    has at most two points.  ``p`` is alpha-strongly log-concave exactly
    when the returned value is >= alpha.
    """
    n = len(p.weights)
    if n <= 2:
        return math.inf
    if p.mode == EXACT:
        w = p.weights
        return min(w[i] * w[i] / (w[i - 1] * w[i + 1]) for i in range(1, n - 1))
    w = p.weights
    return math.exp(min(2 * w[i] - w[i - 1] - w[i + 1] for i in range(1, n - 1)))


def geometric_pmf(rate: Weight | None = None, eps: float = 1e-12, *,
                  ratio: Fraction | None = None, mode: str = EXACT) -> IntPMF:
    """Truncated geometric law: mass proportional to ``exp(-k*rate)`` on
    ``{0..K}`` with ``K`` the smallest cutoff whose untruncated tail mass
    is <= ``eps``; weights are renormalised.

    ``rate=inf`` yields a Dirac mass at 0.  In exact mode the law is
    parameterised by the rational step-down ratio ``exp(-rate)``: pass
    ``ratio`` directly for exact rational work, otherwise the float value
    of ``exp(-rate)`` is lifted to its exact binary fraction.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if ratio is None:
        if rate is None:
            raise ValueError("provide rate or ratio")
        if rate == math.inf:
            return dirac(0, mode)
        if not rate > 0:
            raise NonPositiveRate(f"rate {rate} is not positive")
        r_float = math.exp(-float(rate))
    else:
        if rate is not None:
            raise ValueError("provide rate or ratio, not both")
        ratio = Fraction(ratio)
        if ratio == 0:
            return dirac(0, mode)
        if not 0 < ratio < 1:
            raise NonPositiveRate(f"ratio {ratio} not in (0, 1)")
        r_float = float(ratio)
    k_max = max(0, math.ceil(math.log(eps) / math.log(r_float)) - 1)
    if mode == EXACT:
        r = Fraction(r_float) if ratio is None else ratio
        eps_f = Fraction(eps)
        # fix up the float estimate so that K is exactly the smallest
        # index with tail mass r^(K+1) <= eps
        while r ** (k_max + 1) > eps_f:
            k_max += 1
        while k_max > 0 and r ** k_max <= eps_f:
            k_max -= 1
        powers = [r ** k for k in range(k_max + 1)]
        total = sum(powers)
        return IntPMF(0, 1, tuple(w / total for w in powers), EXACT)
    rate_f = -math.log(r_float)
    logs = [-k * rate_f for k in range(k_max + 1)]
    z = _logsumexp(logs)
    return IntPMF(0, 1, tuple(w - z for w in logs), LOGFLOAT)


def moments(p: IntPMF) -> tuple[Weight, Weight]:
    """Mean and variance; exact rationals in exact mode."""
    if p.mode == EXACT:
        mean = sum(k * w for k, w in p.items())
        var = sum((k - mean) ** 2 * w for k, w in p.items())
        return mean, var
    probs = p.probs()
    mean = math.fsum(k * w for k, w in zip(p.support(), probs))
    var = math.fsum((k - mean) ** 2 * w for k, w in zip(p.support(), probs))
    return mean, var


def total_variation(p: IntPMF | Mapping[int, Weight],
                    q: IntPMF | Mapping[int, Weight]) -> Weight:
    """Total variation distance; points missing from a support count as 0.

    Mappings of linear-domain weights are accepted alongside PMFs, which
    makes empirical distributions (with possible support holes) directly
    comparable.
    """
    dp = p.as_dict() if isinstance(p, IntPMF) else dict(p)
    dq = q.as_dict() if isinstance(q, IntPMF) else dict(q)
    exact = all(isinstance(v, (Fraction, int)) for v in dp.values()) and \
        all(isinstance(v, (Fraction, int)) for v in dq.values())
    keys = set(dp) | set(dq)
    if exact:
        return sum(abs(Fraction(dp.get(k, 0)) - Fraction(dq.get(k, 0)))
                   for k in keys) / 2
    return math.fsum(abs(float(dp.get(k, 0.0)) - float(dq.get(k, 0.0)))
                     for k in keys) / 2.0


# -- log-concavity constants --------------------------------------------


def _cubic(x):
    return x ** 3 - 3 * x ** 2 - x - 1


@dataclass(frozen=True)
class LambdaConstant:
    """Real root of ``x^3 - 3x^2 - x - 1`` on [3, 4], with a certified
    rational bracket ``lower <= root <= upper`` from exact bisection."""

    value: float
    residual: float
    tolerance: float
    lower: Fraction
    upper: Fraction

    def __post_init__(self) -> None:
        if not 3 <= self.value <= 4:
            raise ValueError("root must lie in [3, 4]")
        if self.residual > self.tolerance:
            raise ValueError("residual exceeds the requested tolerance")
        if not (_cubic(self.lower) < 0 < _cubic(self.upper)):
            raise ValueError("bracket endpoints do not straddle the root")


def lambda_root(tol: float = 1e-9) -> LambdaConstant:
    """Bisection for the cubic's real root with exact rational endpoints.

    The returned float value has ``|value^3 - 3 value^2 - value - 1| <=
    tol``; the Fraction bracket certifies ``lower < root < upper`` by
    exact sign evaluation, which downstream exact comparisons rely on.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = Fraction(3), Fraction(4)
    for _ in range(4096):
        mid = (lo + hi) / 2
        if _cubic(mid) < 0:
            lo = mid
        else:
            hi = mid
        value = float(mid)
        residual = abs(_cubic(value))
        if residual <= tol and float(hi - lo) <= tol:
            return LambdaConstant(value, residual, tol, lo, hi)
    raise RuntimeError("bisection failed to reach tolerance")


def variance_bound_constant(alpha: Weight, step: int = 2) -> float:
    """Upper bound on the variance of any alpha-strongly log-concave PMF.

    With ``beta = log(alpha)/2`` per lattice step, the mass ``l`` steps
    away from the mode is at most ``exp(-beta*(l^2 - 1))``, so the
    variance is at most ``sum_l (step*l)^2 exp(-beta*(l^2 - 1))`` over all
    integers ``l``.  This documented member of the Gaussian-domination
    family is the bound used everywhere in the package; it is finite and
    nonincreasing in alpha.
    """
    a = float(alpha)
    if not a > 1:
        raise AlphaNotAboveOne(f"alpha {alpha} must exceed 1")
    if step not in (1, 2):
        raise ValueError("step must be 1 or 2")
    beta = 0.5 * math.log(a)
    total = 0.0
    l = 1
    while True:
        term = 2.0 * (step * l) ** 2 * math.exp(-beta * (l * l - 1))
        total += term
        if term <= 1e-18 * total:
            return total
        l += 1
