"""Finite tree regions with boundary data, plus brute-force enumeration.

A region is a finite tree whose vertex set splits into an interior and
a boundary; boundary vertices carry fixed integer heights.  Vertices are
dense integer indices in deterministic BFS order from a distinguished
root, which keeps enumeration and seeding reproducible.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import EnumerationCapExceeded, SizeCapExceeded

#: a full assignment of heights to region vertices
HeightAssignment = dict[int, int]

DEFAULT_VERTEX_CAP = 200_000
DEFAULT_ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    reason: str = ""
    witness: tuple = ()

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True)
class TreeRegion:
    """Undirected finite tree with interior set and boundary heights."""

    neighbors: tuple[tuple[int, ...], ...]
    interior: frozenset[int]
    boundary_heights: dict[int, int]

    def __post_init__(self) -> None:
        n = len(self.neighbors)
        object.__setattr__(self, "neighbors",
                           tuple(tuple(adj) for adj in self.neighbors))
        object.__setattr__(self, "interior", frozenset(self.interior))
        object.__setattr__(self, "boundary_heights", dict(self.boundary_heights))
        edge_count = sum(len(adj) for adj in self.neighbors)
        if edge_count != 2 * (n - 1):
            raise ValueError("vertex/edge counts do not form a tree")
        for v, adj in enumerate(self.neighbors):
            for u in adj:
                if not 0 <= u < n or v not in self.neighbors[u]:
                    raise ValueError(f"asymmetric adjacency at {v}-{u}")
        seen = self._bfs_reach(0)
        if len(seen) != n:
            raise ValueError("region graph is not connected")
        boundary = set(self.boundary_heights)
        if self.interior & boundary:
            raise ValueError("interior and boundary overlap")
        if self.interior | boundary != set(range(n)):
            raise ValueError("every vertex must be interior or carry a height")

    def _bfs_reach(self, root: int) -> set[int]:
        seen = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in self.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen

    @property
    def vertex_count(self) -> int:
        return len(self.neighbors)

    @property
    def boundary(self) -> tuple[int, ...]:
        return tuple(sorted(self.boundary_heights))

    def edges(self) -> Iterator[tuple[int, int]]:
        for v, adj in enumerate(self.neighbors):
            for u in adj:
                if v < u:
                    yield v, u

    def distances_from(self, source: int) -> list[int]:
        dist = [-1] * self.vertex_count
        dist[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for u in self.neighbors[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return dist

    def bfs_order(self, root: int = 0) -> list[int]:
        order = [root]
        seen = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in self.neighbors[v]:
                if u not in seen:
                    seen.add(u)
                    order.append(u)
                    queue.append(u)
        return order

    def is_irreducible(self) -> bool:
        """True when every interior vertex has degree at least three."""
        return all(len(self.neighbors[v]) >= 3 for v in self.interior)


@dataclass(frozen=True)
class DirectedTreeRegion:
    """Finite truncation of a directed tree (edges point child -> parent)."""

    parent: tuple
    children: tuple[tuple[int, ...], ...]
    interior: frozenset[int]
    boundary_heights: dict[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parent", tuple(self.parent))
        object.__setattr__(self, "children",
                           tuple(tuple(c) for c in self.children))
        object.__setattr__(self, "interior", frozenset(self.interior))
        object.__setattr__(self, "boundary_heights", dict(self.boundary_heights))
        n = len(self.parent)
        roots = [v for v in range(n) if self.parent[v] is None]
        if len(roots) != 1:
            raise ValueError("directed region must have exactly one root")
        for v in range(n):
            p = self.parent[v]
            if p is not None and v not in self.children[p]:
                raise ValueError(f"parent/children mismatch at {v}")
            for c in self.children[v]:
                if self.parent[c] != v:
                    raise ValueError(f"parent/children mismatch under {v}")
        seen = set()
        queue = deque(roots)
        while queue:
            v = queue.popleft()
            seen.add(v)
            queue.extend(self.children[v])
        if len(seen) != n:
            raise ValueError("directed region is not a single tree")
        boundary = set(self.boundary_heights)
        if self.interior & boundary:
            raise ValueError("interior and boundary overlap")
        if self.interior | boundary != set(range(n)):
            raise ValueError("every vertex must be interior or carry a height")

    @property
    def root(self) -> int:
        return next(v for v in range(len(self.parent)) if self.parent[v] is None)

    @property
    def vertex_count(self) -> int:
        return len(self.parent)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Directed edges as (child, parent) pairs."""
        for v, p in enumerate(self.parent):
            if p is not None:
                yield v, p

    def depths(self) -> list[int]:
        out = [0] * self.vertex_count
        queue = deque([self.root])
        while queue:
            v = queue.popleft()
            for c in self.children[v]:
                out[c] = out[v] + 1
                queue.append(c)
        return out

    def topological_order(self) -> list[int]:
        order = [self.root]
        queue = deque([self.root])
        while queue:
            v = queue.popleft()
            for c in self.children[v]:
                order.append(c)
                queue.append(c)
        return order


Region = TreeRegion | DirectedTreeRegion


# -- builders -------------------------------------------------------------


def regular_tree_size(branching: int, depth: int, kind: str) -> int:
    if kind == "directed":
        return sum(branching ** j for j in range(depth + 1))
    # undirected: root has `branching` neighbors, others branching-1 children
    if depth == 0:
        return 1
    total, layer = 1, branching
    for _ in range(depth):
        total += layer
        layer *= branching - 1
    return total


def build_regular_region(branching: int, depth: int, kind: str = "undirected",
                         boundary=0, vertex_cap: int = DEFAULT_VERTEX_CAP):
    """Truncate the regular tree to the given depth.

    ``kind="undirected"``: ``branching`` is the degree (>= 3 for the
    irreducible setting); the outermost layer is the boundary and
    ``boundary`` is a constant height, a per-vertex list in BFS order, or
    ``("ramp", offset)`` which assigns ``offset + distance to the first
    boundary vertex`` (always a valid restriction of a homomorphism).

    ``kind="directed"``: ``branching`` is the children count per vertex;
    the root and the deepest layer are boundary and ``boundary`` is a
    ``(root_height, leaf_height)`` pair.
    """
    if kind not in ("undirected", "directed"):
        raise ValueError(f"unknown region kind {kind!r}")
    if depth < 0 or branching < (1 if kind == "directed" else 2):
        raise ValueError("bad branching/depth")
    size = regular_tree_size(branching, depth, kind)
    if size > vertex_cap:
        raise SizeCapExceeded(f"{size} vertices exceed cap {vertex_cap}")

    if kind == "directed":
        parent: list = [None]
        children: list[list[int]] = [[]]
        layer = [0]
        for _ in range(depth):
            new_layer = []
            for v in layer:
                for _ in range(branching):
                    u = len(parent)
                    parent.append(v)
                    children.append([])
                    children[v].append(u)
                    new_layer.append(u)
            layer = new_layer
        depths = [0] * len(parent)
        for v, p in enumerate(parent):
            if p is not None:
                depths[v] = depths[p] + 1
        leaves = [v for v in range(len(parent)) if depths[v] == depth]
        root_h, leaf_h = (boundary if isinstance(boundary, (tuple, list))
                          else (0, boundary))
        heights = {0: int(root_h)}
        for v in leaves:
            heights[v] = int(leaf_h)
        interior = set(range(len(parent))) - set(heights)
        return DirectedTreeRegion(tuple(parent), tuple(tuple(c) for c in children),
                                  frozenset(interior), heights)

    adj: list[list[int]] = [[]]
    layer = [0]
    for d in range(depth):
        new_layer = []
        for v in layer:
            kids = branching if d == 0 else branching - 1
            for _ in range(kids):
                u = len(adj)
                adj.append([v])
                adj[v].append(u)
                new_layer.append(u)
        layer = new_layer
    boundary_vertices = layer if depth > 0 else [0]
    heights = _hom_boundary_heights(adj, boundary_vertices, boundary)
    interior = set(range(len(adj))) - set(heights)
    return TreeRegion(tuple(tuple(a) for a in adj), frozenset(interior), heights)


def _hom_boundary_heights(adj, boundary_vertices, rule) -> dict[int, int]:
    if isinstance(rule, int):
        return {v: rule for v in boundary_vertices}
    if isinstance(rule, (tuple, list)) and rule and rule[0] == "ramp":
        offset = int(rule[1])
        v0 = boundary_vertices[0]
        dist = [-1] * len(adj)
        dist[v0] = 0
        queue = deque([v0])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        return {v: offset + dist[v] for v in boundary_vertices}
    values = list(rule)
    if len(values) != len(boundary_vertices):
        raise ValueError("boundary list length mismatch")
    return {v: int(h) for v, h in zip(boundary_vertices, values)}


def random_hom_region(rng, max_vertices: int = 16,
                      degrees: tuple[int, int] = (3, 5)) -> TreeRegion:
    """Random tree whose interior vertices carry full degree in ``degrees``.

    Grows breadth-first; vertices whose children would not fit in the
    budget become boundary leaves, so every leaf is boundary and interior
    vertices keep their drawn degree.  Boundary heights are all zero
    (callers typically resample them with :func:`random_hom_boundary`).
    """
    lo, hi = degrees
    adj: list[list[int]] = [[]]
    interior: set[int] = set()
    queue = deque([0])
    while queue:
        v = queue.popleft()
        want = rng.randint(lo, hi) - (0 if v == 0 else 1)
        if len(adj) + want <= max_vertices and want >= (2 if v == 0 else 1):
            interior.add(v)
            for _ in range(want):
                u = len(adj)
                adj.append([v])
                adj[v].append(u)
                queue.append(u)
    if not interior:
        interior = {0}
        for _ in range(lo):
            u = len(adj)
            adj.append([0])
            adj[0].append(u)
    heights = {v: 0 for v in range(len(adj)) if v not in interior}
    return TreeRegion(tuple(tuple(a) for a in adj), frozenset(interior), heights)


def random_hom_boundary(region: TreeRegion, rng, root_value: int = 0) -> TreeRegion:
    """Resample boundary heights as the restriction of a random
    homomorphism (a +-1 random walk over the BFS tree), which is feasible
    by construction."""
    h = {0: root_value}
    for v in region.bfs_order(0)[1:]:
        p = next(u for u in region.neighbors[v] if u in h)
        h[v] = h[p] + rng.choice((-1, 1))
    heights = {v: h[v] for v in region.boundary_heights}
    return TreeRegion(region.neighbors, region.interior, heights)


# -- feasibility ----------------------------------------------------------


def validate_hom_boundary(region: TreeRegion) -> FeasibilityReport:
    """Parity and Lipschitz checks on all boundary pairs.

    On trees the pairwise conditions ``b(y) - b(z) == d(y, z) mod 2`` and
    ``|b(y) - b(z)| <= d(y, z)`` are necessary and sufficient for a
    homomorphism extension to exist.
    """
    boundary = region.boundary
    for i, y in enumerate(boundary):
        dist = region.distances_from(y)
        by = region.boundary_heights[y]
        for z in boundary[i + 1:]:
            gap = by - region.boundary_heights[z]
            if (gap - dist[z]) % 2:
                return FeasibilityReport(False, "parity", (y, z))
            if abs(gap) > dist[z]:
                return FeasibilityReport(False, "lipschitz", (y, z))
    return FeasibilityReport(True)


def hom_feasible_intervals(region: TreeRegion) -> dict[int, tuple[int, int]]:
    """Per-vertex interval of heights compatible with every boundary
    value under the unit-Lipschitz/parity constraints.  Both interval
    endpoints are already aligned to the vertex parity class."""
    n = region.vertex_count
    lo = [-(10 ** 9)] * n
    hi = [10 ** 9] * n
    for y in region.boundary:
        dist = region.distances_from(y)
        by = region.boundary_heights[y]
        for v in range(n):
            lo[v] = max(lo[v], by - dist[v])
            hi[v] = min(hi[v], by + dist[v])
    return {v: (lo[v], hi[v]) for v in range(n)}


def validate_mon_boundary(region: DirectedTreeRegion) -> FeasibilityReport:
    """Interval propagation for monotone feasibility.

    Every interior vertex needs a boundary vertex among its ancestors and
    among its descendants (otherwise the set of extensions is infinite),
    and the interval [max lower data, min upper data] must be nonempty.
    """
    bounds = monotone_bounds(region)
    if isinstance(bounds, FeasibilityReport):
        return bounds
    lower, upper = bounds
    inf = 10 ** 18
    for v in sorted(region.interior):
        if upper[v] >= inf:
            return FeasibilityReport(False, "unbounded above", (v,))
        if lower[v] <= -inf:
            return FeasibilityReport(False, "unbounded below", (v,))
        if lower[v] > upper[v]:
            return FeasibilityReport(False, "empty interval", (v,))
    return FeasibilityReport(True)


def monotone_bounds(region: DirectedTreeRegion):
    """(lower, upper) height bounds per vertex from boundary data only.

    Returns an infeasibility report instead when two boundary values
    already contradict each other along an ancestor line.
    """
    inf = 10 ** 18
    n = region.vertex_count
    order = region.topological_order()
    upper = [inf] * n
    for v in order:
        p = region.parent[v]
        inherited = inf if p is None else upper[p]
        if v in region.boundary_heights:
            b = region.boundary_heights[v]
            if b > inherited:
                return FeasibilityReport(False, "boundary violates ancestor", (v,))
            upper[v] = b
        else:
            upper[v] = inherited
    lower = [-inf] * n
    for v in reversed(order):
        if v in region.boundary_heights:
            b = region.boundary_heights[v]
            if any(lower[c] > b for c in region.children[v]):
                c = next(c for c in region.children[v] if lower[c] > b)
                return FeasibilityReport(False, "boundary violates descendant", (v, c))
            lower[v] = b
        else:
            lower[v] = max((lower[c] for c in region.children[v]), default=-inf)
    return lower, upper


# -- brute-force enumeration ----------------------------------------------


def _hom_plan(region: TreeRegion):
    intervals = hom_feasible_intervals(region)
    order = [v for v in region.bfs_order(0) if v in region.interior]
    est = 1
    for v in order:
        lo, hi = intervals[v]
        if lo > hi:
            return order, intervals, 0
        # once any neighbor is fixed a vertex has at most two candidates
        est *= min(2, (hi - lo) // 2 + 1) if v != order[0] else (hi - lo) // 2 + 1
    return order, intervals, est


def enumerate_heights(region: Region, model: str,
                      cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[HeightAssignment]:
    """Yield every valid full assignment exactly once, in a fixed order.

    ``model`` is ``"hom"`` (unit increments across undirected edges) or
    ``"monotone"`` (parent dominates child on directed edges).  Raises
    :class:`EnumerationCapExceeded` when a cheap upper bound on the
    number of configurations exceeds ``cap``.
    """
    if model == "hom":
        yield from _enumerate_hom(region, cap)
    elif model == "monotone":
        yield from _enumerate_monotone(region, cap)
    else:
        raise ValueError(f"unknown model {model!r}")


def _enumerate_hom(region: TreeRegion, cap: int) -> Iterator[HeightAssignment]:
    order, intervals, est = _hom_plan(region)
    if est > cap:
        raise EnumerationCapExceeded(f"~{est} configurations exceed cap {cap}")
    h: HeightAssignment = dict(region.boundary_heights)

    def rec(i: int) -> Iterator[HeightAssignment]:
        if i == len(order):
            yield dict(h)
            return
        v = order[i]
        lo, hi = intervals[v]
        fixed = [u for u in region.neighbors[v] if u in h]
        for cand in range(lo, hi + 1, 2):
            if all(abs(cand - h[u]) == 1 for u in fixed):
                h[v] = cand
                yield from rec(i + 1)
                del h[v]

    yield from rec(0)


def _enumerate_monotone(region: DirectedTreeRegion, cap: int) -> Iterator[HeightAssignment]:
    bounds = monotone_bounds(region)
    if isinstance(bounds, FeasibilityReport):
        return
    lower, upper = bounds
    order = [v for v in region.topological_order() if v in region.interior]
    est = 1
    for v in order:
        if lower[v] > upper[v]:
            return
        est *= upper[v] - lower[v] + 1
        if est > cap:
            raise EnumerationCapExceeded(f"~{est} configurations exceed cap {cap}")
    h: HeightAssignment = dict(region.boundary_heights)

    def rec(i: int) -> Iterator[HeightAssignment]:
        if i == len(order):
            yield dict(h)
            return
        v = order[i]
        p = region.parent[v]
        hi = upper[v] if p is None or p not in h else min(upper[v], h[p])
        for cand in range(lower[v], hi + 1):
            h[v] = cand
            yield from rec(i + 1)
            del h[v]

    yield from rec(0)


def count_heights(region: Region, model: str,
                  cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    return sum(1 for _ in enumerate_heights(region, model, cap))


def enumeration_marginal(region: Region, x: int, model: str,
                         cap: int = DEFAULT_ENUMERATION_CAP) -> dict[int, int]:
    """Exact counts of the values taken at ``x`` over all configurations."""
    counts: dict[int, int] = {}
    for h in enumerate_heights(region, model, cap):
        counts[h[x]] = counts.get(h[x], 0) + 1
    return counts


# -- region description files ----------------------------------------------


def region_spec(kind: str, branching: int, depth: int, boundary) -> dict:
    """Canonical JSON-ready description of a regular region."""
    spec: dict = {"kind": kind, "branching": branching, "depth": depth}
    if kind == "directed":
        root_h, leaf_h = (boundary if isinstance(boundary, (tuple, list))
                          else (0, boundary))
        spec["boundary"] = {"rule": "pinned", "root": int(root_h),
                            "leaves": int(leaf_h)}
    elif isinstance(boundary, int):
        spec["boundary"] = {"rule": "constant", "value": boundary}
    elif isinstance(boundary, (tuple, list)) and boundary and boundary[0] == "ramp":
        spec["boundary"] = {"rule": "ramp", "offset": int(boundary[1])}
    else:
        spec["boundary"] = {"rule": "list", "values": [int(v) for v in boundary]}
    return spec


def build_from_spec(spec: dict, vertex_cap: int = DEFAULT_VERTEX_CAP):
    rule = spec["boundary"]
    kind = spec["kind"]
    if rule["rule"] == "pinned":
        boundary = (rule["root"], rule["leaves"])
    elif rule["rule"] == "constant":
        boundary = rule["value"]
    elif rule["rule"] == "ramp":
        boundary = ("ramp", rule["offset"])
    else:
        boundary = rule["values"]
    return build_regular_region(spec["branching"], spec["depth"], kind,
                                boundary, vertex_cap)


def save_region_spec(spec: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_region_spec(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
