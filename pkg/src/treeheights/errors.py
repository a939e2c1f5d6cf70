"""Exception types shared across the package."""


class TreeHeightsError(Exception):
    """Base class for all package-specific errors."""


class DisjointSupport(TreeHeightsError):
    """Pointwise product of PMFs has empty support.

    Usually signals an infeasible boundary configuration upstream.
    """


class NonPositiveRate(TreeHeightsError):
    """Geometric rate must be positive (or +inf)."""


class AlphaNotAboveOne(TreeHeightsError):
    """Variance bound requires a log-concavity coefficient strictly above 1."""


class SizeCapExceeded(TreeHeightsError):
    """Requested structure exceeds the configured size guard."""


class EnumerationCapExceeded(TreeHeightsError):
    """Brute-force enumeration would exceed the configured guard."""


class InfeasibleBoundary(TreeHeightsError):
    """Boundary heights admit no valid configuration."""


class MissingEdgeWeight(TreeHeightsError):
    """A flow does not assign a weight to every edge of the region."""


class InvalidFlow(TreeHeightsError):
    """Edge weights violate the flow condition."""


class EmptyEdgeSet(TreeHeightsError):
    """An operation over a set of edges received none."""


class EmptyInterval(TreeHeightsError):
    """Neighbor heights leave no admissible value at a vertex."""
