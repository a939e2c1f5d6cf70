"""Exact inference, counting and Monte Carlo for integer-valued height
functions on trees: uniform graph homomorphisms and uniform monotone
functions, their log-concavity certificates, flow measures and the
finite-volume freezing experiments."""

from .constants import (certification_threshold, certified_lambda_bounds,
                        frozen_variance_bound, load_reference_constants,
                        reference_constants)
from .errors import (AlphaNotAboveOne, DisjointSupport, EmptyEdgeSet,
                     EmptyInterval, EnumerationCapExceeded, InfeasibleBoundary,
                     InvalidFlow, MissingEdgeWeight, NonPositiveRate,
                     SizeCapExceeded, TreeHeightsError)
from .flows import (Flow, LocalisationReport, RaySpec, balanced_flow,
                    dlr_single_site_check, exchangeability_check_monotone,
                    localisation_test, min_gradient_law, ray_variance,
                    sample_flow_measure, validate_flow)
from .homomorphisms import (MessageTable, certify_messages, exact_marginal,
                            glauber_marginal_counts, glauber_sampler,
                            height_offset_demo, marginal_variance_check,
                            variance_profile)
from .monotone import (CountingTable, ancestral_sampler, build_counting_table,
                       child_zero_lower_bound, child_zero_probability,
                       frozen_region_experiment, zero_marginal_probability)
from .pmf import (EXACT, LOGFLOAT, IntPMF, LambdaConstant, convolve_step,
                  dirac, from_pairs, geometric_pmf, lambda_root,
                  log_concavity_coefficient, moments, product_normalize,
                  total_variation, variance_bound_constant)
from .trees import (DirectedTreeRegion, FeasibilityReport, TreeRegion,
                    build_regular_region, count_heights, enumerate_heights,
                    random_hom_boundary, random_hom_region,
                    validate_hom_boundary, validate_mon_boundary)

__version__ = "0.1.0"
