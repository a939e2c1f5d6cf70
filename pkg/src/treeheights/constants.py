"""Frozen numeric reference constants and their derivation parameters.

The packaged ``data/constants.json`` file stores the root of the cubic
``x^3 - 3x^2 - x - 1`` together with its certified rational bracket and
the frozen variance bound evaluated at the squared root.  Tests recompute
everything from scratch and compare against the stored values.
"""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from importlib import resources

from .pmf import lambda_root, variance_bound_constant

REFERENCE_TOLERANCE = 1e-9
VARIANCE_BOUND_STEP = 2


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def parse_fraction(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def reference_constants(tol: float = REFERENCE_TOLERANCE) -> dict:
    """Recompute the reference constants from their definitions."""
    lam = lambda_root(tol)
    lam_sq = lam.value * lam.value
    return {
        "tolerance": tol,
        "lambda_value": lam.value,
        "lambda_residual": lam.residual,
        "lambda_lower": _frac_str(lam.lower),
        "lambda_upper": _frac_str(lam.upper),
        "lambda_lower_squared": _frac_str(lam.lower * lam.lower),
        "lambda_squared": lam_sq,
        "variance_bound": variance_bound_constant(lam_sq, VARIANCE_BOUND_STEP),
        "variance_bound_step": VARIANCE_BOUND_STEP,
    }


@lru_cache(maxsize=1)
def load_reference_constants() -> dict:
    """Constants as frozen in the packaged fixtures file."""
    with resources.files(__package__).joinpath("data/constants.json").open() as fh:
        return json.load(fh)


@lru_cache(maxsize=1)
def certified_lambda_bounds() -> tuple[Fraction, Fraction]:
    """Certified rational bracket (lower, upper) around the cubic's root."""
    data = load_reference_constants()
    return parse_fraction(data["lambda_lower"]), parse_fraction(data["lambda_upper"])


def certification_threshold() -> Fraction:
    """Rational lower bound for the squared root, used in exact SLC checks."""
    lower, _ = certified_lambda_bounds()
    return lower * lower


def frozen_variance_bound() -> float:
    return load_reference_constants()["variance_bound"]


def save_reference_constants(path, tol: float = REFERENCE_TOLERANCE) -> dict:
    data = reference_constants(tol)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


if __name__ == "__main__":  # regenerate the packaged fixtures file
    import pathlib

    target = pathlib.Path(__file__).parent / "data" / "constants.json"
    print(json.dumps(save_reference_constants(target), indent=2, sort_keys=True))
