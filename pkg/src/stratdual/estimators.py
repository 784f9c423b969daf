"""Point estimators of the population mean from a stratified sample.

Implements the classical combined mean together with seven ratio- and
product-type refinements that exploit one or two auxiliary variables
with known population means, including a dual-transformed family whose
exponents interpolate between ratio-like and product-like behaviour.

All estimators consume combined (population-weighted) sample means, so
one :class:`SampleMeans` value drawn by the simulation harness can be
evaluated under every estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import PopulationSummary

__all__ = [
    "KINDS",
    "DUAL_KINDS",
    "TRANSFORM_KINDS",
    "DegenerateSampleError",
    "SampleMeans",
    "EstimatorSpec",
    "parse_estimator",
    "dual_transform_means",
    "estimate",
]

#: Recognised estimator kinds.
KINDS = (
    "classical",
    "combined_ratio",
    "combined_product",
    "transformed_product",
    "ratio_cum_product",
    "tracy_product",
    "plikusas_dual",
    "dual_family",
)

#: Kinds built on the per-stratum dual transform (require n_h < N_h).
DUAL_KINDS = ("plikusas_dual", "dual_family")

#: Kinds parameterized by the transform constant A.
TRANSFORM_KINDS = ("transformed_product", "tracy_product")


class DegenerateSampleError(ValueError):
    """A realized sample makes the requested estimator undefined.

    Raised for sample-dependent degeneracies only (zero denominators,
    non-positive bases under fractional exponents); configuration
    errors such as a missing parameter raise plain ``ValueError``.  The
    Monte Carlo harness counts these rejections instead of silently
    resampling.
    """


@dataclass(frozen=True)
class SampleMeans:
    """Per-stratum sample means plus their weighted combination.

    ``stratum_ids`` records which strata (in which order) the means
    belong to, so estimators can verify alignment with the population
    they are evaluated against.
    """

    stratum_ids: tuple[str, ...]
    ybar: np.ndarray
    xbar: np.ndarray
    zbar: np.ndarray
    ybar_st: float
    xbar_st: float
    zbar_st: float

    @classmethod
    def from_stratum_means(
        cls,
        stratum_ids,
        ybar,
        xbar,
        zbar,
        w,
    ) -> "SampleMeans":
        """Build from per-stratum means and stratum weights ``w``."""
        ybar = np.asarray(ybar, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        zbar = np.asarray(zbar, dtype=float)
        w = np.asarray(w, dtype=float)
        if not len(ybar) == len(xbar) == len(zbar) == len(w) == len(stratum_ids):
            raise ValueError("stratum means and weights must align")
        return cls(
            stratum_ids=tuple(str(s) for s in stratum_ids),
            ybar=ybar,
            xbar=xbar,
            zbar=zbar,
            ybar_st=float(w @ ybar),
            xbar_st=float(w @ xbar),
            zbar_st=float(w @ zbar),
        )


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to evaluate, with its parameters.

    ``A`` is the transform constant for ``transformed_product`` and
    ``tracy_product`` (the working quantity is ``theta = mean_x /
    (A - mean_x)``, so ``A`` must differ from the population x-mean).
    ``alpha1``/``alpha2`` are the exponents of ``dual_family``;
    ``plikusas_dual`` fixes both to 1.
    """

    kind: str
    A: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind in TRANSFORM_KINDS:
            if self.A is None:
                raise ValueError(f"{self.kind} requires the transform constant A")
            object.__setattr__(self, "A", float(self.A))
            if not math.isfinite(self.A):
                raise ValueError("A must be finite")
        if self.kind == "plikusas_dual":
            object.__setattr__(self, "alpha1", 1.0)
            object.__setattr__(self, "alpha2", 1.0)
        if self.kind == "dual_family":
            if self.alpha1 is None or self.alpha2 is None:
                raise ValueError("dual_family requires alpha1 and alpha2")
            object.__setattr__(self, "alpha1", float(self.alpha1))
            object.__setattr__(self, "alpha2", float(self.alpha2))
            if not (math.isfinite(self.alpha1) and math.isfinite(self.alpha2)):
                raise ValueError("alpha1 and alpha2 must be finite")

    @property
    def label(self) -> str:
        """Compact, re-parseable rendering (see :func:`parse_estimator`)."""
        if self.kind in TRANSFORM_KINDS:
            return f"{self.kind}:A={self.A!r}"
        if self.kind == "dual_family":
            return f"{self.kind}:a1={self.alpha1!r},a2={self.alpha2!r}"
        return self.kind


_PARAM_ALIASES = {
    "a": "A",
    "A": "A",
    "a1": "alpha1",
    "alpha1": "alpha1",
    "a2": "alpha2",
    "alpha2": "alpha2",
}


def parse_estimator(text: str) -> EstimatorSpec:
    """Parse a compact estimator string into an :class:`EstimatorSpec`.

    Examples: ``"classical"``, ``"tracy_product:A=18631.62"``,
    ``"dual_family:a1=6.2918,a2=-0.8870"``.
    """
    kind, _, params = text.strip().partition(":")
    kwargs: dict[str, float] = {}
    if params:
        for item in params.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed estimator parameter {item!r} in {text!r}")
            key = key.strip()
            if key not in _PARAM_ALIASES:
                raise ValueError(f"unknown estimator parameter {key!r} in {text!r}")
            try:
                kwargs[_PARAM_ALIASES[key]] = float(value)
            except ValueError as exc:
                raise ValueError(f"bad value for {key!r} in {text!r}") from exc
    return EstimatorSpec(kind=kind, **kwargs)


def _check_alignment(sample: SampleMeans, pop: PopulationSummary) -> None:
    if sample.stratum_ids != pop.stratum_ids:
        raise ValueError(
            f"sample strata {sample.stratum_ids} do not align with "
            f"population strata {pop.stratum_ids}"
        )


def dual_transform_means(
    sample: SampleMeans, pop: PopulationSummary
) -> tuple[float, float]:
    """Combined dual-transformed auxiliary means ``(xstar_st, zstar_st)``.

    Per stratum the transform is ``(1 + g_h) * Xbar_h - g_h * xbar_h``
    (and likewise in z); the results are combined with the stratum
    weights.  The transform is design-unbiased for the population means
    and reverses the direction of correlation with the study variable.
    """
    _check_alignment(sample, pop)
    pop.require_no_census("the dual transform")
    g, w = pop.g, pop.w
    xbar_pop = pop.stratum_array("mean_x")
    zbar_pop = pop.stratum_array("mean_z")
    xstar = float(w @ ((1.0 + g) * xbar_pop - g * sample.xbar))
    zstar = float(w @ ((1.0 + g) * zbar_pop - g * sample.zbar))
    return xstar, zstar


def _power(base: float, exponent: float, what: str) -> float:
    """``base ** exponent`` restricted to real-valued results."""
    if base == 0.0 and exponent < 0:
        raise DegenerateSampleError(f"{what} is zero with negative exponent")
    if base < 0.0 and not float(exponent).is_integer():
        raise DegenerateSampleError(
            f"{what} = {base} is negative under fractional exponent {exponent}"
        )
    return float(base**exponent)


def estimate(
    spec: EstimatorSpec, sample: SampleMeans, pop: PopulationSummary
) -> float:
    """Evaluate one estimator on one realized sample.

    Raises
    ------
    DegenerateSampleError
        When this particular sample makes the estimator undefined
        (zero combined mean in a denominator, non-positive dual base
        under a fractional exponent).
    ValueError
        For configuration errors independent of the sample (census
        strata for dual kinds, ``A`` equal to the population x-mean,
        zero population means where they divide).
    """
    _check_alignment(sample, pop)
    ybar_st = sample.ybar_st
    kind = spec.kind

    if kind == "classical":
        return ybar_st

    if kind == "combined_ratio":
        if sample.xbar_st == 0:
            raise DegenerateSampleError("combined sample x-mean is zero")
        return ybar_st * pop.mean_x / sample.xbar_st

    if kind == "combined_product":
        if pop.mean_z == 0:
            raise ValueError("population z-mean is zero")
        return ybar_st * sample.zbar_st / pop.mean_z

    if kind == "ratio_cum_product":
        if sample.xbar_st == 0:
            raise DegenerateSampleError("combined sample x-mean is zero")
        if pop.mean_z == 0:
            raise ValueError("population z-mean is zero")
        return ybar_st * (pop.mean_x / sample.xbar_st) * (sample.zbar_st / pop.mean_z)

    if kind in TRANSFORM_KINDS:
        u_pop = spec.A - pop.mean_x
        if u_pop == 0:
            raise ValueError("A equals the population x-mean; theta undefined")
        u_st = spec.A - sample.xbar_st
        value = ybar_st * u_st / u_pop
        if kind == "tracy_product":
            if pop.mean_z == 0:
                raise ValueError("population z-mean is zero")
            value *= sample.zbar_st / pop.mean_z
        return value

    # Dual kinds.
    xstar_st, zstar_st = dual_transform_means(sample, pop)
    if pop.mean_x == 0 or pop.mean_z == 0:
        raise ValueError("population auxiliary means must be nonzero")
    if zstar_st == 0 and spec.alpha2 != 0:
        raise DegenerateSampleError("dual-transformed z-mean is zero")
    base_x = xstar_st / pop.mean_x
    base_z = pop.mean_z / zstar_st if zstar_st != 0 else math.inf
    if kind == "plikusas_dual":
        return ybar_st * base_x * base_z
    return (
        ybar_st
        * _power(base_x, spec.alpha1, "dual-transformed x ratio")
        * _power(base_z, spec.alpha2, "dual-transformed z ratio")
    )
