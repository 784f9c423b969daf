"""Order-2 relative moment functionals of a stratified population.

Every first-order MSE expression in :mod:`stratdual.mse_theory` is a
quadratic form in the six weighted relative moments

    v_rst = sum_h w_h^2 gamma_h S_(...)h / (mean products),

with index convention ``r`` for the study variable y, ``s`` for the
first auxiliary x, and ``t`` for the second auxiliary z.  The *dual*
variants carry an extra per-stratum factor ``(-g_h)^(s+t)``, where
``g_h = n_h / (N_h - n_h)`` is the dual-transform coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import PopulationSummary

__all__ = [
    "MomentSet",
    "DualMomentSet",
    "compute_moments",
    "compute_dual_moments",
    "moments_to_json",
    "moments_from_dict",
]


def _check_moment_fields(obj) -> None:
    for name in ("v200", "v020", "v002", "v110", "v101", "v011"):
        value = float(getattr(obj, name))
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite")
        object.__setattr__(obj, name, value)
    for name in ("v200", "v020", "v002"):
        if getattr(obj, name) < 0:
            raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class MomentSet:
    """The six weighted relative moments ``v200 ... v011``.

    Diagonal moments (``v200``, ``v020``, ``v002``) must be nonnegative.
    Cross moments are unconstrained so that externally guessed values
    can be fed to the MSE formulas unchanged; inconsistent inputs then
    surface as negative first-order MSEs rather than being masked here.
    """

    v200: float
    v020: float
    v002: float
    v110: float
    v101: float
    v011: float

    def __post_init__(self) -> None:
        _check_moment_fields(self)

    def as_dict(self) -> dict:
        return {
            "v200": self.v200,
            "v020": self.v020,
            "v002": self.v002,
            "v110": self.v110,
            "v101": self.v101,
            "v011": self.v011,
        }


@dataclass(frozen=True)
class DualMomentSet:
    """Dual counterparts of :class:`MomentSet` (``(-g)^(s+t)`` factors).

    ``v200`` coincides exactly with the unprimed ``v200`` (its dual
    factor is ``(-g)^0 = 1``); ``v020`` and ``v002`` are nonnegative
    because their factor ``g^2`` is positive.
    """

    v200: float
    v020: float
    v002: float
    v110: float
    v101: float
    v011: float

    def __post_init__(self) -> None:
        _check_moment_fields(self)

    def as_dict(self) -> dict:
        return {
            "v200": self.v200,
            "v020": self.v020,
            "v002": self.v002,
            "v110": self.v110,
            "v101": self.v101,
            "v011": self.v011,
            "dual": True,
        }


def _require_nonzero_means(pop: PopulationSummary) -> tuple[float, float, float]:
    ybar, xbar, zbar = pop.mean_y, pop.mean_x, pop.mean_z
    if ybar == 0 or xbar == 0 or zbar == 0:
        raise ValueError(
            "combined means must be nonzero to form relative moments "
            f"(mean_y={ybar}, mean_x={xbar}, mean_z={zbar})"
        )
    return ybar, xbar, zbar


def _v200(pop: PopulationSummary, w2g: np.ndarray, ybar: float) -> float:
    return float(w2g @ pop.stratum_array("s_y") ** 2 / ybar**2)


def compute_moments(pop: PopulationSummary) -> MomentSet:
    """Compute the unprimed moment set of a population.

    Requires nonzero combined means.  Census strata contribute nothing
    (``gamma_h = 0``), so an all-census population yields all zeros.
    """
    ybar, xbar, zbar = _require_nonzero_means(pop)
    w2g = pop.w**2 * pop.gamma
    s_x = pop.stratum_array("s_x")
    s_z = pop.stratum_array("s_z")
    return MomentSet(
        v200=_v200(pop, w2g, ybar),
        v020=float(w2g @ s_x**2 / xbar**2),
        v002=float(w2g @ s_z**2 / zbar**2),
        v110=float(w2g @ pop.stratum_array("s_xy") / (xbar * ybar)),
        v101=float(w2g @ pop.stratum_array("s_yz") / (ybar * zbar)),
        v011=float(w2g @ pop.stratum_array("s_xz") / (xbar * zbar)),
    )


def compute_dual_moments(pop: PopulationSummary) -> DualMomentSet:
    """Compute the dual moment set (per-stratum ``(-g_h)^(s+t)`` factors).

    Requires every stratum to be non-census (``n_h < N_h``) so that
    ``g_h`` is defined, and nonzero combined means.  ``v200`` is
    computed through the same code path as the unprimed moment and is
    therefore bit-identical to it.
    """
    pop.require_no_census("dual moment computation")
    ybar, xbar, zbar = _require_nonzero_means(pop)
    w2g = pop.w**2 * pop.gamma
    g = pop.g
    s_x = pop.stratum_array("s_x")
    s_z = pop.stratum_array("s_z")
    return DualMomentSet(
        v200=_v200(pop, w2g, ybar),
        v020=float(w2g * g**2 @ s_x**2 / xbar**2),
        v002=float(w2g * g**2 @ s_z**2 / zbar**2),
        v110=float(-(w2g * g) @ pop.stratum_array("s_xy") / (xbar * ybar)),
        v101=float(-(w2g * g) @ pop.stratum_array("s_yz") / (ybar * zbar)),
        v011=float(w2g * g**2 @ pop.stratum_array("s_xz") / (xbar * zbar)),
    )


def moments_to_json(
    moments: MomentSet,
    dual: DualMomentSet | None = None,
    means: dict | None = None,
) -> str:
    """Serialize moment sets to a JSON document.

    The document wraps one or two flat moment objects (each with keys
    ``v200 ... v011``; the dual set carries a ``"dual": true`` marker)
    plus the optional combined means (keys among ``mean_y``, ``mean_x``,
    ``mean_z``) needed to scale MSEs back to absolute units and to
    resolve transform constants.  Floats are serialized at full
    precision so the document reproduces the source values bit for bit.
    """
    doc: dict = {"moments": moments.as_dict()}
    if dual is not None:
        doc["dual_moments"] = dual.as_dict()
    for key in ("mean_y", "mean_x", "mean_z"):
        if means and means.get(key) is not None:
            doc[key] = float(means[key])
    return json.dumps(doc, indent=2)


def moments_from_dict(
    doc: dict,
) -> tuple[MomentSet, DualMomentSet | None, dict]:
    """Parse the document produced by :func:`moments_to_json`.

    Also accepts a bare flat (unprimed) moment object.  Returns the
    unprimed set, the dual set when present, and a dict of whichever
    combined means the document carried.
    """
    keys = ("v200", "v020", "v002", "v110", "v101", "v011")

    def parse_set(obj: dict, cls):
        missing = [k for k in keys if k not in obj]
        if missing:
            raise ValueError(f"moment object missing keys {missing}")
        return cls(**{k: float(obj[k]) for k in keys})

    if "moments" in doc:
        moments = parse_set(doc["moments"], MomentSet)
        dual = None
        if "dual_moments" in doc:
            dual = parse_set(doc["dual_moments"], DualMomentSet)
        means = {
            k: float(doc[k])
            for k in ("mean_y", "mean_x", "mean_z")
            if k in doc
        }
        return moments, dual, means
    if doc.get("dual"):
        raise ValueError(
            "a bare dual moment set cannot stand alone; supply a document "
            'with both "moments" and "dual_moments"'
        )
    return parse_set(doc, MomentSet), None, {}
