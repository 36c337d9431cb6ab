"""Isoperimetric quantities of regions bounded by slices or CMC leaves.

Regions are either slabs ``B_r`` (bounded by the slice ``{r} x L``) or the
region below a radial graph.  The isoperimetric quotient is

    ratio(Omega) = |d Omega|^m / (m^(m-1) omega_(m-1) |Omega|^(m-1)),

which equals ``area(L) / omega_(m-1)`` on every slab of an exact cone.
Curvature integrals over boundary surfaces use the induced area measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cmc import RadialGraph, enclosed_volume, leaf_geometry
from .cone import ball_volume, numeric_ricci_tensor, scalar_curvature, slice_data
from .errors import ConsistencyError
from .link import (
    ProfileMethod,
    area,
    iso_profile,
    is_unit_round,
    ricci_lower_bound,
    sphere_profile,
    unit_sphere_area,
)

__all__ = [
    "Slab",
    "Leaf",
    "IsoReport",
    "ConeAngleReport",
    "CYResult",
    "Verdict",
    "ProfileRow",
    "iso_ratio",
    "cone_angle",
    "cone_angle_report",
    "huisken_functional",
    "cy_functional",
    "h_sq_integral",
    "iso_report",
    "levy_gromov_check",
]

CY_THRESHOLD = 64.0 * math.pi
CY_THRESHOLD_GENUS0 = 48.0 * math.pi
CY_SLACK = 1e-6
ANGLE_TOL = 1e-10
PROFILE_TOL = 1e-10


@dataclass(frozen=True)
class Slab:
    r: float


@dataclass(frozen=True, eq=False)
class Leaf:
    graph: RadialGraph


def _boundary(metric, region, need_geometry=True):
    """Pointwise data on the boundary surface: H, h_sq, dA, r, y, normal."""
    if isinstance(region, Slab):
        if metric.dim == 2:
            degree = max(metric.field_degree(), 16)
            return leaf_geometry(metric, RadialGraph.slice(region.r, degree))
        s = slice_data(metric, region.r)
        return {"area": s.area, "H": s.H, "h_sq": s.h_norm_sq}
    if isinstance(region, Leaf):
        return leaf_geometry(metric, region.graph)
    raise TypeError(f"unsupported region {region!r}")


def _area_and_volume(metric, region):
    if isinstance(region, Slab):
        A = slice_data(metric, region.r).area
        V = ball_volume(metric, region.r)
    else:
        geo = leaf_geometry(metric, region.graph)
        A = float(np.sum(np.real(geo["dA"])))
        V = enclosed_volume(metric, region.graph)
    return A, V


def iso_ratio(metric, region):
    """``|d Omega|^m / (m^(m-1) omega_(m-1) |Omega|^(m-1))``."""
    m = metric.m
    A, V = _area_and_volume(metric, region)
    return A**m / (m ** (m - 1) * unit_sphere_area(m - 1) * V ** (m - 1))


# ----------------------------------------------------------------------
# cone angle


class AngleVerdict(str, Enum):
    WITHIN_BOUND = "within_bound"
    RIGID = "rigid"
    HYPOTHESES_NOT_MET = "hypotheses_not_met"


@dataclass(frozen=True)
class ConeAngleReport:
    value: float
    ricci_bound: float
    hypotheses_hold: bool
    verdict: AngleVerdict

    def to_json(self):
        return {
            "cone_angle": self.value,
            "ricci_lower_bound": self.ricci_bound,
            "hypotheses_hold": self.hypotheses_hold,
            "verdict": self.verdict.value,
        }


def cone_angle(link):
    """``area(L) / omega_(m-1)``."""
    return area(link) / unit_sphere_area(link.dim)


def cone_angle_report(link, tol=ANGLE_TOL):
    """Cone angle with the verdict of the Ricci-comparison bound.

    When ``Ric_L >= (m-2) g_L`` the angle cannot exceed 1 and equals 1 only
    for the unit round sphere (the Euclidean case).  A value above
    ``1 + tol`` under that hypothesis raises :class:`ConsistencyError`.
    """
    value = cone_angle(link)
    rb = ricci_lower_bound(link, warn=False)
    hyp = rb >= (link.m - 2) - tol
    if not hyp:
        verdict = AngleVerdict.HYPOTHESES_NOT_MET
    elif value > 1.0 + tol:
        raise ConsistencyError(
            f"cone angle {value:.15g} exceeds 1 although Ric_L >= (m-2) g_L; "
            "this contradicts volume comparison, so the discretization is suspect"
        )
    elif abs(value - 1.0) <= tol and is_unit_round(link):
        verdict = AngleVerdict.RIGID
    else:
        verdict = AngleVerdict.WITHIN_BOUND
    return ConeAngleReport(value, rb, hyp, verdict)


# ----------------------------------------------------------------------
# curvature integrals (m = 3)


def _require_m3(metric, name):
    if metric.m != 3:
        raise ValueError(f"{name} is defined for 3-dimensional ambient manifolds only")


def huisken_functional(metric, region):
    """``(1/16 pi) * integral of H^2`` over the boundary surface."""
    _require_m3(metric, "the Willmore-type functional")
    geo = _boundary(metric, region)
    return float(np.real(geo["H"] ** 2) @ np.real(geo["dA"])) / (16.0 * math.pi)


def h_sq_integral(metric, region):
    """``integral of |h|^2`` over the boundary surface (diagnostic)."""
    _require_m3(metric, "the second-fundamental-form integral")
    geo = _boundary(metric, region)
    return float(np.real(geo["h_sq"]) @ np.real(geo["dA"]))


@dataclass(frozen=True)
class CYResult:
    value: float
    passes: bool
    passes_genus0: bool
    threshold: float = CY_THRESHOLD
    threshold_genus0: float = CY_THRESHOLD_GENUS0


def _scalar_on_surface(metric, geo, chunk=256):
    r = np.real(geo["r"])
    y = geo["sample"].y
    out = np.empty(r.shape[0])
    for s in range(0, r.shape[0], chunk):
        out[s : s + chunk] = scalar_curvature(metric, r[s : s + chunk], y[s : s + chunk])
    return out


def cy_functional(metric, region):
    """``integral of (H^2 + 2|h|^2 + 2R)`` with ``R`` the ambient scalar curvature.

    Compared with ``64 pi`` and, since every supported link is a topological
    sphere, with the genus-zero threshold ``48 pi``.
    """
    _require_m3(metric, "the Christodoulou-Yau integral")
    geo = _boundary(metric, region)
    R = _scalar_on_surface(metric, geo)
    dens = np.real(geo["H"]) ** 2 + 2.0 * np.real(geo["h_sq"]) + 2.0 * R
    value = float(dens @ np.real(geo["dA"]))
    return CYResult(
        value,
        value <= CY_THRESHOLD + CY_SLACK,
        value <= CY_THRESHOLD_GENUS0 + CY_SLACK,
    )


@dataclass(frozen=True)
class IsoReport:
    ratio: float
    cone_angle_exact: float
    huisken_value: float | None = None
    cy_value: float | None = None
    cy_passes: bool | None = None
    cy_passes_genus0: bool | None = None
    h_sq_integral: float | None = None

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def iso_report(metric, region):
    ratio = iso_ratio(metric, region)
    angle = cone_angle(metric.link)
    if metric.m != 3:
        return IsoReport(ratio, angle)
    cy = cy_functional(metric, region)
    return IsoReport(
        ratio,
        angle,
        huisken_functional(metric, region),
        cy.value,
        cy.passes,
        cy.passes_genus0,
        h_sq_integral(metric, region),
    )


# ----------------------------------------------------------------------
# profile comparison


class Verdict(str, Enum):
    CONFIRMED = "confirmed"
    EQUAL = "equal"
    INCONCLUSIVE = "inconclusive"
    REFUTED = "refuted"


@dataclass(frozen=True)
class ProfileRow:
    beta: float
    link_estimate: float
    sphere_profile: float
    method: ProfileMethod
    verdict: Verdict


def _verdict(est, sphere, tol):
    """Compare a profile value with the unit-sphere profile.

    An exact value decides the strict inequality either way.  An upper bound
    can only show failure of the inequality (when it lies strictly below the
    sphere profile); if it lies above, nothing is decided.
    """
    if est.is_upper_bound:
        if est.value < sphere - tol:
            return Verdict.REFUTED
        return Verdict.INCONCLUSIVE
    if est.value > sphere + tol:
        return Verdict.CONFIRMED
    if est.value >= sphere - tol:
        return Verdict.EQUAL
    return Verdict.REFUTED


def levy_gromov_check(link, betas, tol=PROFILE_TOL):
    """Tabulate the link profile against the unit-sphere profile on ``betas``."""
    if link.m != 3:
        raise ValueError("the profile comparison is implemented for 2-dimensional links")
    rows = []
    for b in betas:
        b = float(b)
        if not 0.0 < b < 1.0:
            raise ValueError("beta grid must lie in (0, 1)")
        est = iso_profile(link, b)
        sp = sphere_profile(b, 2, 1.0)
        rows.append(ProfileRow(b, est.value, sp, est.method, _verdict(est, sp, tol)))
    return rows
