"""Link manifolds (L, g_L): area, Ricci bounds, Laplace spectra, profiles.

Two representations are supported:

* ``scaled_sphere``: the round sphere S^d of radius ``rho`` (``g_L = rho^2 g_round``),
  any dimension ``d >= 1``;
* ``conformal_s2``: the 2-sphere with ``g_L = exp(2 psi) g_round`` where ``psi``
  is a :class:`~coniso.spectral.SpectralField`.

Throughout ``d = dim L`` and ``m = d + 1`` is the dimension of the cone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh
from scipy.optimize import brentq, minimize
from scipy.special import betaincinv, comb

from .errors import ConsistencyError, EigensolverError, HypothesisWarning
from .spectral import (
    SpectralField,
    degree_of_index,
    grid_basis,
    real_harmonics,
    sphere_grid,
)

__all__ = [
    "LinkKind",
    "LinkMetric",
    "ProfileMethod",
    "ProfileEstimate",
    "LichnerowiczReport",
    "unit_sphere_area",
    "area",
    "ricci_lower_bound",
    "laplace_spectrum",
    "lichnerowicz_check",
    "iso_profile",
    "sphere_profile",
]

DEFAULT_DEGREE = 16
EIGEN_TOL = 1e-10


def unit_sphere_area(d):
    """(d)-dimensional area of the unit sphere S^d in R^{d+1}; ``unit_sphere_area(2) = 4 pi``."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


class LinkKind(str, Enum):
    SCALED_SPHERE = "scaled_sphere"
    CONFORMAL_S2 = "conformal_s2"


@dataclass(frozen=True, eq=False)
class LinkMetric:
    kind: LinkKind
    dim: int
    radius: float = 1.0
    conformal_factor: SpectralField | None = None

    def __post_init__(self):
        if self.kind is LinkKind.SCALED_SPHERE:
            if self.dim < 1:
                raise ValueError("link dimension must be >= 1")
            if not self.radius > 0:
                raise ValueError("radius must be positive")
        elif self.kind is LinkKind.CONFORMAL_S2:
            if self.dim != 2:
                raise ValueError("conformal links are 2-spheres")
            if self.conformal_factor is None:
                raise ValueError("conformal link needs a conformal factor")
            if self.conformal_factor.degree < 4:
                raise ValueError("conformal factor degree must be >= 4")
        else:
            raise ValueError(f"unknown link kind {self.kind!r}")

    @classmethod
    def scaled_sphere(cls, dim=2, radius=1.0):
        return cls(LinkKind.SCALED_SPHERE, int(dim), float(radius))

    @classmethod
    def conformal_s2(cls, field):
        return cls(LinkKind.CONFORMAL_S2, 2, 1.0, field)

    @classmethod
    def conformal_from_triples(cls, triples, degree=DEFAULT_DEGREE):
        return cls.conformal_s2(SpectralField.from_triples(triples, degree))

    @property
    def m(self):
        return self.dim + 1

    @property
    def is_conformal(self):
        return self.kind is LinkKind.CONFORMAL_S2

    @property
    def degree(self):
        """Harmonic degree used for link-side discretizations."""
        if self.is_conformal:
            return self.conformal_factor.degree
        return DEFAULT_DEGREE

    def quadrature_shape(self, degree=None):
        """Oversampled grid used for integrals of non-polynomial link data."""
        n = max(self.degree, degree or 0)
        return 2 * n + 2, 4 * n + 4

    def describe(self):
        if self.is_conformal:
            return {
                "kind": self.kind.value,
                "degree": self.conformal_factor.degree,
                "coefficients": self.conformal_factor.triples(),
            }
        return {"kind": self.kind.value, "dim": self.dim, "radius": self.radius}

    # pointwise data ----------------------------------------------------

    def log_factor(self, theta, phi, derivs=0):
        """``psi`` with ``g_L = exp(2 psi) g_round`` and its coordinate derivatives.

        Only meaningful for 2-dimensional links.
        """
        if self.dim != 2:
            raise ValueError("log_factor is defined for 2-dimensional links")
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.is_conformal:
            return self.conformal_factor.evaluate(theta, np.asarray(phi, float), derivs)
        return _constant_dict(math.log(self.radius), theta.shape, derivs)

    def log_factor_on_grid(self, nlat, nlon, derivs=0):
        if self.dim != 2:
            raise ValueError("log_factor is defined for 2-dimensional links")
        if self.is_conformal:
            return self.conformal_factor.on_grid(nlat, nlon, derivs)
        return _constant_dict(math.log(self.radius), (nlat * nlon,), derivs)

    def chart_metric(self, y, psi=None, derivs=False):
        """Diagonal of ``g_L`` in the standard chart and optionally its derivatives.

        The chart is hyperspherical, ``y = (y_1, ..., y_{d-1}, phi)`` with
        ``g_round = diag(1, sin^2 y_1, sin^2 y_1 sin^2 y_2, ...)``; for d = 2 this
        is the usual ``(theta, phi)``.

        Parameters
        ----------
        y : ndarray, shape (n, d)
        psi : dict, optional
            Precomputed :meth:`log_factor` output (``derivs=1`` if derivatives
            are requested); evaluated here when omitted.
        derivs : bool

        Returns
        -------
        G : ndarray (n, d)
        dG : ndarray (n, d, d), ``dG[:, k, i] = d G_i / d y_k`` (only if derivs)
        """
        y = np.asarray(y)
        n, d = y.shape
        s = np.sin(y[:, : d - 1])
        c = np.cos(y[:, : d - 1])
        round_diag = np.ones((n, d), dtype=s.dtype)
        for i in range(1, d):
            round_diag[:, i] = round_diag[:, i - 1] * s[:, i - 1] ** 2
        if self.dim == 2:
            if psi is None:
                psi = self.log_factor(y[:, 0], y[:, 1], derivs=1 if derivs else 0)
            scale = np.exp(2.0 * psi["Y"])
        else:
            scale = np.full(n, self.radius**2)
        G = round_diag * scale[:, None]
        if not derivs:
            return G
        dG = np.zeros((n, d, d), dtype=G.dtype)
        for k in range(d - 1):
            cot = c[:, k] / s[:, k]
            for i in range(k + 1, d):
                dG[:, k, i] = 2.0 * cot * G[:, i]
        if self.dim == 2:
            dG[:, 0, :] += 2.0 * psi["t"][:, None] * G
            dG[:, 1, :] += 2.0 * psi["p"][:, None] * G
        return G, dG

    # cached global data ------------------------------------------------

    @cached_property
    def _quadrature(self):
        """(grid, psi values, area weights for g_L) on the oversampled grid."""
        nlat, nlon = self.quadrature_shape()
        grid = sphere_grid(nlat, nlon)
        psi = self.log_factor_on_grid(nlat, nlon)["Y"]
        w = grid.weights * np.exp(2.0 * psi)
        w.setflags(write=False)
        return grid, psi, w

    def gaussian_curvature_on_grid(self, nlat=None, nlon=None):
        """``K = exp(-2 psi) (1 - Lap_round psi)`` on a grid (2-d links)."""
        if nlat is None:
            nlat, nlon = self.quadrature_shape()
        if not self.is_conformal:
            return np.full(nlat * nlon, 1.0 / self.radius**2)
        psi = self.conformal_factor
        lap = psi.laplacian().on_grid(nlat, nlon)["Y"]
        return np.exp(-2.0 * psi.on_grid(nlat, nlon)["Y"]) * (1.0 - lap)

    def integrate(self, values):
        """Integrate values on the quadrature grid against dA of g_L."""
        return float(np.asarray(values) @ self._quadrature[2])


def _constant_dict(value, shape, derivs):
    out = {"Y": np.full(shape, value)}
    if derivs >= 1:
        out["t"] = np.zeros(shape)
        out["p"] = np.zeros(shape)
    if derivs >= 2:
        out["tt"] = np.zeros(shape)
        out["tp"] = np.zeros(shape)
        out["pp"] = np.zeros(shape)
    return out


# ----------------------------------------------------------------------
# area and curvature


def area(link):
    """Riemannian (m-1)-volume of the link."""
    if link.is_conformal:
        return link.integrate(np.ones(link._quadrature[0].size))
    return link.radius**link.dim * unit_sphere_area(link.dim)


def area_by_quadrature(link):
    """Area from the oversampled grid (2-d links only); cross-check for :func:`area`."""
    if link.dim != 2:
        raise ValueError("quadrature area needs a 2-dimensional link")
    return link.integrate(np.ones(link._quadrature[0].size))


def ricci_lower_bound(link, warn=True):
    """Largest ``c`` with ``Ric_L >= c g_L``.

    For conformal links this is the minimum of the Gaussian curvature: the
    grid minimum refined by a local search from the lowest grid nodes.

    Emits :class:`HypothesisWarning` when ``c < m - 2``.
    """
    if link.is_conformal:
        c = _min_curvature(link)
    else:
        c = (link.dim - 1) / link.radius**2
    if warn and c < link.m - 2 - 1e-12:
        warnings.warn(
            f"Ric_L >= (m-2) g_L fails: lower bound {c:.6g} < {link.m - 2}",
            HypothesisWarning,
            stacklevel=2,
        )
    return c


def _curvature_at(link, x):
    """Gaussian curvature at unit vectors ``x`` (n, 3)."""
    theta = np.arccos(np.clip(x[:, 2], -1.0, 1.0))
    phi = np.arctan2(x[:, 1], x[:, 0])
    psi = link.conformal_factor
    lap = psi.laplacian().evaluate(theta, phi)["Y"]
    return np.exp(-2.0 * psi.evaluate(theta, phi)["Y"]) * (1.0 - lap)


@lru_cache(maxsize=64)
def _min_curvature(link, starts=6):
    K = link.gaussian_curvature_on_grid()
    grid = link._quadrature[0]
    best = float(np.min(K))
    for i in np.argsort(K)[:starts]:
        t, p = grid.theta[i], grid.phi[i]
        v0 = np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        f = lambda v: float(_curvature_at(link, (v / np.linalg.norm(v))[None, :])[0])
        res = minimize(f, v0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        best = min(best, float(res.fun))
    return best


def is_unit_round(link, rtol=1e-9):
    """True when the link has the area of the unit sphere (Bishop equality case)."""
    return abs(area(link) / unit_sphere_area(link.dim) - 1.0) <= rtol


# ----------------------------------------------------------------------
# spectra


def _sphere_multiplicity(l, d):
    return int(round(comb(l + d, d, exact=True) - (comb(l + d - 2, d, exact=True) if l >= 2 else 0)))


def laplace_spectrum(link, count):
    """First ``count`` eigenvalues ``0 = lambda_0 < lambda_1 <= ...`` of ``-Lap_{g_L}``."""
    if count < 2:
        raise ValueError("count must be >= 2")
    if not link.is_conformal:
        out = []
        l = 0
        while len(out) < count:
            lam = l * (l + link.dim - 1) / link.radius**2
            out.extend([lam] * _sphere_multiplicity(l, link.dim))
            l += 1
        return np.array(out[:count])
    N = link.degree
    if count > (N + 1) ** 2 - 1:
        raise ValueError(f"count must be <= {(N + 1) ** 2 - 1} at degree {N}")
    evals, _ = _conformal_eigenpairs(link)
    return evals[:count].copy()


@lru_cache(maxsize=16)
def _conformal_eigenpairs(link):
    """Galerkin eigenpairs of ``-Lap_round psi = lambda exp(2 phi) psi``."""
    N = link.degree
    nlat, nlon = link.quadrature_shape()
    Y = grid_basis(N, nlat, nlon)["Y"]
    _, _, w = link._quadrature
    ls = degree_of_index(N)
    K = np.diag((ls * (ls + 1)).astype(float))
    M = (Y * w) @ Y.T
    evals, evecs = eigh(K, M)
    # constants are an exact eigenvector; clean the round-off
    resid = np.abs(K @ evecs - (M @ evecs) * evals).max(axis=0)
    scale = np.maximum(1.0, np.abs(evals))
    worst = float(np.max(resid / scale))
    if worst > EIGEN_TOL:
        raise EigensolverError(
            f"generalized eigenproblem residual {worst:.3e} exceeds {EIGEN_TOL:g}", worst
        )
    order = np.argsort(evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


@dataclass(frozen=True)
class LichnerowiczReport:
    ricci_bound: float
    lambda1: float
    passes: bool
    m: int

    @property
    def margin(self):
        return self.lambda1 - (self.m - 1)


def lichnerowicz_check(link, tol=1e-10):
    """Compare ``lambda_1`` with ``m - 1``.

    ``passes`` is the strict inequality ``lambda_1 > m - 1`` (beyond ``tol``).
    If the Ricci bound ``>= m - 2`` holds and the link is not the unit sphere
    while ``passes`` fails, the Lichnerowicz estimate is contradicted and a
    :class:`ConsistencyError` is raised.
    """
    ric = ricci_lower_bound(link, warn=False)
    lam1 = float(laplace_spectrum(link, 2)[1])
    m = link.m
    passes = lam1 > (m - 1) + tol * max(1.0, m - 1)
    if ric >= m - 2 - 1e-12 and not is_unit_round(link) and not passes:
        raise ConsistencyError(
            f"Ric_L >= (m-2) g_L on a non-round link but lambda_1 = {lam1:.12g} <= {m - 1}; "
            "discretization failure"
        )
    return LichnerowiczReport(ric, lam1, bool(passes), m)


# ----------------------------------------------------------------------
# isoperimetric profiles


class ProfileMethod(str, Enum):
    CAP_EXACT = "CapExact"
    CAP_CANDIDATE = "CapCandidate"
    LEVEL_SET_UPPER_BOUND = "LevelSetUpperBound"


@dataclass(frozen=True)
class ProfileEstimate:
    beta: float
    value: float
    method: ProfileMethod
    is_upper_bound: bool


def sphere_profile(beta, dim=2, radius=1.0):
    """Exact normalized cap profile of the round sphere S^dim of given radius.

    Boundary measure of the geodesic cap with volume fraction ``beta``, divided
    by the total volume.
    """
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta in (0.0, 1.0):
        return 0.0
    if dim == 2:
        return math.sqrt(beta * (1.0 - beta)) / radius
    # fraction of the cap of angle t is I_x(d/2, d/2) with x = (1 - cos t)/2
    x = float(betaincinv(dim / 2.0, dim / 2.0, beta))
    sin_t = 2.0 * math.sqrt(x * (1.0 - x))
    return unit_sphere_area(dim - 1) * sin_t ** (dim - 1) / (unit_sphere_area(dim) * radius)


def iso_profile(link, beta):
    """Normalized isoperimetric profile ``I(beta)`` of the link.

    Round spheres get the exact cap value.  Non-round conformal links get the
    smallest boundary found among round-cap candidates centred on a grid of
    points and star-shaped level sets of the first eigenfunctions; that number
    is an upper bound for the profile and is flagged as such.
    """
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    conformal = link.is_conformal and not link.conformal_factor.is_constant()
    if not conformal:
        if link.is_conformal:
            radius = math.exp(link.conformal_factor.coeffs[0] / math.sqrt(4.0 * math.pi))
        else:
            radius = link.radius
        return ProfileEstimate(beta, sphere_profile(beta, link.dim, radius), ProfileMethod.CAP_EXACT, False)
    if beta in (0.0, 1.0):
        return ProfileEstimate(beta, 0.0, ProfileMethod.CAP_CANDIDATE, True)
    # complements share the boundary
    b = min(beta, 1.0 - beta)
    tables = _profile_tables(link)
    best, method = math.inf, ProfileMethod.CAP_CANDIDATE
    for table in tables:
        val = table.cap_ratio(b)
        if val < best:
            best, method = val, ProfileMethod.CAP_CANDIDATE
    for table, F in _level_set_tables(link):
        val = table.level_set_ratio(F, b)
        if val < best:
            best, method = val, ProfileMethod.LEVEL_SET_UPPER_BOUND
    return ProfileEstimate(beta, float(best), method, True)


_NT = 129
_NS = 48


class _PolarTable:
    """Samples of the conformal factor on geodesic polar coordinates of the
    round metric around a centre ``c``: ``x(t, s) = cos t c + sin t (cos s e1 + sin s e2)``.
    """

    def __init__(self, link, center):
        c = np.asarray(center, float)
        c = c / np.linalg.norm(c)
        helper = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = helper - (helper @ c) * c
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(c, e1)
        self.center, self.e1, self.e2 = c, e1, e2
        self.t = np.linspace(0.0, np.pi, _NT)
        self.s = 2.0 * np.pi * np.arange(_NS) / _NS
        T, S = np.meshgrid(self.t, self.s, indexing="ij")
        X = (
            np.cos(T)[..., None] * c
            + (np.sin(T) * np.cos(S))[..., None] * e1
            + (np.sin(T) * np.sin(S))[..., None] * e2
        )
        self.theta = np.arccos(np.clip(X[..., 2], -1.0, 1.0)).ravel()
        self.phi = np.arctan2(X[..., 1], X[..., 0]).ravel()
        psi = link.conformal_factor.evaluate(self.theta, self.phi)["Y"].reshape(_NT, _NS)
        self.exp_psi = np.exp(psi)
        area_density = np.exp(2.0 * psi) * np.sin(T)
        self.area_spline = CubicSpline(self.t, area_density, axis=0)
        self.area_cum = self.area_spline.antiderivative()
        self.total = float(np.mean(self.area_cum(np.pi)) * 2.0 * np.pi)
        self.perim_spline = CubicSpline(self.t, self.exp_psi, axis=0)

    def cap_ratio(self, beta):
        target = beta * self.total

        def excess(t):
            return np.mean(self.area_cum(t)) * 2.0 * np.pi - target

        t_star = brentq(excess, 1e-12, np.pi - 1e-12, xtol=1e-14)
        perim = np.mean(self.perim_spline(t_star)) * 2.0 * np.pi * np.sin(t_star)
        return perim / self.total

    def level_set_ratio(self, F, beta):
        """Star-shaped sublevel region ``{F > c}`` around this table's centre."""
        spline = CubicSpline(self.t, F, axis=0)
        fmax = float(F[0, 0])
        fmin = float(F.min())

        def radii(level):
            below = F < level
            t_out = np.full(_NS, np.pi)
            has = below.any(axis=0)
            first = np.argmax(below, axis=0)
            lo = self.t[np.maximum(first - 1, 0)]
            hi = self.t[first]
            # vectorized bisection on each ray
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                vals = _eval_columns(spline, mid)
                go_right = vals >= level
                lo = np.where(go_right, mid, lo)
                hi = np.where(go_right, hi, mid)
            t_out[has] = 0.5 * (lo + hi)[has]
            return t_out

        def fraction(level):
            tr = radii(level)
            return float(np.mean(_eval_columns(self.area_cum, tr)) * 2.0 * np.pi / self.total)

        span = fmax - fmin
        lo, hi = fmin + 1e-9 * span, fmax - 1e-9 * span
        f_lo, f_hi = fraction(lo) - beta, fraction(hi) - beta
        if f_lo * f_hi > 0:
            return math.inf
        level = brentq(lambda c: fraction(c) - beta, lo, hi, xtol=1e-14 * max(1.0, span))
        tr = radii(level)
        k = np.fft.rfftfreq(_NS, d=1.0 / _NS)
        dt = np.fft.irfft(1j * k * np.fft.rfft(tr), n=_NS)
        e_psi = _eval_columns(self.perim_spline, tr)
        perim = np.mean(e_psi * np.sqrt(np.sin(tr) ** 2 + dt**2)) * 2.0 * np.pi
        return perim / self.total


def _eval_columns(spline, tvals):
    """Evaluate column ``j`` of a vector-valued spline at ``tvals[j]``."""
    x = spline.x
    idx = np.clip(np.searchsorted(x, tvals) - 1, 0, len(x) - 2)
    dx = tvals - x[idx]
    cols = np.arange(len(tvals))
    c = spline.c
    out = np.zeros(len(tvals))
    for p in range(c.shape[0]):
        out = out * dx + c[p, idx, cols]
    return out


@lru_cache(maxsize=8)
def _profile_tables(link):
    grid = sphere_grid(6, 12)
    centers = np.stack(
        [
            np.sin(grid.theta) * np.cos(grid.phi),
            np.sin(grid.theta) * np.sin(grid.phi),
            np.cos(grid.theta),
        ],
        axis=1,
    )
    centers = np.vstack([centers, [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]])
    return [_PolarTable(link, c) for c in centers]


@lru_cache(maxsize=8)
def _level_set_tables(link):
    _, evecs = _conformal_eigenpairs(link)
    N = link.degree
    nlat, nlon = link.quadrature_shape()
    grid = sphere_grid(nlat, nlon)
    Y = grid_basis(N, nlat, nlon)["Y"]
    out = []
    for j in (1, 2, 3):
        for sign in (1.0, -1.0):
            coeffs = sign * evecs[:, j]
            vals = coeffs @ Y
            i = int(np.argmax(vals))
            th, ph = grid.theta[i], grid.phi[i]
            center = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            table = _PolarTable(link, center)
            F = (coeffs @ real_harmonics(N, table.theta, table.phi)["Y"]).reshape(_NT, _NS)
            out.append((table, F))
    return out

