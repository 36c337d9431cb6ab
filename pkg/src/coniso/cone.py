"""Cone metrics ``g_C = dr^2 + r^2 g_L`` and asymptotically conical perturbations.

Perturbed metrics have the diagonal conformal-type form

    g = (1 + alpha(r, x)) dr^2 + r^2 (1 + beta(r, x)) g_L,

with ``alpha`` and ``beta`` each a radial profile times a link field.  In
the chart ``(r, y)`` (hyperspherical ``y`` on the link) the metric is
diagonal, which every routine here relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np

from .link import LinkMetric, area, unit_sphere_area
from .spectral import SpectralField, sphere_grid
from .surface import christoffel_diag, level_set_geometry

__all__ = [
    "ProfileKind",
    "RadialProfile",
    "Perturbation",
    "AsymptoticConeMetric",
    "LinkSample",
    "Direction",
    "SliceData",
    "cone_ricci",
    "cone_ricci_tensor",
    "numeric_ricci",
    "numeric_ricci_tensor",
    "scalar_curvature",
    "radial_identity_check",
    "ball_volume",
    "slice_data",
    "decay_norm",
]

FD_STEP = 1e-3


class ProfileKind(str, Enum):
    POWER = "power"
    POWER_LOG = "power_log"
    BUMP = "bump"


@dataclass(frozen=True)
class RadialProfile:
    """Radial factor of a perturbation.

    ``power``: ``A r^-tau``; ``power_log``: ``A r^-tau log r``;
    ``bump``: ``A exp(1 - 1/(1 - s^2))`` for ``s = (r - center)/width`` in
    ``(-1, 1)`` and zero outside.  Evaluation accepts complex ``r``.
    """

    kind: ProfileKind = ProfileKind.POWER
    amplitude: float = 0.0
    tau: float = 1.0
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.kind is ProfileKind.BUMP and not self.width > 0:
            raise ValueError("bump width must be positive")

    def __call__(self, r):
        r = np.asarray(r)
        A = self.amplitude
        if self.kind is ProfileKind.POWER:
            return A * r ** (-self.tau)
        if self.kind is ProfileKind.POWER_LOG:
            return A * r ** (-self.tau) * np.log(r)
        s = (r - self.center) / self.width
        inside = np.abs(np.real(s)) < 1.0
        s_in = np.where(inside, s, 0.0)
        return np.where(inside, A * np.exp(1.0 - 1.0 / (1.0 - s_in**2)), 0.0)

    def derivative(self, r):
        r = np.asarray(r)
        A, tau = self.amplitude, self.tau
        if self.kind is ProfileKind.POWER:
            return -tau * A * r ** (-tau - 1.0)
        if self.kind is ProfileKind.POWER_LOG:
            return A * r ** (-tau - 1.0) * (1.0 - tau * np.log(r))
        s = (r - self.center) / self.width
        inside = np.abs(np.real(s)) < 1.0
        s_in = np.where(inside, s, 0.0)
        val = A * np.exp(1.0 - 1.0 / (1.0 - s_in**2)) * (-2.0 * s_in / (1.0 - s_in**2) ** 2)
        return np.where(inside, val / self.width, 0.0)

    def breakpoints(self):
        if self.kind is ProfileKind.BUMP:
            return (self.center - self.width, self.center + self.width)
        return ()

    def describe(self):
        out = {"profile": self.kind.value, "amplitude": self.amplitude, "tau": self.tau}
        if self.kind is ProfileKind.BUMP:
            out.update(center=self.center, width=self.width)
        return out


@dataclass(frozen=True, eq=False)
class Perturbation:
    """``profile(r) * field(x)``; ``field=None`` means the constant 1."""

    profile: RadialProfile
    field: SpectralField | None = None

    def sup_field(self):
        if self.field is None:
            return 1.0
        return float(np.max(np.abs(self.field.on_grid(*_dense_shape(self.field.degree))["Y"])))

    def describe(self):
        out = self.profile.describe()
        if self.field is not None:
            out["field"] = self.field.triples()
            out["degree"] = self.field.degree
        return out


def _dense_shape(degree):
    return 2 * degree + 2, 4 * degree + 4


class Direction(str, Enum):
    RADIAL = "radial"
    MIXED = "mixed"
    TANGENT = "tangent"


@dataclass(frozen=True, eq=False)
class LinkSample:
    """Link points with the link-side data needed to evaluate a metric there.

    ``y`` are chart coordinates ``(n, d)``; ``weights`` integrate functions
    against the area measure of ``g_L`` (``None`` for scattered points).
    The field dictionaries hold values and, for 2-d links, first theta/phi
    derivatives.
    """

    y: np.ndarray
    psi: dict | None
    alpha: dict | None
    beta: dict | None
    weights: np.ndarray | None = None
    shape: tuple | None = None

    @property
    def size(self):
        return self.y.shape[0]


@dataclass(frozen=True, eq=False)
class AsymptoticConeMetric:
    link: LinkMetric
    r_min: float
    r_max: float
    alpha: Perturbation | None = None
    beta: Perturbation | None = None
    decay_rate: float = 1.0

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if not self.decay_rate > 0:
            raise ValueError("decay rate must be positive")
        for name in ("alpha", "beta"):
            p = getattr(self, name)
            if p is not None and p.field is not None and self.link.dim != 2:
                if not p.field.is_constant():
                    raise ValueError("non-constant perturbation fields need a 2-dimensional link")
        self._check_positivity()

    @classmethod
    def exact(cls, link, r_min=0.5, r_max=200.0):
        return cls(link, r_min, r_max)

    @property
    def m(self):
        return self.link.m

    @property
    def dim(self):
        return self.link.dim

    @property
    def is_exact(self):
        return all(
            p is None or p.profile.amplitude == 0.0 for p in (self.alpha, self.beta)
        )

    def field_degree(self):
        degs = [self.link.degree if self.link.is_conformal else 0]
        for p in (self.alpha, self.beta):
            if p is not None and p.field is not None:
                degs.append(p.field.degree)
        return max(degs)

    def describe(self):
        out = {
            "link": self.link.describe(),
            "r_min": self.r_min,
            "r_max": self.r_max,
            "decay_rate": self.decay_rate,
        }
        for name in ("alpha", "beta"):
            p = getattr(self, name)
            if p is not None:
                out[name] = p.describe()
        return out

    def _check_positivity(self):
        rs = np.geomspace(self.r_min, self.r_max, 257)
        for name in ("alpha", "beta"):
            p = getattr(self, name)
            if p is None:
                continue
            worst = np.max(np.abs(p.profile(rs))) * p.sup_field()
            if worst >= 0.5:
                raise ValueError(
                    f"1 + {name} must stay above 1/2 on the annulus (sup |{name}| = {worst:.3g})"
                )

    # link-side sampling ----------------------------------------------

    def _field_data(self, pert, theta, phi, grid=None, derivs=1):
        if pert is None:
            return None
        if pert.field is None:
            shape = (len(theta),) if grid is None else (grid[0] * grid[1],)
            out = {"Y": np.ones(shape)}
            if derivs:
                out["t"] = np.zeros(shape)
                out["p"] = np.zeros(shape)
            return out
        if self.dim != 2:
            c = pert.field.coeffs[0] / math.sqrt(4.0 * math.pi)
            shape = (len(theta),) if grid is None else (grid[0] * grid[1],)
            out = {"Y": np.full(shape, c)}
            if derivs:
                out["t"] = np.zeros(shape)
                out["p"] = np.zeros(shape)
            return out
        if grid is not None:
            return pert.field.on_grid(grid[0], grid[1], derivs)
        return pert.field.evaluate(theta, phi, derivs)

    def sample(self, y, derivs=1):
        """Link data at scattered chart points ``y`` of shape ``(n, d)``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.dim == 2:
            th, ph = y[:, 0], y[:, 1]
            psi = self.link.log_factor(th, ph, derivs)
        else:
            th = ph = np.zeros(y.shape[0])
            psi = None
        return LinkSample(
            y,
            psi,
            self._field_data(self.alpha, th, ph, derivs=derivs),
            self._field_data(self.beta, th, ph, derivs=derivs),
        )

    def grid_sample(self, nlat=None, nlon=None):
        """Link data on a quadrature grid (2-d links) or a single point (others).

        Weights integrate against the ``g_L`` area measure.
        """
        if self.dim != 2:
            return _single_point_sample(self)
        if nlat is None:
            nlat, nlon = _dense_shape(max(self.field_degree(), 16))
        return _grid_sample(self, nlat, nlon)

    # metric evaluation -----------------------------------------------

    def diag(self, r, sample, derivs=False):
        """Diagonal metric (and optionally its chart derivatives) at ``(r, y)``.

        ``r`` broadcasts against the sample points along the last axis.

        Returns
        -------
        g : ndarray (..., m)
        dg : ndarray (..., m, m) with ``dg[..., k, i] = d_k g_i`` (if derivs)
        """
        r = np.asarray(r)
        d = self.dim
        pa = self.alpha.profile if self.alpha is not None else None
        pb = self.beta.profile if self.beta is not None else None
        Fa, Fb = sample.alpha, sample.beta
        a = 1.0 + (pa(r) * Fa["Y"] if pa is not None else 0.0 * r)
        b = 1.0 + (pb(r) * Fb["Y"] if pb is not None else 0.0 * r)
        res = self.link.chart_metric(sample.y, psi=sample.psi, derivs=derivs)
        G, dG = (res if derivs else (res, None))
        shape = np.broadcast_shapes(np.shape(a), np.shape(b), (sample.size,))
        dtype = np.result_type(a, b, G)
        g = np.empty(shape + (d + 1,), dtype=dtype)
        g[..., 0] = a
        g[..., 1:] = (r**2 * b)[..., None] * G
        if not derivs:
            return g
        dg = np.zeros(shape + (d + 1, d + 1), dtype=dtype)
        if pa is not None:
            dg[..., 0, 0] = pa.derivative(r) * Fa["Y"]
        db_dr = pb.derivative(r) * Fb["Y"] if pb is not None else 0.0
        dg[..., 0, 1:] = (2.0 * r * b + r**2 * db_dr)[..., None] * G
        link_names = ("t", "p") if d == 2 else ()
        for k in range(d):
            if k < len(link_names) and pa is not None:
                dg[..., 1 + k, 0] = pa(r) * Fa[link_names[k]]
            db = pb(r) * Fb[link_names[k]] if (pb is not None and k < len(link_names)) else 0.0
            dg[..., 1 + k, 1:] = (r**2)[..., None] * (
                np.asarray(db)[..., None] * G + b[..., None] * dG[:, k, :]
            )
        return g, dg

    def volume_density(self, r, sample):
        """``sqrt(det g)`` relative to the ``g_L`` area measure."""
        r = np.asarray(r, dtype=float)
        pa = self.alpha.profile if self.alpha is not None else None
        pb = self.beta.profile if self.beta is not None else None
        a = 1.0 + (pa(r) * sample.alpha["Y"] if pa is not None else 0.0)
        b = 1.0 + (pb(r) * sample.beta["Y"] if pb is not None else 0.0)
        return np.sqrt(a) * (r**2 * b) ** (self.dim / 2.0)

    def radial_breakpoints(self):
        pts = []
        for p in (self.alpha, self.beta):
            if p is not None:
                pts.extend(p.profile.breakpoints())
        return sorted(pts)

    def has_bump(self):
        return any(
            p is not None and p.profile.kind is ProfileKind.BUMP for p in (self.alpha, self.beta)
        )


@lru_cache(maxsize=32)
def _grid_sample(metric, nlat, nlon):
    grid = sphere_grid(nlat, nlon)
    psi = metric.link.log_factor_on_grid(nlat, nlon, derivs=1)
    y = np.stack([grid.theta, grid.phi], axis=1)
    w = grid.weights * np.exp(2.0 * psi["Y"])
    return LinkSample(
        y,
        psi,
        metric._field_data(metric.alpha, None, None, grid=(nlat, nlon)),
        metric._field_data(metric.beta, None, None, grid=(nlat, nlon)),
        weights=w,
        shape=(nlat, nlon),
    )


def _generic_point(d):
    if d == 1:
        return np.array([[0.3]])
    y = np.full((1, d), math.pi / 2 - 0.2)
    y[0, -1] = 0.4
    return y


@lru_cache(maxsize=32)
def _single_point_sample(metric):
    s = metric.sample(_generic_point(metric.dim))
    return LinkSample(s.y, s.psi, s.alpha, s.beta, weights=np.array([area(metric.link)]), shape=(1,))


# ----------------------------------------------------------------------
# curvature of the exact cone


def _einstein_constant(link, y):
    """``kappa(y)`` with ``Ric_L = kappa g_L`` (both supported links are Einstein pointwise)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if link.is_conformal:
        psi = link.conformal_factor
        lap = psi.laplacian().evaluate(y[:, 0], y[:, 1])["Y"]
        return np.exp(-2.0 * psi.evaluate(y[:, 0], y[:, 1])["Y"]) * (1.0 - lap)
    return np.full(y.shape[0], (link.dim - 1) / link.radius**2)


def cone_ricci_tensor(link, r, y):
    """Chart components of ``Ric`` of ``dr^2 + r^2 g_L`` at ``(r, y)``.

    ``Ric_C = 0`` on radial and mixed pairs and ``(Ric_L - (m-2) g_L)`` on the
    link block; the latter is independent of ``r`` in coordinates.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    G = link.chart_metric(y)
    kappa = _einstein_constant(link, y)
    n, d = y.shape
    out = np.zeros((n, d + 1, d + 1))
    idx = np.arange(1, d + 1)
    out[:, idx, idx] = (kappa - (link.m - 2))[:, None] * G
    return out


def cone_ricci(link, r, direction, y=None):
    """``Ric_C`` on a g_C-unit direction at radius ``r``.

    ``Direction.RADIAL`` gives ``Ric_C(d_r, d_r)``, ``Direction.MIXED``
    ``Ric_C(d_r, X)``, and ``Direction.TANGENT`` ``Ric_C(X, X)`` for a g_C-unit
    tangent ``X`` at link point ``y``, which equals
    ``(Ric_L - (m-2) g_L)(X^, X^) / r^2`` with ``X^`` the g_L-unit rescaling.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    direction = Direction(direction)
    if direction in (Direction.RADIAL, Direction.MIXED):
        return 0.0
    if y is None:
        y = _generic_point(link.dim)
    kappa = float(_einstein_constant(link, y)[0])
    return (kappa - (link.m - 2)) / r**2


# ----------------------------------------------------------------------
# finite-difference Ricci


def _rotation_frames(theta, phi):
    """Rotations taking the chart point (pi/2, 0) to (theta, phi) with aligned axes."""
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    x0 = np.stack([st * cp, st * sp, ct], axis=-1)
    e_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return np.stack([x0, e_p, -e_t], axis=-1)


def _rotated_metric_fn(metric, R):
    """Metric diagonal in a rotated (theta', phi') chart, one rotation per base point."""

    def gfun(P):
        # P: (n, K, m) points (r, theta', phi')
        r, tp, pp = P[..., 0], P[..., 1], P[..., 2]
        X = np.stack([np.sin(tp) * np.cos(pp), np.sin(tp) * np.sin(pp), np.cos(tp)], axis=-1)
        Xp = np.einsum("nij,nkj->nki", R, X)
        th = np.arccos(np.clip(Xp[..., 2], -1.0, 1.0)).ravel()
        ph = np.arctan2(Xp[..., 1], Xp[..., 0]).ravel()
        s = metric.sample(np.stack([th, ph], axis=1), derivs=0)
        # round metric in the rotated chart, conformal data at the physical points
        y_rot = np.stack([tp.ravel(), pp.ravel()], axis=1)
        s = LinkSample(y_rot, s.psi, s.alpha, s.beta)
        return metric.diag(r.ravel(), s).reshape(P.shape[:-1] + (3,))

    return gfun


def _plain_metric_fn(metric):
    def gfun(P):
        flat = P.reshape(-1, P.shape[-1])
        s = metric.sample(flat[:, 1:], derivs=0)
        return metric.diag(flat[:, 0], s).reshape(P.shape)

    return gfun


def _fd_christoffel(gfun, P, H):
    """Christoffels at points ``P`` (n, K, m) by central differences of the metric."""
    n, K, m = P.shape
    offs = np.zeros((n, 2 * m, m))
    for k in range(m):
        offs[:, 2 * k, k] = H[:, k]
        offs[:, 2 * k + 1, k] = -H[:, k]
    Q = P[:, :, None, :] + offs[:, None, :, :]
    gq = gfun(Q.reshape(n, K * 2 * m, m)).reshape(n, K, 2 * m, m)
    g0 = gfun(P)
    dg = np.empty((n, K, m, m))
    for k in range(m):
        dg[:, :, k, :] = (gq[:, :, 2 * k] - gq[:, :, 2 * k + 1]) / (2.0 * H[:, None, k, None])
    return christoffel_diag(g0, dg), g0


def _fd_ricci(gfun, P0, H):
    """Ricci tensor at points ``P0`` (n, m), second order in the steps ``H`` (n, m)."""
    n, m = P0.shape
    pts = [P0]
    for k in range(m):
        for sgn in (1.0, -1.0):
            Pk = P0.copy()
            Pk[:, k] += sgn * H[:, k]
            pts.append(Pk)
    P = np.stack(pts, axis=1)
    Gam, g = _fd_christoffel(gfun, P, H)
    G0 = Gam[:, 0]
    dGam = np.empty((n, m) + G0.shape[1:])
    for k in range(m):
        dGam[:, k] = (Gam[:, 1 + 2 * k] - Gam[:, 2 + 2 * k]) / (2.0 * H[:, k, None, None, None])
    # R_bd = d_a G^a_bd - d_d G^a_ab + G^a_ae G^e_bd - G^a_de G^e_ab
    ric = (
        np.einsum("naabd->nbd", dGam)
        - np.einsum("ndaab->nbd", dGam)
        + np.einsum("naae,nebd->nbd", G0, G0)
        - np.einsum("nade,neab->nbd", G0, G0)
    )
    return 0.5 * (ric + np.swapaxes(ric, 1, 2)), g[:, 0]


def _check_interior(metric, r, margin_steps, step):
    r = np.asarray(r, dtype=float)
    lo = r * (1.0 - margin_steps * step)
    hi = r * (1.0 + margin_steps * step)
    if np.any(lo <= metric.r_min) or np.any(hi >= metric.r_max):
        raise ValueError(
            f"points must lie at least {margin_steps} finite-difference steps inside "
            f"({metric.r_min}, {metric.r_max})"
        )


def numeric_ricci_tensor(metric, r, y, step=FD_STEP, richardson=True, return_metric=False):
    """Ricci tensor of ``metric`` in the standard chart, by finite differences.

    Christoffel symbols come from central differences of the metric and the
    Ricci tensor from central differences of the Christoffels (steps
    ``step * r`` radially, ``step`` in angles), then one Richardson
    extrapolation.  On 2-d links each point is evaluated in a rotated
    spherical chart placing it on the equator, and the tensor is mapped back.

    Parameters
    ----------
    r : array_like (n,)
    y : array_like (n, d)

    Returns
    -------
    ndarray (n, m, m)
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    _check_interior(metric, r, 4, step)
    m = metric.m
    n = r.shape[0]
    if metric.dim == 2:
        R = _rotation_frames(y[:, 0], y[:, 1])
        gfun = _rotated_metric_fn(metric, R)
        P0 = np.stack([r, np.full(n, math.pi / 2), np.zeros(n)], axis=1)
        J = np.stack([np.ones(n), np.ones(n), np.sin(y[:, 0])], axis=1)
    else:
        if metric.dim > 1:
            ang = y[:, : metric.dim - 1]
            if np.any(np.sin(ang) < 10 * step):
                raise ValueError("point too close to a singularity of the hyperspherical chart")
        gfun = _plain_metric_fn(metric)
        P0 = np.concatenate([r[:, None], y], axis=1)
        J = np.ones((n, m))

    def at(h):
        H = np.full((n, m), h)
        H[:, 0] = h * r
        return _fd_ricci(gfun, P0, H)

    ric, g = at(step)
    if richardson:
        ric_half, _ = at(step / 2.0)
        ric = (4.0 * ric_half - ric) / 3.0
    out = J[:, :, None] * ric * J[:, None, :]
    if return_metric:
        return out, ric, g
    return out


def numeric_ricci(metric, point, u, v, step=FD_STEP):
    """``Ric(u, v)`` at ``point = (r, y...)`` for chart vectors ``u``, ``v``."""
    point = np.asarray(point, dtype=float)
    ric = numeric_ricci_tensor(metric, point[:1], point[None, 1:], step=step)[0]
    return float(np.asarray(u) @ ric @ np.asarray(v))


def scalar_curvature(metric, r, y, step=FD_STEP):
    """Scalar curvature as the metric trace of :func:`numeric_ricci_tensor`."""
    _, ric_rot, g = numeric_ricci_tensor(metric, r, y, step=step, return_metric=True)
    return np.einsum("naa->n", ric_rot / g[:, None, :])


# ----------------------------------------------------------------------
# connection identity


def radial_identity_check(metric, r, y, Y):
    """Sup over samples of ``|nabla_Y (r d_r) - Y|_g`` with analytic Christoffels.

    Exact (up to round-off) for the exact cone; for perturbed metrics the
    returned number is the deviation from the cone identity.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    s = metric.sample(y)
    g, dg = metric.diag(r, s, derivs=True)
    Gam = christoffel_diag(g, dg)
    X = np.zeros_like(Y)
    X[:, 0] = r
    dX = np.zeros(Y.shape + (Y.shape[1],))
    dX[:, 0, 0] = 1.0  # d_a X^c with a = r, c = r
    nab = np.einsum("na,nac->nc", Y, dX) + np.einsum("ncab,na,nb->nc", Gam, Y, X)
    diff = nab - Y
    return float(np.max(np.sqrt(np.sum(g * diff**2, axis=1))))


# ----------------------------------------------------------------------
# volumes


_PANEL_NODES = 32


def _panel_nodes(metric, r_lo, r_hi):
    """Gauss-Legendre nodes/weights on ``[r_lo, r_hi[j]]`` for each j (log panels)."""
    r_hi = np.atleast_1d(np.asarray(r_hi, dtype=float))
    npan = max(1, int(math.ceil(math.log2(max(np.max(r_hi) / r_lo, 1.0 + 1e-12)))) + 1)
    nodes = _PANEL_NODES
    if metric.has_bump():
        npan *= 4
        nodes = 64
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = r_lo * (r_hi[:, None] / r_lo) ** (np.arange(npan + 1) / npan)
    a, b = edges[:, :-1], edges[:, 1:]
    R = 0.5 * (b - a)[..., None] * x + 0.5 * (b + a)[..., None]
    Wt = 0.5 * (b - a)[..., None] * w
    return R.reshape(len(r_hi), -1), Wt.reshape(len(r_hi), -1)


def core_volume(metric):
    """Exact-cone volume assigned to the excised core ``(0, r_min) x L``."""
    return area(metric.link) * metric.r_min**metric.m / metric.m


def radial_volume(metric, sample, r_hi):
    """Per-point ``int_{r_min}^{r_hi} sqrt(det g) dr`` (relative to g_L measure)."""
    R, Wt = _panel_nodes(metric, metric.r_min, r_hi)
    vals = np.empty_like(R)
    for j in range(R.shape[1]):
        vals[:, j] = metric.volume_density(R[:, j], sample)
    return np.sum(vals * Wt, axis=1)


def ball_volume(metric, r, sample=None):
    """Volume of ``B_r``: core convention plus quadrature over ``(r_min, r) x L``."""
    if not metric.r_min < r <= metric.r_max:
        raise ValueError(f"r = {r} outside ({metric.r_min}, {metric.r_max}]")
    if metric.is_exact:
        shell = area(metric.link) * (r**metric.m - metric.r_min**metric.m) / metric.m
        # still exercise the quadrature path for consistency with perturbed metrics
        return core_volume(metric) + shell
    sample = sample or metric.grid_sample()
    per_point = radial_volume(metric, sample, np.full(sample.size, float(r)))
    return core_volume(metric) + float(per_point @ sample.weights)


def ball_volume_quadrature(metric, r, sample=None):
    """Quadrature-only :func:`ball_volume` (used to cross-check the closed form)."""
    sample = sample or metric.grid_sample()
    per_point = radial_volume(metric, sample, np.full(sample.size, float(r)))
    return core_volume(metric) + float(per_point @ sample.weights)


def radius_for_volume(metric, V):
    """Invert :func:`ball_volume`."""
    from scipy.optimize import brentq

    A = area(metric.link)
    m = metric.m
    guess = (m * V / A) ** (1.0 / m)
    if metric.is_exact:
        if not metric.r_min < guess <= metric.r_max:
            raise ValueError(f"volume {V} outside the annulus range")
        return guess
    sample = metric.grid_sample()
    lo, hi = metric.r_min * (1 + 1e-12), metric.r_max
    f = lambda r: ball_volume(metric, r, sample) - V
    if f(lo) > 0 or f(hi) < 0:
        raise ValueError(f"volume {V} outside the annulus range")
    return brentq(f, lo, hi, xtol=1e-14 * guess, rtol=1e-15)


# ----------------------------------------------------------------------
# slices


@dataclass(frozen=True, eq=False)
class SliceData:
    """Slice geometry; ``coarea_integral`` is the slice integral of ``1/|grad r|``,
    i.e. the r-derivative of the enclosed volume."""

    r: float
    area: float
    H: np.ndarray
    h_norm_sq: np.ndarray
    umbilicity_deviation: float
    grid_shape: tuple = field(default=(1,))
    degree: int | None = None
    coarea_integral: float = float("nan")

    @cached_property
    def H_field(self):
        return self._field(self.H)

    @cached_property
    def h_norm_sq_field(self):
        return self._field(self.h_norm_sq)

    def _field(self, values):
        if self.degree is None:
            raise ValueError("spectral fields are only available for 2-dimensional links")
        return SpectralField.from_values(values, self.degree, *self.grid_shape)


def slice_geometry(metric, r, sample):
    n = sample.size
    d = metric.dim
    g, dg = metric.diag(np.full(n, float(r)), sample, derivs=True)
    return level_set_geometry(g, dg, np.zeros((n, d)), np.zeros((n, d, d)))


def slice_data(metric, r, nlat=None, nlon=None):
    """First and second fundamental form data of ``{r} x L``."""
    if not metric.r_min < r < metric.r_max:
        raise ValueError("slice radius must lie inside the annulus")
    sample = metric.grid_sample(nlat, nlon)
    geo = slice_geometry(metric, r, sample)
    G = metric.link.chart_metric(sample.y, psi=sample.psi)
    dens = geo["sqrt_det_gamma"] / np.sqrt(np.prod(G, axis=1))
    A = float(dens @ sample.weights)
    degree = None
    if metric.dim == 2:
        degree = sample.shape[0] // 2 - 1
    return SliceData(
        float(r),
        A,
        np.real(geo["H"]),
        np.real(geo["h_sq"]),
        float(np.max(geo["umbilicity"])),
        sample.shape,
        degree,
        float((dens / np.real(geo["W"])) @ sample.weights),
    )


# ----------------------------------------------------------------------
# decay norms


def _diff_tensor_fn(metric, gfun_full, gfun_cone):
    def T(P):
        return gfun_full(P) - gfun_cone(P)

    return T


def decay_norm(metric, order, r, step=1e-4, nlat=None, nlon=None):
    """``sup_L sum_{l<=order} r^l |nabla^l (g - g_C)|_{g_C}`` at radius ``r``.

    ``nabla`` is the Levi-Civita connection of the exact cone; derivatives are
    central differences in a pole-free chart around each link point.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    r = float(r)
    _check_interior(metric, np.array([r]), 4, step)
    cone = AsymptoticConeMetric(metric.link, metric.r_min, metric.r_max)
    if metric.dim == 2:
        if nlat is None:
            nlat, nlon = _dense_shape(max(metric.field_degree(), 8))
            nlat, nlon = nlat // 2, nlon // 2
        grid = sphere_grid(nlat, nlon)
        th, ph = grid.theta, grid.phi
        n = th.size
        R = _rotation_frames(th, ph)
        gf, gc = _rotated_metric_fn(metric, R), _rotated_metric_fn(cone, R)
        P0 = np.stack([np.full(n, r), np.full(n, math.pi / 2), np.zeros(n)], axis=1)
    else:
        y = _generic_point(metric.dim)
        n = 1
        gf, gc = _plain_metric_fn(metric), _plain_metric_fn(cone)
        P0 = np.concatenate([[[r]], y], axis=1)
    m = metric.m
    H = np.full((n, m), step)
    H[:, 0] = step * r

    def tensor_T(P):
        return gf(P) - gc(P)

    def nabla_T(P):
        # P: (n, K, m); returns (n, K, m, m, m) with index order (a; b, c)
        Gam, gC = _fd_christoffel(gc, P, H)
        K = P.shape[1]
        offs = np.zeros((n, 2 * m, m))
        for k in range(m):
            offs[:, 2 * k, k] = H[:, k]
            offs[:, 2 * k + 1, k] = -H[:, k]
        Q = (P[:, :, None, :] + offs[:, None]).reshape(n, K * 2 * m, m)
        Tq = tensor_T(Q).reshape(n, K, 2 * m, m)
        T0 = tensor_T(P)
        dT = np.zeros((n, K, m, m, m))
        Tfull = np.zeros((n, K, m, m))
        idx = np.arange(m)
        Tfull[:, :, idx, idx] = T0
        for k in range(m):
            dT[:, :, k, idx, idx] = (Tq[:, :, 2 * k] - Tq[:, :, 2 * k + 1]) / (2.0 * H[:, None, k, None])
        nab = dT - np.einsum("nkeab,nkec->nkabc", Gam, Tfull) - np.einsum(
            "nkeac,nkbe->nkabc", Gam, Tfull
        )
        return nab, Gam, gC, Tfull

    P = P0[:, None, :]
    T0 = tensor_T(P)[:, 0]
    gC0 = gc(P)[:, 0]
    norm0 = np.sqrt(np.sum((T0 / gC0) ** 2, axis=1))
    total = norm0.copy()
    if order >= 1:
        nab, Gam, gC, _ = nabla_T(P)
        nab0 = nab[:, 0]
        inv = 1.0 / gC0
        n1 = np.sqrt(np.einsum("nabc,na,nb,nc->n", nab0**2, inv, inv, inv))
        total += r * n1
    if order >= 2:
        pts = [P0]
        for k in range(m):
            for sgn in (1.0, -1.0):
                Pk = P0.copy()
                Pk[:, k] += sgn * H[:, k]
                pts.append(Pk)
        Ps = np.stack(pts, axis=1)
        nabs, Gams, _, _ = nabla_T(Ps)
        G0 = Gams[:, 0]
        N0 = nabs[:, 0]
        dN = np.empty((n, m, m, m, m))
        for k in range(m):
            dN[:, k] = (nabs[:, 1 + 2 * k] - nabs[:, 2 + 2 * k]) / (2.0 * H[:, k, None, None, None])
        nab2 = (
            dN
            - np.einsum("neab,necd->nabcd", G0, N0)
            - np.einsum("neac,nbed->nabcd", G0, N0)
            - np.einsum("nead,nbce->nabcd", G0, N0)
        )
        inv = 1.0 / gC0
        n2 = np.sqrt(np.einsum("nabcd,na,nb,nc,nd->n", nab2**2, inv, inv, inv, inv))
        total += r**2 * n2
    return float(np.max(total))
