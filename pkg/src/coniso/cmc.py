"""Radial graphs over 2-dimensional links, their mean curvature, and CMC leaves.

A leaf is ``{(rho (1 + u(x)), x) : x in L}`` with ``u`` a truncated harmonic
expansion.  Its mean curvature is evaluated pointwise on an oversampled
quadrature grid from the level-set formula in :mod:`coniso.surface`; the
prescribed-mean-curvature equation is Galerkin-projected onto the harmonics
of degree ``<= N`` and solved by damped Newton iteration.  Jacobians come
from complex-step differentiation of the (complex-safe) geometry code with
respect to the local 2-jet of the graph function, exact to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import eigh, null_space

from .cone import (
    AsymptoticConeMetric,
    core_volume,
    numeric_ricci_tensor,
    radial_volume,
)
from .errors import (
    EigensolverError,
    GraphRegularityError,
    HypothesisViolation,
    NonConvergence,
)
from .link import area, lichnerowicz_check
from .spectral import SpectralField, grid_basis, n_coeffs, real_harmonics, sphere_grid
from .surface import level_set_geometry

__all__ = [
    "RadialGraph",
    "LeafDiagnostics",
    "TargetKind",
    "Target",
    "FoliationReport",
    "leaf_geometry",
    "mean_curvature",
    "mean_curvature_values",
    "mean_curvature_at",
    "linearization_apply",
    "enclosed_volume",
    "solve_cmc",
    "foliate",
    "jacobi_spectrum",
    "probe_uniqueness",
]

NEWTON_TOL = 1e-10
VOLUME_RTOL = 1e-12
MAX_NEWTON = 30
MAX_BACKTRACK = 8
BAND = 0.25  # sup|u| above this is outside the trusted uniqueness band
STABILITY_TOL = 1e-8
_CS_STEP = 1e-30


def _require_surface_link(metric):
    if metric.dim != 2:
        raise ValueError("radial graphs are supported over 2-dimensional links only")


def assembly_shape(degree):
    """Oversampled grid used for nonlinear evaluation and Galerkin projection."""
    return 2 * degree + 2, 4 * degree + 4


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Surface ``r = base_radius * (1 + u(x))`` over the link."""

    base_radius: float
    u: SpectralField

    def __post_init__(self):
        if not self.base_radius > 0:
            raise ValueError("base radius must be positive")

    @classmethod
    def slice(cls, radius, degree=16):
        return cls(float(radius), SpectralField.zeros(degree))

    @property
    def degree(self):
        return self.u.degree

    def sup_u(self, nlat=None, nlon=None):
        if nlat is None:
            nlat, nlon = assembly_shape(self.degree)
        return float(np.max(np.abs(self.u.on_grid(nlat, nlon)["Y"])))

    def radius_values(self, nlat=None, nlon=None):
        if nlat is None:
            nlat, nlon = assembly_shape(self.degree)
        return self.base_radius * (1.0 + self.u.on_grid(nlat, nlon)["Y"])

    def rebased(self, base_radius):
        """Same surface written over another base radius."""
        s = self.base_radius / base_radius
        c = s * np.array(self.u.coeffs)
        c[0] += (s - 1.0) * math.sqrt(4.0 * math.pi)
        return RadialGraph(float(base_radius), SpectralField(self.degree, c))

    def to_json(self):
        return {
            "base_radius": self.base_radius,
            "degree": self.degree,
            "coefficients": [float(x) for x in self.u.coeffs],
        }


@dataclass(frozen=True)
class LeafDiagnostics:
    enclosed_volume: float
    H_mean: float
    H_osc: float
    sup_u: float
    base_radius: float
    H0: float
    iterations: int
    residual_history: tuple
    jacobi_eigenvalues: tuple = ()
    vp_stable: bool | None = None
    in_band: bool = True
    beyond_v0: bool = True

    @property
    def lowest_vp_eigenvalue(self):
        return self.jacobi_eigenvalues[0] if self.jacobi_eigenvalues else float("nan")


class TargetKind(str, Enum):
    MEAN_CURVATURE = "mean_curvature"
    VOLUME = "volume"


@dataclass(frozen=True)
class Target:
    kind: TargetKind
    value: float

    @classmethod
    def mean_curvature(cls, H0):
        return cls(TargetKind.MEAN_CURVATURE, float(H0))

    @classmethod
    def volume(cls, V):
        return cls(TargetKind.VOLUME, float(V))


# ----------------------------------------------------------------------
# geometry of a graph on the assembly grid


def _graph_arrays(metric, base_radius, coeffs, degree, nlat, nlon, basis=None):
    """Radius and chart derivatives of the graph function (coeffs may be complex/batched)."""
    B = grid_basis(degree, nlat, nlon, 2) if basis is None else basis
    rho = base_radius
    u = coeffs @ B["Y"]
    r = rho * (1.0 + u)
    f_d = rho * np.stack([coeffs @ B["t"], coeffs @ B["p"]], axis=-1)
    tp = coeffs @ B["tp"]
    f_dd = rho * np.stack(
        [np.stack([coeffs @ B["tt"], tp], axis=-1), np.stack([tp, coeffs @ B["pp"]], axis=-1)],
        axis=-2,
    )
    return r, f_d, f_dd


def _check_regular(metric, r, u_sup):
    rr = np.real(r)
    if u_sup >= 0.5:
        raise GraphRegularityError(f"sup|u| = {u_sup:.3g} reached the regularity margin 1/2")
    if np.min(rr) <= metric.r_min or np.max(rr) >= metric.r_max:
        raise GraphRegularityError(
            f"graph radius range [{np.min(rr):.6g}, {np.max(rr):.6g}] leaves the annulus "
            f"({metric.r_min}, {metric.r_max})"
        )


def _H_of_coeffs(metric, base_radius, coeffs, degree, nlat, nlon):
    sample = metric.grid_sample(nlat, nlon)
    r, f_d, f_dd = _graph_arrays(metric, base_radius, coeffs, degree, nlat, nlon)
    g, dg = metric.diag(r, sample, derivs=True)
    return level_set_geometry(g, dg, f_d, f_dd, full=False)["H"]


def leaf_geometry(metric, graph, nlat=None, nlon=None):
    """Pointwise geometry of a graph on a grid.

    Returns a dict with ``r``, ``H``, ``h_sq``, ``umbilicity``, ``normal``,
    ``gamma_inv``, ``dA`` (quadrature weights for the induced area), and the
    link ``sample``.
    """
    _require_surface_link(metric)
    if nlat is None:
        nlat, nlon = assembly_shape(graph.degree)
    sample = metric.grid_sample(nlat, nlon)
    r, f_d, f_dd = _graph_arrays(
        metric, graph.base_radius, np.asarray(graph.u.coeffs), graph.degree, nlat, nlon
    )
    _check_regular(metric, r, float(np.max(np.abs(r / graph.base_radius - 1.0))))
    g, dg = metric.diag(r, sample, derivs=True)
    geo = level_set_geometry(g, dg, f_d, f_dd)
    grid = sphere_grid(nlat, nlon)
    geo["dA"] = geo["sqrt_det_gamma"] * grid.weights / np.sin(grid.theta)
    geo["r"] = r
    geo["sample"] = sample
    geo["grid"] = (nlat, nlon)
    return geo


def mean_curvature_values(metric, graph, nlat=None, nlon=None):
    """Pointwise mean curvature on a grid (default: the assembly grid)."""
    return leaf_geometry(metric, graph, nlat, nlon)["H"]


def mean_curvature_at(metric, graph, theta, phi):
    """Pointwise mean curvature at scattered link points."""
    _require_surface_link(metric)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    basis = real_harmonics(graph.degree, theta, phi, 2)
    r, f_d, f_dd = _graph_arrays(
        metric, graph.base_radius, np.asarray(graph.u.coeffs), graph.degree, 0, 0, basis
    )
    _check_regular(metric, r, float(np.max(np.abs(r / graph.base_radius - 1.0))))
    sample = metric.sample(np.stack([theta, phi], axis=1))
    g, dg = metric.diag(r, sample, derivs=True)
    return level_set_geometry(g, dg, f_d, f_dd, full=False)["H"]


def mean_curvature(metric, graph):
    """Mean curvature of the graph projected onto harmonics of the graph's degree."""
    nlat, nlon = assembly_shape(graph.degree)
    H = mean_curvature_values(metric, graph, nlat, nlon)
    return SpectralField.from_values(H, graph.degree, nlat, nlon)


_JET = ("Y", "t", "p", "tt", "tp", "pp")


def _jet_sensitivities(metric, graph, nlat, nlon):
    """``dH/d(jet)`` per node, the jet being ``(u, u_t, u_p, u_tt, u_tp, u_pp)``.

    ``H`` at a node depends only on the local 2-jet of the graph function,
    so six complex-step evaluations give the full linearization.
    """
    c0 = np.asarray(graph.u.coeffs)
    r, f_d, f_dd = _graph_arrays(metric, graph.base_radius, c0, graph.degree, nlat, nlon)
    rho = graph.base_radius
    h = 1j * _CS_STEP * rho
    R = np.repeat(r[None].astype(complex), 6, axis=0)
    Fd = np.repeat(f_d[None].astype(complex), 6, axis=0)
    Fdd = np.repeat(f_dd[None].astype(complex), 6, axis=0)
    R[0] += h
    Fd[1, :, 0] += h
    Fd[2, :, 1] += h
    Fdd[3, :, 0, 0] += h
    Fdd[4, :, 0, 1] += h
    Fdd[4, :, 1, 0] += h
    Fdd[5, :, 1, 1] += h
    sample = metric.grid_sample(nlat, nlon)
    g, dg = metric.diag(R, sample, derivs=True)
    H = level_set_geometry(g, dg, Fd, Fdd, full=False)["H"]
    return H.imag / _CS_STEP


def _linearized_values(sens, basis, coeffs):
    """Apply the jet sensitivities to the coefficient vector(s) ``coeffs``."""
    return sum((coeffs @ basis[k]) * sens[i] for i, k in enumerate(_JET))


def _jacobian(sens, basis, Yw):
    return sum((Yw * sens[i]) @ basis[k].T for i, k in enumerate(_JET))


def linearization_apply(metric, graph, v):
    """Derivative of ``u -> H(u)`` at ``graph`` in direction ``v``.

    At the exact cone with base radius ``rho`` and ``u = 0`` this equals
    ``rho^-1 (-Delta_L v - (m-1) v)``.
    """
    _require_surface_link(metric)
    nlat, nlon = assembly_shape(graph.degree)
    leaf_geometry(metric, graph, nlat, nlon)  # regularity checks
    vv = v.with_degree(graph.degree) if v.degree != graph.degree else v
    sens = _jet_sensitivities(metric, graph, nlat, nlon)
    basis = grid_basis(graph.degree, nlat, nlon, 2)
    vals = _linearized_values(sens, basis, np.asarray(vv.coeffs))
    return SpectralField.from_values(vals, graph.degree, nlat, nlon)


def enclosed_volume(metric, graph, nlat=None, nlon=None):
    """Volume below the graph, with the exact-cone core convention."""
    _require_surface_link(metric)
    if nlat is None:
        nlat, nlon = assembly_shape(graph.degree)
    sample = metric.grid_sample(nlat, nlon)
    r = graph.radius_values(nlat, nlon)
    _check_regular(metric, r, graph.sup_u(nlat, nlon))
    return core_volume(metric) + float(radial_volume(metric, sample, r) @ sample.weights)


def _volume_gradient(metric, graph, nlat, nlon):
    sample = metric.grid_sample(nlat, nlon)
    r = graph.radius_values(nlat, nlon)
    dens = metric.volume_density(r, sample)
    Y = grid_basis(graph.degree, nlat, nlon)["Y"]
    return Y @ (dens * graph.base_radius * sample.weights)


# ----------------------------------------------------------------------
# Newton solver


def _check_invertible(metric):
    rep = lichnerowicz_check(metric.link)
    if not rep.passes:
        raise HypothesisViolation(
            "the linearized mean-curvature operator is not invertible: the first nonzero "
            f"Laplace eigenvalue of the link (lambda1 = {rep.lambda1:.12g}) must exceed "
            f"m - 1 = {metric.m - 1}"
        )
    return rep


def _exact_cone_radius(metric, V):
    return (metric.m * V / area(metric.link)) ** (1.0 / metric.m)


def solve_cmc(metric, target, initial=None, degree=16, tol=NEWTON_TOL, max_iter=MAX_NEWTON):
    """Solve ``H(u) = H0`` (or ``H(u) = const`` with prescribed enclosed volume).

    Parameters
    ----------
    metric : AsymptoticConeMetric
    target : Target
    initial : RadialGraph, optional
        Starting guess.  For volume targets it is re-expressed over the base
        radius ``(m V / area(L))^(1/m)``.
    tol : float
        Sup-norm tolerance on ``H - H0`` over the assembly grid.

    Returns
    -------
    (RadialGraph, LeafDiagnostics)
    """
    _require_surface_link(metric)
    _check_invertible(metric)
    if initial is None:
        if target.kind is TargetKind.VOLUME:
            initial = RadialGraph.slice(_exact_cone_radius(metric, target.value), degree)
        else:
            initial = RadialGraph.slice((metric.m - 1) / target.value, degree)
    graph = initial
    volume_mode = target.kind is TargetKind.VOLUME
    if volume_mode:
        graph = graph.rebased(_exact_cone_radius(metric, target.value))
        H0 = float(np.mean(mean_curvature_values(metric, graph)))
        V = target.value
    else:
        H0 = target.value
        ratio = H0 / ((metric.m - 1) / graph.base_radius)
        if not 0.5 <= ratio <= 2.0:
            raise ValueError("target mean curvature must be within a factor 2 of (m-1)/rho")
    N = graph.degree
    nlat, nlon = assembly_shape(N)
    grid = sphere_grid(nlat, nlon)
    basis2 = grid_basis(N, nlat, nlon, 2)
    Yw = basis2["Y"] * grid.weights
    e0 = Yw.sum(axis=1)  # projections of the constant function
    n = n_coeffs(N)

    def state(gr, h0):
        Hv = mean_curvature_values(metric, gr, nlat, nlon)
        res = Hv - h0
        out = {"H": Hv, "galerkin": Yw @ res, "sup": float(np.max(np.abs(res)))}
        if volume_mode:
            out["vol"] = (enclosed_volume(metric, gr, nlat, nlon) - V) / V
            out["merit"] = max(out["sup"], abs(out["vol"]) * (metric.m - 1) / gr.base_radius)
        else:
            out["merit"] = out["sup"]
        return out

    def converged(st):
        ok = st["sup"] <= tol
        if volume_mode:
            ok = ok and abs(st["vol"]) <= VOLUME_RTOL
        return ok

    st = state(graph, H0)
    history = [st["sup"]]
    iterations = 0
    polished = False
    while True:
        if converged(st):
            if polished or iterations == 0 and st["sup"] < tol * 1e-3:
                break
            polished = True
        elif iterations >= max_iter:
            raise NonConvergence(
                f"Newton iteration stalled after {iterations} steps "
                f"(sup residual {st['sup']:.3e})",
                history,
            )
        J = _jacobian(_jet_sensitivities(metric, graph, nlat, nlon), basis2, Yw)
        if volume_mode:
            gradV = _volume_gradient(metric, graph, nlat, nlon) / V
            A = np.zeros((n + 1, n + 1))
            A[:n, :n] = J
            A[:n, n] = -e0
            A[n, :n] = gradV
            rhs = -np.concatenate([st["galerkin"], [st["vol"]]])
        else:
            A, rhs = J, -st["galerkin"]
        try:
            step = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"singular Newton system: {exc}", history) from exc
        lam = 1.0
        for _ in range(MAX_BACKTRACK + 1):
            c_new = np.asarray(graph.u.coeffs) + lam * step[:n]
            h_new = H0 + lam * step[n] if volume_mode else H0
            trial = RadialGraph(graph.base_radius, SpectralField(N, c_new))
            try:
                st_new = state(trial, h_new)
            except GraphRegularityError:
                st_new = None
            if st_new is not None and (st_new["merit"] < st["merit"] or polished):
                break
            lam *= 0.5
        else:
            raise NonConvergence("line search failed to reduce the residual", history)
        graph, H0, st = trial, h_new, st_new
        iterations += 1
        history.append(st["sup"])
        if polished:
            break
    geo = leaf_geometry(metric, graph, nlat, nlon)
    Hv = np.real(geo["H"])
    dA = np.real(geo["dA"])
    vol = enclosed_volume(metric, graph, nlat, nlon)
    sup_u = graph.sup_u(nlat, nlon)
    diag = LeafDiagnostics(
        enclosed_volume=vol,
        H_mean=float(Hv @ dA / dA.sum()),
        H_osc=float(Hv.max() - Hv.min()),
        sup_u=sup_u,
        base_radius=graph.base_radius,
        H0=float(H0),
        iterations=iterations,
        residual_history=tuple(history),
        in_band=sup_u <= BAND,
        beyond_v0=vol >= _v0(metric),
    )
    return graph, diag


def _v0(metric):
    """Volume of the coordinate ball of radius ``4 r_min`` (smallest trusted leaf)."""
    from .cone import ball_volume

    r = min(4.0 * metric.r_min, metric.r_max)
    return ball_volume(metric, r)


def probe_uniqueness(metric, target, count=8, amplitude=0.1, degree=16, seed=0):
    """Solve from ``count`` random starts with ``sup|u0| <= amplitude``.

    Returns the solved graphs; their coefficient spread measures local
    uniqueness of the leaf.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(count):
        raw = rng.standard_normal(n_coeffs(4))
        f = SpectralField(4, raw).with_degree(degree)
        f = (amplitude / f.sup_norm()) * f * rng.uniform(0.2, 1.0)
        if target.kind is TargetKind.VOLUME:
            base = _exact_cone_radius(metric, target.value)
        else:
            base = (metric.m - 1) / target.value
        g, _ = solve_cmc(metric, target, RadialGraph(base, f), degree=degree)
        graphs.append(g)
    return graphs


# ----------------------------------------------------------------------
# Jacobi operator


def _chunked_ricci_normal(metric, r, y, normal, chunk=256):
    out = np.empty(r.shape[0])
    for s in range(0, r.shape[0], chunk):
        ric = numeric_ricci_tensor(metric, r[s : s + chunk], y[s : s + chunk])
        nn = normal[s : s + chunk]
        out[s : s + chunk] = np.einsum("na,nab,nb->n", nn, ric, nn)
    return out


def jacobi_spectrum(metric, graph, count=6, ricci=None):
    """Lowest eigenvalues of ``-Delta_S - (|h|^2 + Ric(nu, nu))`` on mean-zero functions.

    Galerkin discretization in the harmonics of the graph's degree, pulled
    back to the surface.  ``Ric(nu, nu)`` is computed by finite differences
    unless ``ricci`` (callable ``(r, y, normal) -> values``) is supplied.

    Returns
    -------
    eigenvalues : ndarray
    vp_stable : bool
    """
    _require_surface_link(metric)
    N = graph.degree
    nlat, nlon = assembly_shape(N)
    geo = leaf_geometry(metric, graph, nlat, nlon)
    y = geo["sample"].y
    r = np.real(geo["r"])
    normal = np.real(geo["normal"])
    ric_nn = (ricci or (lambda rr, yy, nn: _chunked_ricci_normal(metric, rr, yy, nn)))(r, y, normal)
    q = np.real(geo["h_sq"]) + ric_nn
    dA = np.real(geo["dA"])
    gi = np.real(geo["gamma_inv"])
    B = grid_basis(N, nlat, nlon, 1)
    Yv, Yt, Yp = B["Y"], B["t"], B["p"]
    K = (
        (Yt * (gi[:, 0, 0] * dA)) @ Yt.T
        + (Yt * (gi[:, 0, 1] * dA)) @ Yp.T
        + (Yp * (gi[:, 1, 0] * dA)) @ Yt.T
        + (Yp * (gi[:, 1, 1] * dA)) @ Yp.T
    )
    Q = (Yv * (q * dA)) @ Yv.T
    M = (Yv * dA) @ Yv.T
    b = Yv @ dA
    Z = null_space(b[None, :])
    A = Z.T @ (K - Q) @ Z
    Mz = Z.T @ M @ Z
    A = 0.5 * (A + A.T)
    Mz = 0.5 * (Mz + Mz.T)
    try:
        w, V = eigh(A, Mz)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"Jacobi eigenproblem failed: {exc}") from exc
    k = min(count, len(w))
    resid = np.linalg.norm(A @ V[:, :k] - Mz @ V[:, :k] * w[:k], axis=0)
    scale = np.linalg.norm(A, 2)
    if np.max(resid) > 1e-8 * max(scale, 1.0):
        raise EigensolverError("Jacobi eigenproblem residual too large", float(np.max(resid)))
    evals = w[:k]
    return evals, bool(evals[0] >= -STABILITY_TOL)


# ----------------------------------------------------------------------
# foliation


@dataclass(frozen=True)
class FoliationReport:
    volumes: tuple
    min_gaps: tuple
    nested: bool
    H_decreasing: bool
    sup_u_decreasing: bool
    all_stable: bool
    all_in_band: bool
    sup_u_slope: float | None = None
    notes: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return self.nested and self.H_decreasing and self.all_stable


def _loglog_slope(radii, sups):
    radii = np.asarray(radii, float)
    sups = np.asarray(sups, float)
    keep = sups > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(radii[keep]), np.log(sups[keep]), 1)[0])


def foliate(metric, volumes, degree=16, jacobi_count=4, tol=NEWTON_TOL):
    """Solve the leaves for an ascending volume grid by continuation.

    Returns ``(leaves, report)`` where ``leaves`` is a list of
    ``(RadialGraph, LeafDiagnostics)``.  A failing leaf raises with the
    leaves solved so far attached as ``exc.partial``.
    """
    _require_surface_link(metric)
    volumes = [float(v) for v in volumes]
    if any(b <= a for a, b in zip(volumes, volumes[1:])):
        raise ValueError("volumes must be strictly increasing")
    _check_invertible(metric)
    leaves = []
    prev = None
    for V in volumes:
        if prev is not None:
            # homothetic rescaling of the previous leaf
            prev = RadialGraph(_exact_cone_radius(metric, V), prev.u)
        try:
            g, d = solve_cmc(metric, Target.volume(V), prev, degree=degree, tol=tol)
            evals, stable = jacobi_spectrum(metric, g, jacobi_count)
        except (NonConvergence, GraphRegularityError, EigensolverError) as exc:
            exc.partial = leaves
            raise
        d = _with_jacobi(d, evals, stable)
        leaves.append((g, d))
        prev = g
    return leaves, foliation_report(metric, leaves)


def _with_jacobi(d, evals, stable):
    from dataclasses import replace

    return replace(d, jacobi_eigenvalues=tuple(float(x) for x in evals), vp_stable=stable)


def foliation_report(metric, leaves):
    nlat_nlon = [assembly_shape(g.degree) for g, _ in leaves]
    radii = [g.radius_values(*s) for (g, _), s in zip(leaves, nlat_nlon)]
    gaps = tuple(float(np.min(b - a)) for a, b in zip(radii, radii[1:]))
    Hs = [d.H0 for _, d in leaves]
    sups = [d.sup_u for _, d in leaves]
    bases = [d.base_radius for _, d in leaves]
    notes = []
    if not all(d.in_band for _, d in leaves):
        notes.append("some leaves exceed the trusted band sup|u| <= 0.25")
    if not all(d.beyond_v0 for _, d in leaves):
        notes.append("some leaves enclose less than the volume of B_{4 r_min}")
    all_zero = all(s <= 1e-13 for s in sups)
    return FoliationReport(
        volumes=tuple(d.enclosed_volume for _, d in leaves),
        min_gaps=gaps,
        nested=all(gp > 0 for gp in gaps),
        H_decreasing=all(b < a for a, b in zip(Hs, Hs[1:])),
        sup_u_decreasing=all_zero or all(b < a for a, b in zip(sups, sups[1:])),
        all_stable=all(bool(d.vp_stable) for _, d in leaves),
        all_in_band=all(d.in_band for _, d in leaves),
        sup_u_slope=None if all_zero else _loglog_slope(bases, sups),
        notes=tuple(notes),
    )
