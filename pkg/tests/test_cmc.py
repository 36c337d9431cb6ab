import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from coniso.cmc import (
    RadialGraph,
    Target,
    assembly_shape,
    enclosed_volume,
    foliate,
    jacobi_spectrum,
    linearization_apply,
    mean_curvature,
    mean_curvature_at,
    mean_curvature_values,
    probe_uniqueness,
    solve_cmc,
)
from coniso.cone import AsymptoticConeMetric, Perturbation, RadialProfile, ball_volume
from coniso.errors import GraphRegularityError, HypothesisViolation
from coniso.link import LinkMetric, area, laplace_spectrum
from coniso.spectral import SpectralField, sphere_grid



@pytest.fixture(scope="module")
def cone08(s2_08):
    return AsymptoticConeMetric.exact(s2_08, 0.5, 200.0)


def _volume(metric, r):
    return area(metric.link) * r**3 / 3


def test_assembly_shape():
    assert assembly_shape(16) == (34, 68)


def test_off_centre_euclidean_sphere(unit_s2):
    """A unit sphere centred at distance 0.3 from the origin has H = 2."""
    E = AsymptoticConeMetric.exact(unit_s2, 0.1, 10.0)
    N, c = 40, 0.3
    grid = sphere_grid(N + 1, 2 * N + 2)
    x = np.sin(grid.theta) * np.cos(grid.phi)
    rad = c * x + np.sqrt(1 - c**2 * (1 - x**2))
    u = SpectralField.from_values(rad - 1.0, N, N + 1, 2 * N + 2)
    H = mean_curvature_values(E, RadialGraph(1.0, u))
    assert np.max(np.abs(H - 2.0)) <= 1e-9


def test_graph_mean_curvature_against_symbolic(frozen):
    ref = frozen["perturbed_graph_H"]
    f = SpectralField.from_triples([[2, 0, 1.0], [1, 1, 0.6]], 4)
    p = Perturbation(RadialProfile("power", 0.1, 1.0), f)
    M = AsymptoticConeMetric(LinkMetric.scaled_sphere(2, 0.8), 1.0, 100.0, p, p)
    s = 1 / math.sqrt(3 / (4 * math.pi))
    u = SpectralField.from_triples([[1, 0, 0.05 * s], [1, 1, 0.03 * s]], 16)
    pts = np.array(ref["points"])
    H = mean_curvature_at(M, RadialGraph(3.0, u), pts[:, 0], pts[:, 1])
    assert_allclose(H, ref["H"], atol=1e-12)


def test_slices_are_graphs_with_zero_u(cone08):
    H = mean_curvature(cone08, RadialGraph.slice(4.0))
    assert H.coeffs[0] / math.sqrt(4 * math.pi) == pytest.approx(0.5, rel=1e-13)
    assert np.max(np.abs(H.coeffs[1:])) <= 1e-13


def test_linearization_against_finite_differences(perturbed):
    rng = np.random.default_rng(4)
    for _ in range(4):
        base = rng.uniform(3, 30)
        u = SpectralField(4, 0.03 * rng.standard_normal(25)).with_degree(12)
        v = SpectralField(4, rng.standard_normal(25)).with_degree(12)
        lin = linearization_apply(perturbed, RadialGraph(base, u), v).coeffs
        h = 1e-5
        fd = (
            mean_curvature(perturbed, RadialGraph(base, u + h * v)).coeffs
            - mean_curvature(perturbed, RadialGraph(base, u - h * v)).coeffs
        ) / (2 * h)
        assert np.linalg.norm(lin - fd) <= 1e-7 * np.linalg.norm(fd)


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_linearization_on_eigenfunctions(cone08, l):
    """At base 1 on the exact cone: -Delta_L v - (m-1) v; scales like 1/base."""
    v = SpectralField.from_triples([[l, 0, 1.0]], 8)
    lam = l * (l + 1) / 0.64
    for base in (1.0, 5.0):
        out = linearization_apply(cone08, RadialGraph.slice(base, 8), v)
        assert_allclose(out.coeffs, (lam - 2.0) / base * v.coeffs, atol=1e-11)


def test_solve_volume_target(perturbed):
    V = ball_volume(perturbed, 6.0) * 1.1
    g, d = solve_cmc(perturbed, Target.volume(V))
    assert d.enclosed_volume == pytest.approx(V, rel=1e-12)
    assert enclosed_volume(perturbed, g) == pytest.approx(V, rel=1e-12)
    assert d.H_osc <= 1e-10
    assert d.iterations <= 10
    assert 0 < d.sup_u < 0.05
    # residual on a finer grid than the one used for assembly
    H_fine = mean_curvature_values(perturbed, g, 60, 120)
    assert np.max(np.abs(H_fine - d.H0)) <= 1e-9


def test_solve_mean_curvature_target(perturbed):
    g, d = solve_cmc(perturbed, Target.mean_curvature(0.2))
    assert d.H0 == 0.2
    assert np.max(np.abs(mean_curvature_values(perturbed, g) - 0.2)) <= 1e-10


def test_homothety_on_exact_cone(cone08):
    V, lam = _volume(cone08, 4.0), 1.7
    g1, _ = solve_cmc(cone08, Target.volume(V))
    g2, _ = solve_cmc(cone08, Target.volume(lam**3 * V))
    assert g2.base_radius == pytest.approx(lam * g1.base_radius, rel=1e-13)
    assert np.max(np.abs(g1.u.coeffs)) <= 1e-12 and np.max(np.abs(g2.u.coeffs)) <= 1e-12


def test_local_uniqueness(perturbed):
    graphs = probe_uniqueness(perturbed, Target.volume(_volume(perturbed, 8.0)), count=5)
    ref = graphs[0].u.coeffs
    for g in graphs[1:]:
        assert np.max(np.abs(g.u.coeffs - ref)) <= 1e-10


def test_result_independent_of_seed(perturbed):
    V = _volume(perturbed, 10.0)
    a, _ = solve_cmc(perturbed, Target.volume(V))
    seed = RadialGraph(9.0, SpectralField.from_triples([[2, 1, 0.05]], 16))
    b, _ = solve_cmc(perturbed, Target.volume(V), seed)
    assert a.base_radius == b.base_radius
    assert np.max(np.abs(a.u.coeffs - b.u.coeffs)) <= 1e-13


def test_ordering_by_mean_curvature(perturbed):
    g1, _ = solve_cmc(perturbed, Target.mean_curvature(0.3))
    g2, _ = solve_cmc(perturbed, Target.mean_curvature(0.2))
    assert np.min(g2.radius_values() - g1.radius_values()) > 0


def test_borderline_link_is_rejected(unit_s2):
    E = AsymptoticConeMetric.exact(unit_s2, 0.5, 50.0)
    with pytest.raises(HypothesisViolation, match="first nonzero Laplace eigenvalue"):
        solve_cmc(E, Target.volume(4 * math.pi * 27 / 3))


def test_irregular_graph_rejected(cone08):
    u = SpectralField.from_triples([[0, 0, 0.9 * math.sqrt(4 * math.pi)]], 8)
    with pytest.raises(GraphRegularityError):
        mean_curvature_values(cone08, RadialGraph(2.0, u))


def test_rebased_is_same_surface():
    g = RadialGraph(3.0, SpectralField.from_triples([[0, 0, 0.1], [2, 1, 0.05]], 8))
    assert_allclose(g.rebased(3.3).radius_values(), g.radius_values(), rtol=1e-14)


@pytest.mark.parametrize("r", [1.0, 4.0, 20.0])
def test_jacobi_on_exact_slices(cone08, s2_08, r):
    evals, stable = jacobi_spectrum(cone08, RadialGraph.slice(r, 12), count=4)
    lam1 = laplace_spectrum(s2_08, 2)[1]
    assert evals[0] == pytest.approx((lam1 - 2) / r**2, abs=1e-8)
    assert stable


def test_jacobi_borderline_is_zero(unit_s2):
    E = AsymptoticConeMetric.exact(unit_s2, 0.5, 50.0)
    evals, stable = jacobi_spectrum(E, RadialGraph.slice(3.0, 10), count=3)
    assert abs(evals[0]) <= 1e-8
    assert stable


def test_foliation_small(perturbed):
    vols = [_volume(perturbed, r) for r in (6.0, 12.0, 24.0)]
    leaves, rep = foliate(perturbed, vols, degree=12)
    assert rep.ok and rep.nested and rep.H_decreasing and rep.all_stable
    assert [d.enclosed_volume for _, d in leaves] == pytest.approx(vols, rel=1e-12)


def test_foliation_order_independent(perturbed):
    vols = [_volume(perturbed, r) for r in (6.0, 12.0)]
    fwd, _ = foliate(perturbed, vols, degree=10)
    back = [solve_cmc(perturbed, Target.volume(V), degree=10)[0] for V in reversed(vols)][::-1]
    for (a, _), b in zip(fwd, back):
        assert np.max(np.abs(a.u.coeffs - b.u.coeffs)) <= 1e-13
