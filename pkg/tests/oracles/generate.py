"""Independent reference values, frozen into ``frozen.json``.

Run ``python tests/oracles/generate.py`` to regenerate.  Nothing here uses
the package: curvature comes from symbolic differentiation (sympy),
one-dimensional integrals and root finds from mpmath, and link spectra from
Chebyshev collocation of the separated (axisymmetric) eigenvalue ODE, a
method unrelated to the harmonic Galerkin solver under test.
"""

import json
import math
import os

import mpmath as mp
import numpy as np
import sympy as sp
from scipy.linalg import eig

mp.mp.dps = 30
HERE = os.path.dirname(os.path.abspath(__file__))

r, th, ph = sp.symbols("r theta phi", positive=True)
X = (r, th, ph)


def ricci(g):
    """Ricci tensor of a 3x3 sympy metric in coordinates X."""
    ginv = g.inv()
    n = 3
    Gam = [[[sum(ginv[l, s] * (sp.diff(g[s, a], X[b]) + sp.diff(g[s, b], X[a]) - sp.diff(g[a, b], X[s]))
                 for s in range(n)) / 2 for b in range(n)] for a in range(n)] for l in range(n)]
    Ric = sp.zeros(n)
    for b in range(n):
        for d in range(n):
            Ric[b, d] = sum(
                sp.diff(Gam[a][b][d], X[a]) - sp.diff(Gam[a][a][b], X[d])
                + sum(Gam[a][a][e] * Gam[e][b][d] - Gam[a][d][e] * Gam[e][a][b] for e in range(n))
                for a in range(n)
            )
    return Ric, ginv


def divergence_H(g, F):
    """Mean curvature of {F = 0} as div(grad F / |grad F|)."""
    ginv = g.inv()
    sqrtg = sp.sqrt(g.det())
    dF = [sp.diff(F, x) for x in X]
    W = sp.sqrt(sum(ginv[i, j] * dF[i] * dF[j] for i in range(3) for j in range(3)))
    N = [sum(ginv[i, j] * dF[j] for j in range(3)) / W for i in range(3)]
    return sum(sp.diff(sqrtg * N[i], X[i]) for i in range(3)) / sqrtg


def round_metric(scale):
    return sp.diag(1, r**2 * scale, r**2 * scale * sp.sin(th) ** 2)


Y10 = sp.sqrt(3 / (4 * sp.pi)) * sp.cos(th)
Y20 = sp.sqrt(5 / (4 * sp.pi)) * (3 * sp.cos(th) ** 2 - 1) / 2
Y11 = sp.sqrt(3 / (4 * sp.pi)) * sp.sin(th) * sp.cos(ph)


def cone_over_scaled_sphere():
    rho = sp.Rational(4, 5)
    g = round_metric(rho**2)
    Ric, _ = ricci(g)
    Ric = Ric.applyfunc(sp.simplify)
    # g_C-unit theta direction at r = 2
    val = (Ric[1, 1] / g[1, 1]).subs(r, 2)
    return {"tangent_r2": float(val), "radial": float(sp.simplify(Ric[0, 0])), "mixed": float(sp.simplify(Ric[0, 1]))}


def conformal_scalar_curvature():
    """R of dr^2 + r^2 e^{2 psi} g_round for psi = a Y20, versus 2(K-1)/r^2."""
    a = sp.Rational(-1, 20)
    psi = a * Y20
    g = sp.diag(1, r**2 * sp.exp(2 * psi), r**2 * sp.exp(2 * psi) * sp.sin(th) ** 2)
    Ric, ginv = ricci(g)
    R = sum(ginv[i, i] * Ric[i, i] for i in range(3))
    lap = sp.diff(sp.sin(th) * sp.diff(psi, th), th) / sp.sin(th)
    K = sp.exp(-2 * psi) * (1 - lap)
    pts = [(2.0, 0.7), (5.0, 1.9), (3.0, 1.2)]
    fR = sp.lambdify((r, th), R)
    fK = sp.lambdify((r, th), 2 * (K - 1) / r**2)
    return {"points": pts, "R": [float(fR(*p)) for p in pts], "closed_form": [float(fK(*p)) for p in pts]}


def perturbed_slice_H():
    """Slice r = 10 of dr^2 + r^2 (1 + 0.1/r) g_S2(0.8)."""
    b = 1 + sp.Rational(1, 10) / r
    g = round_metric(sp.Rational(16, 25) * b)
    H = divergence_H(g, r - 10)
    return float(sp.N(H.subs({r: 10, th: 1.0}), 20))


def perturbed_graph_H():
    """Graph r = 3 (1 + 0.05 cos(theta) + 0.03 sin(theta) cos(phi)) in a perturbed cone.

    Metric: (1 + 0.1 r^-1 f) dr^2 + r^2 (1 + 0.1 r^-1 f) g_S2(0.8) with f = Y20 + 0.6 Y11.
    """
    f = Y20 + sp.Rational(3, 5) * Y11
    a = 1 + sp.Rational(1, 10) * f / r
    g = sp.diag(a, r**2 * sp.Rational(16, 25) * a, r**2 * sp.Rational(16, 25) * a * sp.sin(th) ** 2)
    u = sp.Rational(1, 20) * sp.cos(th) + sp.Rational(3, 100) * sp.sin(th) * sp.cos(ph)
    F = r - 3 * (1 + u)
    H = divergence_H(g, F)
    fH = sp.lambdify((r, th, ph), H)
    pts = [(0.5, 0.3), (1.3, 2.0), (2.4, 4.1), (1.57, 5.5)]
    vals = [float(fH(3 * (1 + float(u.subs({th: t, ph: p}))), t, p)) for t, p in pts]
    return {"points": pts, "H": vals}


def cap_profile_s3():
    """Unit S^3: boundary area of the cap of volume fraction beta, over the total volume."""
    out = []
    total = 2 * mp.pi**2
    for beta in (0.1, 0.25, 0.5, 0.8):
        vol = lambda t: 4 * mp.pi * mp.quad(lambda s: mp.sin(s) ** 2, [0, t])
        t = mp.findroot(lambda t: vol(t) - beta * total, mp.pi * beta)
        out.append([beta, float(4 * mp.pi * mp.sin(t) ** 2 / total)])
    return out


def axisymmetric_spectrum(psi_of_x, n=96, count=8):
    """Eigenvalues of -Delta_round f = lambda e^{2 psi} f for axisymmetric psi.

    Separation f = g(x) (1-x^2)^{k/2} e^{i k phi}, x = cos theta, and Chebyshev
    collocation of the resulting regular ODE on [-1, 1] for each k.
    """
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    Xd = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (Xd + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    w = np.exp(2 * psi_of_x(x))
    vals = []
    for k in range(0, 6):
        # (1-x^2) g'' - 2 (k+1) x g' - k (k+1) g = -lambda w g
        A = -((1 - x**2)[:, None] * (D @ D) - 2 * (k + 1) * x[:, None] * D - k * (k + 1) * np.eye(n + 1))
        lam = eig(A, np.diag(w), right=False)
        lam = np.sort(lam.real[np.abs(lam.imag) < 1e-8])
        lam = lam[lam > -1e-8][:count]
        mult = 1 if k == 0 else 2
        for v in lam:
            vals.extend([float(v)] * mult)
    return sorted(vals)[:count]


def conformal_links():
    out = {}
    y20 = lambda x: math.sqrt(5 / (4 * math.pi)) * (3 * x**2 - 1) / 2
    y20mp = lambda x: mp.sqrt(5 / (4 * mp.pi)) * (3 * x**2 - 1) / 2
    # phi = -0.05 Y20
    a = -0.05
    lap = lambda x: -6 * a * y20mp(x)  # Y20 is a degree-2 eigenfunction
    K = lambda x: mp.exp(-2 * a * y20mp(x)) * (1 - lap(x))
    xs = np.linspace(-1, 1, 20001)
    Kvals = [float(K(mp.mpf(v))) for v in xs[::10]]
    out["phi_m005_Y20"] = {
        "min_K": min(Kvals),
        "area": float(2 * mp.pi * mp.quad(lambda x: mp.exp(2 * a * y20mp(x)), [-1, 1])),
        "spectrum": axisymmetric_spectrum(lambda x: a * y20(x)),
    }
    # link with min K = 1.2: phi = c0 + b Y20 with c0 from the closed form min-K shift
    b = 0.1
    Kb = lambda x: mp.exp(-2 * b * y20mp(x)) * (1 + 6 * b * y20mp(x))
    mk = min(float(Kb(mp.mpf(v))) for v in xs[::5])
    c0 = 0.5 * math.log(mk / 1.2)
    out["minK_1p2"] = {
        "b_Y20": b,
        "c0": c0,
        "min_K": 1.2,
        "area": float(2 * mp.pi * mp.quad(lambda x: mp.exp(2 * (c0 + b * y20mp(x))), [-1, 1])),
        "spectrum": axisymmetric_spectrum(lambda x: c0 + b * y20(x)),
    }
    # link with area 11: phi = c0 + 0.1 Y20
    base = float(2 * mp.pi * mp.quad(lambda x: mp.exp(2 * b * y20mp(x)), [-1, 1]))
    c1 = 0.5 * math.log(11.0 / base)
    out["area_11"] = {"b_Y20": b, "c0": c1, "area": 11.0, "cone_angle": 11.0 / (4 * math.pi)}
    return out


def perturbed_ball_volume():
    """Ball volume for alpha = beta = 0.05 r^-2 Y20-shaped field over S2(0.8), r_min = 1."""
    eps = 0.05
    rho2 = 0.64
    y20 = lambda x: mp.sqrt(5 / (4 * mp.pi)) * (3 * x**2 - 1) / 2

    def shell(R):
        inner = lambda x: mp.quad(
            lambda s: mp.sqrt(1 + eps * y20(x) / s**2) * s**2 * (1 + eps * y20(x) / s**2), [1, R]
        )
        return 2 * mp.pi * rho2 * mp.quad(inner, [-1, 1])

    core = 4 * mp.pi * rho2 / 3
    return {str(R): float(core + shell(R)) for R in (2.0, 7.5)}


def main():
    data = {
        "cone_ricci_S2_08": cone_over_scaled_sphere(),
        "conformal_scalar_curvature": conformal_scalar_curvature(),
        "perturbed_slice_H_r10": perturbed_slice_H(),
        "perturbed_graph_H": perturbed_graph_H(),
        "cap_profile_S3": cap_profile_s3(),
        "conformal_links": conformal_links(),
        "perturbed_ball_volume": perturbed_ball_volume(),
        "cy_slice_S2_08": float(4 * 0.64 * 4 * mp.pi + 16 * mp.pi),
    }
    with open(os.path.join(HERE, "frozen.json"), "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
