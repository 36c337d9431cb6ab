"""Command-line entry point: ``coniso <command> --config run.json``.

Exit codes: 0 success, 1 solver/eigensolver failure or failed verification,
2 configuration error, 3 violated geometric hypothesis.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .cmc import Target, foliate, jacobi_spectrum, solve_cmc
from .cone import cone_ricci, decay_norm, numeric_ricci_tensor
from .config import DEFAULTS, ConfigError, load_config, write_csv, write_json
from .errors import (
    ConisoError,
    EigensolverError,
    GraphRegularityError,
    HypothesisViolation,
    HypothesisWarning,
    NonConvergence,
)
from .iso import Slab, cone_angle_report, iso_report, levy_gromov_check
from .link import area, laplace_spectrum, lichnerowicz_check
from .verify import run_invariants

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_HYPOTHESIS = 0, 1, 2, 3


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    p = argparse.ArgumentParser(
        prog="coniso",
        description="CMC foliations, curvature and isoperimetric diagnostics on conical manifolds.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default="coniso-out", help="output directory")
    common.add_argument("--tol", type=float, help="Newton sup-residual tolerance")
    common.add_argument("--count", type=int, help="number of eigenvalues")
    common.add_argument("--volumes", type=_floats, help="ascending enclosed volumes a,b,c")
    common.add_argument("--betas", type=_floats, help="area fractions in (0,1)")
    helps = {
        "spectrum": "Laplace spectrum of the link and eigenvalue-gap verdict",
        "curvature": "closed-form vs finite-difference cone Ricci, and decay norms",
        "foliate": "CMC leaves for a volume grid",
        "stability": "Jacobi spectra of CMC leaves",
        "cone-angle": "cone angle verdict and slab isoperimetric report",
        "profile": "link isoperimetric profile against the round sphere",
        "verify": "run the invariant suite",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def _settings(cfg, args):
    s = cfg.settings()
    if args.tol is not None:
        s["newton_tol"] = args.tol
    if args.count is not None:
        s["count"] = args.count
    if args.volumes is not None:
        s["volumes"] = list(args.volumes)
    if args.betas is not None:
        s["betas"] = list(args.betas)
    return s


def _volumes(cfg, s):
    if s["volumes"]:
        return s["volumes"]
    M = cfg.metric
    rs = s["radii"] or list(np.geomspace(4 * M.r_min, 0.8 * M.r_max, 6))
    A = area(M.link)
    return [A * r**M.m / M.m for r in rs]


# ----------------------------------------------------------------------
# commands; each returns (exit code, list of written files)


def cmd_spectrum(cfg, s, out):
    lam = laplace_spectrum(cfg.link, max(2, s["count"]))
    rep = lichnerowicz_check(cfg.link)
    f1 = os.path.join(out, "spectrum.csv")
    write_csv(f1, ["index", "eigenvalue"], [(i, float(v)) for i, v in enumerate(lam)])
    f2 = os.path.join(out, "lichnerowicz.json")
    write_json(
        f2,
        {
            "ricci_bound": rep.ricci_bound,
            "lambda1": rep.lambda1,
            "m_minus_1": cfg.link.m - 1,
            "passes": rep.passes,
        },
    )
    verdict = "holds" if rep.passes else "fails"
    print(f"lambda1 = {rep.lambda1:.12g}; gap condition lambda1 > m-1 = {cfg.link.m - 1} {verdict}")
    return EXIT_OK, [f1, f2]


def _curvature_rows(cfg):
    from .cone import AsymptoticConeMetric

    M = cfg.metric
    C = AsymptoticConeMetric(M.link, M.r_min, M.r_max)
    d = M.dim
    rng = np.random.default_rng(0)
    radii = s_radii = list(np.geomspace(2 * M.r_min, 0.5 * M.r_max, 5))
    rows = []
    for r in s_radii:
        if d == 2:
            y = np.array([[rng.uniform(0.4, math.pi - 0.4), rng.uniform(0, 2 * math.pi)]])
        else:
            y = rng.uniform(0.4, math.pi - 0.4, (1, d))
        ric = numeric_ricci_tensor(C, [r], y, step=cfg.fd_step)[0]
        G = M.link.chart_metric(y)[0]
        X = np.zeros(d + 1)
        X[1] = 1.0 / (r * math.sqrt(G[0]))
        radial = np.zeros(d + 1)
        radial[0] = 1.0
        for name, u, v in (("radial", radial, radial), ("mixed", radial, X), ("tangent", X, X)):
            num = float(u @ ric @ v)
            exact = cone_ricci(M.link, r, name, y)
            rows.append((float(r), name, exact, num, abs(num - exact)))
    return radii, rows


def cmd_curvature(cfg, s, out):
    radii, rows = _curvature_rows(cfg)
    f1 = os.path.join(out, "curvature.csv")
    write_csv(f1, ["r", "direction", "closed_form", "numeric", "abs_diff"], rows)
    M = cfg.metric
    drows = []
    for r in radii:
        drows.append((float(r),) + tuple(decay_norm(M, k, r) for k in (0, 1, 2)))
    f2 = os.path.join(out, "decay.csv")
    write_csv(f2, ["r", "k0", "k1", "k2"], drows)
    worst = max(row[-1] for row in rows)
    print(f"max |closed form - finite difference| = {worst:.3e}")
    return EXIT_OK, [f1, f2]


def cmd_foliate(cfg, s, out):
    leaves, rep = foliate(cfg.metric, _volumes(cfg, s), degree=cfg.degree, tol=s["newton_tol"])
    f1 = os.path.join(out, "leaves.json")
    write_json(f1, [dict(g.to_json(), volume=d.enclosed_volume, H0=d.H0) for g, d in leaves])
    f2 = os.path.join(out, "foliation.csv")
    write_csv(
        f2,
        ["V", "r", "sup_u", "H_mean", "H_osc", "lowest_vp_eigenvalue"],
        [
            (d.enclosed_volume, d.base_radius, d.sup_u, d.H_mean, d.H_osc, d.lowest_vp_eigenvalue)
            for _, d in leaves
        ],
    )
    f3 = os.path.join(out, "foliation_report.json")
    write_json(
        f3,
        {
            "nested": rep.nested,
            "min_gaps": list(rep.min_gaps),
            "H_decreasing": rep.H_decreasing,
            "sup_u_decreasing": rep.sup_u_decreasing,
            "sup_u_loglog_slope": rep.sup_u_slope,
            "all_vp_stable": rep.all_stable,
            "all_in_band": rep.all_in_band,
            "notes": list(rep.notes),
        },
    )
    print(
        f"{len(leaves)} leaves; nested={rep.nested} H_decreasing={rep.H_decreasing} "
        f"vp_stable={rep.all_stable}"
    )
    return (EXIT_OK if rep.ok else EXIT_SOLVER), [f1, f2, f3]


def cmd_stability(cfg, s, out):
    rows = []
    g = None
    for V in _volumes(cfg, s):
        g, d = solve_cmc(cfg.metric, Target.volume(V), g, degree=cfg.degree, tol=s["newton_tol"])
        evals, stable = jacobi_spectrum(cfg.metric, g, s["count"])
        for k, e in enumerate(evals):
            rows.append((d.enclosed_volume, d.base_radius, k, float(e), stable))
    f = os.path.join(out, "jacobi.csv")
    write_csv(f, ["V", "r", "index", "eigenvalue", "vp_stable"], rows)
    return EXIT_OK, [f]


def cmd_cone_angle(cfg, s, out):
    rep = cone_angle_report(cfg.link)
    M = cfg.metric
    radii = s["radii"] or list(np.geomspace(2 * M.r_min, 0.5 * M.r_max, 3))
    slabs = []
    for r in radii:
        ir = iso_report(M, Slab(r))
        slabs.append(dict(ir.to_json(), r=float(r)))
    f = os.path.join(out, "cone_angle.json")
    write_json(f, dict(rep.to_json(), slabs=slabs))
    print(f"cone angle = {rep.value:.15g} ({rep.verdict.value})")
    return EXIT_OK, [f]


def cmd_profile(cfg, s, out):
    betas = s["betas"] or list(np.round(np.linspace(0.05, 0.95, 19), 12))
    rows = levy_gromov_check(cfg.link, betas)
    f = os.path.join(out, "profile.csv")
    write_csv(
        f,
        ["beta", "link_estimate", "sphere_profile", "method", "verdict"],
        [(r.beta, r.link_estimate, r.sphere_profile, r.method.value, r.verdict.value) for r in rows],
    )
    return EXIT_OK, [f]


def cmd_verify(cfg, s, out):
    from dataclasses import replace

    cfg = replace(cfg, tol=s["newton_tol"], volumes=tuple(s["volumes"]), betas=tuple(s["betas"]))
    results = run_invariants(cfg)
    f = os.path.join(out, "verify.csv")
    write_csv(
        f,
        ["module", "invariant", "status", "value", "tolerance", "detail"],
        [(r.module, r.name, r.status, r.value, r.tolerance, r.detail) for r in results],
    )
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.status.upper():4}  {r.module:14} {r.name:<{width}}  {r.detail}")
    failed = sum(r.failed for r in results)
    print(f"{len(results)} invariants, {failed} failed")
    return (EXIT_SOLVER if failed else EXIT_OK), [f]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "curvature": cmd_curvature,
    "foliate": cmd_foliate,
    "stability": cmd_stability,
    "cone-angle": cmd_cone_angle,
    "profile": cmd_profile,
    "verify": cmd_verify,
}


def _write_metadata(cfg, s, args, out, files):
    write_json(
        os.path.join(out, "metadata.json"),
        {
            "command": args.command,
            "version": __version__,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "config": cfg.raw,
            "settings": s,
            "defaults": DEFAULTS,
            "outputs": [os.path.basename(f) for f in files],
        },
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default", HypothesisWarning)
    try:
        cfg = load_config(args.config)
        s = _settings(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    try:
        code, files = COMMANDS[args.command](cfg, s, args.out)
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NonConvergence, EigensolverError, GraphRegularityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConisoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write_metadata(cfg, s, args, args.out, files)
    return code


if __name__ == "__main__":
    sys.exit(main())
