"""Scenario-driven command line: run constructions, emit reports and CSV.

A scenario is one JSON file with a ``command`` key and command-specific
parameters (unknown keys are rejected). Each run writes ``report.json`` plus
CSV sample files into the output directory. Exit codes: 0 all certificates
passed, 1 a certificate failed, 2 scenario parse error, 3 precondition
violation. Reports are byte-reproducible: floats are serialized with 17
significant digits, keys are sorted, and no timestamps are included.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import constructions as cons
from . import corner as cor
from .errors import PreconditionError, SearchError
from .jetcurve import Cos, Jet3Curve, Poly, Sin, Sum
from .spline import two_stage_smooth
from .verify import GridSpec, bisect_param
from .warped import CurvatureSample, DoublyWarpedMetric, sectional

COMMANDS = {}


def command(name, required, optional):
    def wrap(fn):
        COMMANDS[name] = (fn, frozenset(required), dict(optional))
        return fn
    return wrap


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite float in report: {x!r}")
        return format(float(x), ".17g")
    raise TypeError(type(x))


def canonical_json(obj, indent=0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in sorted(obj):
            items.append(f'{inner}"{key}": {canonical_json(obj[key], indent + 1)}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _fmt(obj)


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(float(v), ".17g") for v in row])


class ScenarioError(ValueError):
    """Malformed scenario: unknown key, missing key, or bad type."""


def _take(params: dict, name: str, branch=None):
    cursor = params
    for part in name.split("."):
        if part not in cursor:
            raise ScenarioError(f"missing scenario field: {name!r}")
        cursor = cursor[part]
    return cursor


def _grid_from(params, default_count, default_depth, depth_override, factor=4):
    spec = params or {}
    unknown = set(spec) - {"count", "depth", "factor"}
    if unknown:
        raise ScenarioError(f"unknown grid keys: {sorted(unknown)}")
    depth = int(spec.get("depth", default_depth))
    if depth_override is not None:
        depth = depth_override
    return (int(spec.get("count", default_count)), depth,
            int(spec.get("factor", factor)))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


@command("spline-demo",
         required={"curve", "kink", "eps", "delta"},
         optional={"samples": 512})
def _run_spline_demo(p, ctx):
    curve = Jet3Curve.from_dict(_take(p, "curve"))
    kink, eps, delta = float(p["kink"]), float(p["eps"]), float(p["delta"])
    smoothed = two_stage_smooth(curve, kink, eps, delta)

    lo, hi = curve.domain
    rows = []
    for x in np.linspace(lo, hi, int(p["samples"])):
        a = curve.jet(x, side="left") if curve.kink_order(x) else curve.jet(x)
        b = (smoothed.jet(x, side="left") if smoothed.kink_order(x)
             else smoothed.jet(x))
        rows.append((x, a.value, a.d1, a.d2, b.value, b.d1, b.d2))
    ctx.csv("spline.csv",
            ("x", "in_value", "in_d1", "in_d2", "out_value", "out_d1", "out_d2"),
            rows)

    seam = 0.0
    for x, _ in smoothed.kinks:
        jl, jr = smoothed.jet(x, side="left"), smoothed.jet(x, side="right")
        seam = max(seam, abs(jl.value - jr.value), abs(jl.d1 - jr.d1),
                   abs(jl.d2 - jr.d2))
    outside = [x for x in np.linspace(lo, hi, 257)
               if not (kink - eps - delta <= x <= kink + eps + delta)]
    local = max(abs(smoothed.value(x) - curve.value(x)) for x in outside)
    ctx.check("c2_seams", 1e-9 - seam, "worst jump of value/d1/d2 at seams")
    ctx.check("locality", 1e-12 - local, "output equals input outside windows")
    return {"window": [kink - eps - delta, kink + eps + delta],
            "max_seam_jump": seam, "max_outside_deviation": local}


@command("curvature",
         required={"m", "n", "k", "h"},
         optional={"start_kind": "boundary", "end_kind": "boundary",
                   "grid": None, "threshold": 1e-6, "samples": 200,
                   "expect_constant": None})
def _run_curvature(p, ctx):
    g = DoublyWarpedMetric(
        Jet3Curve.from_dict(_take(p, "k")), Jet3Curve.from_dict(_take(p, "h")),
        int(p["m"]), int(p["n"]), p["start_kind"], p["end_kind"])
    lo, hi = g.domain
    count, depth, factor = _grid_from(p["grid"], 1000, 0, ctx.grid_depth)
    cert = g.min_ricci(GridSpec.line(lo, hi, count, depth, factor),
                       threshold=float(p["threshold"]), workers=ctx.workers)
    ctx.certificate("min_ricci", cert)

    samples = [sectional(g, s) for s in np.linspace(lo, hi, int(p["samples"]))]
    ctx.csv("curvature.csv", CurvatureSample.CSV_HEADER,
            [c.as_row() for c in samples])
    results = {"domain": [lo, hi], "min_ricci": cert.min_margin}
    if p["expect_constant"] is not None:
        want = float(p["expect_constant"])
        dev = max(abs(v - want) for c in samples
                  for v in (c.K_sk, c.K_sh, c.K_kk, c.K_hh, c.K_kh))
        ctx.check("constant_curvature", 1e-8 - dev,
                  f"all sectional values within 1e-8 of {want!r}")
        results["max_constant_deviation"] = dev
    return results


@command("glue-corner",
         required={"left", "right"},
         optional={"eps": None, "delta_ratio": 0.2,
                   "search": None, "grid": None, "threshold": 1e-6,
                   "samples": 200})
def _run_glue_corner(p, ctx):
    left = cor.CornerChart.from_dict(_take(p, "left"))
    right = cor.CornerChart.from_dict(_take(p, "right"))
    angle = cor.dihedral_angle(left, right)
    threshold = float(p["threshold"])
    ratio = float(p["delta_ratio"])
    a_lo, a_hi = left.a_range[0], right.a_range[1]

    count, depth, factor = _grid_from(p["grid"], 241, 3, ctx.grid_depth)

    def certify(chart, delta):
        n = max(count, int(8.0 * (a_hi - a_lo) / delta))
        grid = GridSpec.line(a_lo, a_hi, n, depth, factor)
        cvx = cor.convexity_certificate(chart, grid, threshold, ctx.workers)
        ccv = cor.concavity_certificate(chart, grid, threshold, ctx.workers)
        return cvx, ccv

    searched = None
    if p["eps"] is not None:
        eps = float(p["eps"])
    else:
        spec = p["search"] or {}
        unknown = set(spec) - {"lo", "hi", "tol"}
        if unknown:
            raise ScenarioError(f"unknown search keys: {sorted(unknown)}")
        lo = float(spec.get("lo", 0.02))
        hi = float(spec.get("hi", 0.45 * min(-left.a_range[0], right.a_range[1])))
        tol = float(spec.get("tol", 1e-3))

        def passes(e):
            try:
                chart = cor.glue_and_smooth(left, right, e, ratio * e)
            except PreconditionError:
                return False
            cvx, ccv = certify(chart, ratio * e)
            return cvx.passed and ccv.passed

        eps = bisect_param(passes, lo, hi, tol)
        searched = {"lo": lo, "hi": hi, "tol": tol}

    delta = ratio * eps
    glued = cor.glue_and_smooth(left, right, eps, delta)
    cvx, ccv = certify(glued, delta)
    ctx.certificate("convexity", cvx)
    ctx.certificate("concavity", ccv)

    rows = []
    for a in np.linspace(a_lo, a_hi, int(p["samples"])):
        form = cor.face_second_form(glued, a)
        rows.append(form.as_row() + (cor.face_profile_hessian(glued, a),))
    ctx.csv("face_forms.csv",
            cor.FaceSecondForm.CSV_HEADER + ("profile_hessian",), rows)

    outside = [a for a in np.linspace(a_lo, a_hi, 257)
               if abs(a) > eps + delta]
    local = max(abs(glued.phi.value(a)
                    - (left.phi.value(a) if a < 0 else right.phi.value(a)))
                for a in outside)
    ctx.check("locality", 1e-15 if local == 0.0 else -local,
              "glued phi bit-identical to inputs outside windows")
    return {"dihedral_angle": angle, "eps": eps, "delta": delta,
            "search": searched, "convexity_margin": cvx.min_margin,
            "concavity_margin": ccv.min_margin}


@command("isotopy",
         required={"R", "m", "n", "b1"},
         optional={"nu": None, "nu_search": None, "grid": None,
                   "threshold": 1e-6, "samples": 400})
def _run_isotopy(p, ctx):
    R, m, n, b1 = float(p["R"]), int(p["m"]), int(p["n"]), float(p["b1"])
    threshold = float(p["threshold"])
    spec = p["grid"] or {}
    unknown = set(spec) - {"lambda_count", "s_count", "depth", "factor"}
    if unknown:
        raise ScenarioError(f"unknown grid keys: {sorted(unknown)}")
    lam_count = int(spec.get("lambda_count", 64))
    s_count = int(spec.get("s_count", 256))
    depth = int(spec.get("depth", 2))
    if ctx.grid_depth is not None:
        depth = ctx.grid_depth
    factor = int(spec.get("factor", 2))

    def stage_certs(nu):
        profile = cons.make_boundary_profile(R, nu, b1)
        target = cons.make_isotopy_target(profile)
        stage1 = cons.isotopy_stage1(profile, target, m, n)
        grid1 = GridSpec.box([(0.0, 1.0, lam_count), (0.0, profile.T, s_count)],
                             depth, factor)
        cert1 = stage1.min_ricci(grid1, threshold, ctx.workers)
        stage2 = cons.isotopy_stage2(target.k1, target.h1, R, m, n)
        grid2 = GridSpec.box([(1.0, 2.0, lam_count), (0.0, profile.T, s_count)],
                             depth, factor)
        cert2 = stage2.min_ricci(grid2, threshold, ctx.workers)
        return profile, target, stage1, stage2, cert1, cert2

    searched = None
    if p["nu"] is not None:
        nu = float(p["nu"])
    else:
        spec = p["nu_search"] or {}
        unknown = set(spec) - {"lo", "hi", "tol"}
        if unknown:
            raise ScenarioError(f"unknown nu_search keys: {sorted(unknown)}")
        lo = float(spec.get("lo", 1e-4))
        hi = float(spec.get("hi", 0.2))
        tol = float(spec.get("tol", 1e-3))

        def passes(nu_try):
            try:
                _, _, _, _, c1, c2 = stage_certs(nu_try)
            except PreconditionError:
                return False
            return c1.passed and c2.passed

        nu = bisect_param(passes, lo, hi, tol)
        searched = {"lo": lo, "hi": hi, "tol": tol}

    profile, target, stage1, stage2, cert1, cert2 = stage_certs(nu)
    ctx.certificate("stage1_min_ricci", cert1)
    ctx.certificate("stage2_min_ricci", cert2)
    for chk in profile.report.checks + target.report.checks:
        ctx.check(chk.name, chk.margin, chk.note)

    g_end = stage2.metric_at(2.0)
    dev = 0.0
    for s in np.linspace(0.0, profile.T, 400):
        c = sectional(g_end, s)
        dev = max(dev, *(abs(v - 1.0 / R**2)
                         for v in (c.K_sk, c.K_sh, c.K_kk, c.K_hh, c.K_kh)))
    ctx.check("round_endpoint", 1e-8 - dev,
              "lambda=2 metric has constant curvature 1/R^2")

    rows = []
    k_round = Cos(R, 1.0 / R)
    h_round = Sin(R, 1.0 / R)
    for s in np.linspace(0.0, profile.T, int(p["samples"])):
        rows.append((s, profile.k.value(s), profile.h.value(s),
                     target.k1.value(s), k_round.jet(s).value,
                     h_round.jet(s).value))
    ctx.csv("warping.csv", ("s", "k0", "h0", "k1", "k_round", "h_round"), rows)
    return {"nu": nu, "nu_search": searched,
            "breakpoints": {"T0": profile.T0, "T1": profile.T1,
                            "T2": profile.T2, "T3": profile.T3,
                            "T": profile.T},
            "stage1_margin": cert1.min_margin,
            "stage2_margin": cert2.min_margin,
            "round_endpoint_deviation": dev}


@command("concordance",
         required={"path", "nu"},
         optional={"t_count": 160, "theta_count": 48, "cert_depth": 1,
                   "threshold": 1e-6, "schedule_samples": 200})
def _run_concordance(p, ctx):
    spec = dict(_take(p, "path"))
    kind = spec.pop("type", None)
    if kind == "round_bump":
        unknown = set(spec) - {"n", "base", "amplitude"}
        if unknown:
            raise ScenarioError(f"unknown path keys: {sorted(unknown)}")
        node = Sum((Poly((float(spec.get("base", 1.0)),)),
                    Sin(float(spec.get("amplitude", 0.1)), math.pi)))
        path = cons.RoundRadiusPath(
            Jet3Curve.from_node(node, (0.0, 1.0)), int(spec.get("n", 3)))
    elif kind == "round_constant":
        unknown = set(spec) - {"n", "radius"}
        if unknown:
            raise ScenarioError(f"unknown path keys: {sorted(unknown)}")
        path = cons.RoundRadiusPath(
            Jet3Curve.from_node(Poly((float(spec.get("radius", 1.0)),)),
                                (0.0, 1.0)), int(spec.get("n", 3)))
    else:
        raise ScenarioError(f"unknown path type {kind!r}")

    depth = int(p["cert_depth"])
    if ctx.grid_depth is not None:
        depth = ctx.grid_depth
    params, certs, boundary = cons.concordance_search(
        path, float(p["nu"]), t_count=int(p["t_count"]),
        theta_count=int(p["theta_count"]), cert_depth=depth,
        threshold=float(p["threshold"]), workers=ctx.workers)
    for name, cert in certs.items():
        ctx.certificate(name, cert)
    ctx.check("boundary_t0_end", boundary["t0_end_margin"],
              boundary["t0_end_requirement"])
    ctx.check("boundary_t1_end", boundary["t1_end_margin"],
              boundary["t1_end_requirement"])

    rho, lam = cons.concordance_schedule(params)
    worst = 0.0
    rows = []
    for t in np.exp(np.linspace(math.log(params.t0), math.log(params.t1),
                                int(p["schedule_samples"]))):
        jl, jr = lam.jet(t), rho.jet(t)
        g = cons.gamma_weight(t)
        worst = max(worst, abs(params.alpha * jl.d1 - g),
                    abs(params.beta * jr.d1 / jr.value + g))
        rows.append((t, jl.value, jr.value))
    ctx.csv("schedule.csv", ("t", "lambda", "rho"), rows)
    ctx.check("schedule_residuals", 1e-10 - worst,
              "|alpha lam' - Gamma| and |beta rho'/rho + Gamma| below 1e-10")
    ends = {
        "lambda_t0": lam.value(params.t0), "lambda_t1": lam.value(params.t1),
        "rho_t0": rho.value(params.t0), "rho_t1": rho.value(params.t1),
    }
    ctx.check("schedule_endpoints",
              1e-12 - max(abs(ends["lambda_t0"]), abs(ends["lambda_t1"] - 1.0),
                          abs(ends["rho_t0"] - params.r1),
                          abs(ends["rho_t1"] - params.r0)),
              "lam(t0)=0, lam(t1)=1, rho(t0)=r1, rho(t1)=r0")
    return {"params": params.to_dict(), "theta0": boundary["theta0"],
            "schedule_endpoints": ends, "schedule_residual": worst}


@command("triangle",
         required={"r_values"},
         optional={"tilt": 1e-4})
def _run_triangle(p, ctx):
    solutions = []
    for r in p["r_values"]:
        sol = cons.solve_geodesic_triangle(float(r), tilt=float(p["tilt"]))
        solutions.append({"r": float(r), **sol.to_dict()})
        ctx.check(f"residual_r={float(r):.6g}", 1e-10 - abs(sol.residual),
                  "|sin z - sin 2r| below 1e-10")
        ctx.check(f"base_exceeds_r={float(r):.6g}", sol.x1 - float(r),
                  "triangle base x1 > r")
    return {"solutions": solutions}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


class _Context:
    def __init__(self, out_dir: Path, workers: int, grid_depth):
        self.out_dir = out_dir
        self.workers = workers
        self.grid_depth = grid_depth
        self.certificates = {}
        self.checks = []
        self.artifacts = []

    def certificate(self, name, cert):
        self.certificates[name] = cert

    def check(self, name, margin, note=""):
        self.checks.append({"name": name, "margin": float(margin),
                            "passed": bool(margin > 0.0), "note": note})

    def csv(self, name, header, rows):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(self.out_dir / name, header, rows)
        self.artifacts.append(name)


def run_scenario(scenario, out_dir, threads: int = 1, grid_depth=None,
                 emit_json: bool = False):
    """Run one scenario (dict or path); returns (exit_code, report_dict)."""
    try:
        if not isinstance(scenario, dict):
            scenario = json.loads(Path(scenario).read_text())
        if not isinstance(scenario, dict):
            raise ScenarioError("scenario must be a JSON object")
        name = scenario.get("command")
        if name not in COMMANDS:
            raise ScenarioError(
                f"unknown command {name!r}; choose from {sorted(COMMANDS)}")
        fn, required, optional = COMMANDS[name]
        keys = set(scenario) - {"command"}
        unknown = keys - required - set(optional)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        missing = required - keys
        if missing:
            raise ScenarioError(f"missing scenario keys: {sorted(missing)}")
        params = {**optional, **{k: scenario[k] for k in keys}}
    except (ScenarioError, json.JSONDecodeError, OSError) as exc:
        report = {"error": {"kind": "scenario", "message": str(exc)}}
        print(canonical_json(report), file=sys.stderr)
        return 2, report

    out = Path(out_dir)
    ctx = _Context(out, threads, grid_depth)
    try:
        results = fn(params, ctx)
    except ScenarioError as exc:
        report = {"error": {"kind": "scenario", "message": str(exc)}}
        print(canonical_json(report), file=sys.stderr)
        return 2, report
    except (PreconditionError, SearchError) as exc:
        report = {"command": name,
                  "error": {"kind": type(exc).__name__, "message": str(exc)}}
        if getattr(exc, "report", None) is not None:
            report["error"]["conditions"] = exc.report.to_dict()
        print(canonical_json(report), file=sys.stderr)
        return 3, report

    passed = (all(c.passed for c in ctx.certificates.values())
              and all(c["passed"] for c in ctx.checks))
    report = {
        "command": name,
        "parameters": scenario,
        "results": results,
        "certificates": {k: v.to_dict() for k, v in ctx.certificates.items()},
        "checks": ctx.checks,
        "passed": passed,
        "artifacts": {"csv": ctx.artifacts},
    }
    out.mkdir(parents=True, exist_ok=True)
    text = canonical_json(report) + "\n"
    (out / "report.json").write_text(text)
    if emit_json:
        sys.stdout.write(text)
    return (0 if passed else 1), report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="riccicert",
        description="Warped-product constructions and positivity certificates")
    parser.add_argument("scenario", help="path to a scenario JSON file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid scans")
    parser.add_argument("--grid-depth", type=int, default=None,
                        help="override every grid refinement depth")
    parser.add_argument("--json", action="store_true",
                        help="also print the report to stdout")
    args = parser.parse_args(argv)
    code, _ = run_scenario(args.scenario, args.out, threads=args.threads,
                           grid_depth=args.grid_depth, emit_json=args.json)
    return code


if __name__ == "__main__":
    sys.exit(main())
