"""Command line front end.

Subcommands: simulate, verify, shoot, classify, sweep.  Exit codes:
0 success, 1 verification threshold failure, 2 bad configuration or
input, 3 chart singularity reached, 4 numerical failure, 5 classifier
and shooting solver disagree.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis import analytic_reference, conservation_report, trajectory_agreement
from .bulk import bulk_inner, pseudo_sphere_residual
from .chart import ChartPoint, embed, unembed
from .dynamics import (Connectability, IntegratorConfig,
                       STATUS_FAILED, STATUS_MAX_STEPS, STATUS_OK,
                       STATUS_SINGULARITY, Trajectory, connectability,
                       integrate_bulk, integrate_geodesic, shoot_geodesic)
from .errors import DeSitterError, NoConvergence, ScenarioError
from .scenario import Scenario, load_scenario

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_NUMERICAL = 4
EXIT_DISAGREE = 5

CSV_COLUMNS = ("s,x0,x1,x2,x3,u0,u1,u2,u3,"
               "X0,X1,X2,X3,X4,V0,V1,V2,V3,V4,"
               "L01,L02,L03,L04,L12,L13,L14,L23,L24,L34,"
               "norm,constraint_residual")

# verify defaults; scenario "thresholds" entries override by key
DEFAULT_THRESHOLDS = {
    "l_drift_rel_max": 1e-8,
    "norm_drift": 1e-8,
    "constraint_max": 1e-8,
    "constraint_max_projected": 1e-12,
    "mac_max": 1e-9,
    "maca_max": 1e-9,
    "geodesic_residual_factor": 3.0,
    "agreement": 1e-7,
}


def _fmt(value: float) -> str:
    # repr round-trips doubles exactly, so reruns are byte identical
    return repr(float(value))


def _fmt_opt(value) -> str:
    return "nan" if value is None else _fmt(value)


def _trajectory_row(traj: Trajectory, i: int) -> list[float]:
    row = [traj.s[i]]
    row.extend(traj.x[i])
    row.extend(traj.u[i])
    row.extend(traj.X[i])
    row.extend(traj.V[i])
    row.extend(traj.L[i])
    row.append(traj.norm[i])
    row.append(traj.constraint_residual[i])
    return [float(v) for v in row]


def trajectory_csv(traj: Trajectory) -> str:
    lines = [CSV_COLUMNS]
    for i in range(traj.n):
        lines.append(",".join(_fmt(v) for v in _trajectory_row(traj, i)))
    return "\n".join(lines) + "\n"


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def trajectory_json(traj: Trajectory) -> str:
    payload = {
        "meta": {
            "ell": traj.ell,
            "mass": traj.mass,
            "mode": traj.mode,
            "status": traj.status,
            "stop_reason": traj.stop_reason,
            "n_samples": traj.n,
        },
        "columns": CSV_COLUMNS.split(","),
        "rows": [_jsonable(_trajectory_row(traj, i)) for i in range(traj.n)],
    }
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _suffixed(path: str, tag: str) -> str:
    stem, dot, ext = path.rpartition(".")
    if dot:
        return f"{stem}.{tag}.{ext}"
    return f"{path}.{tag}"


def _status_exit(*trajs: Trajectory) -> int:
    codes = {t.status for t in trajs}
    if STATUS_FAILED in codes or STATUS_MAX_STEPS in codes:
        return EXIT_NUMERICAL
    if STATUS_SINGULARITY in codes:
        return EXIT_SINGULARITY
    return EXIT_OK


def _subsample(traj: Trajectory, s_values: np.ndarray) -> Trajectory:
    # keep only the samples landing on s_values (adaptive runs record
    # every accepted step in between)
    keep = np.zeros(traj.n, dtype=bool)
    j = 0
    for i in range(traj.n):
        if j < len(s_values) and abs(traj.s[i] - s_values[j]) <= 1e-12:
            keep[i] = True
            j += 1
    return Trajectory(
        s=traj.s[keep], x=traj.x[keep], u=traj.u[keep],
        X=traj.X[keep], V=traj.V[keep], L=traj.L[keep],
        norm=traj.norm[keep], constraint_residual=traj.constraint_residual[keep],
        ell=traj.ell, mass=traj.mass, mode=traj.mode, status=traj.status,
        stop_reason=traj.stop_reason, config=traj.config, forcing=traj.forcing)


def _run_modes(scn: Scenario, mode: str):
    """Integrate the scenario; returns {"intrinsic": traj} and/or {"bulk": traj}."""
    runs = {}
    if mode in ("intrinsic", "both"):
        runs["intrinsic"] = integrate_geodesic(
            scn.chart_state(), scn.integrator, mass=scn.mass,
            forcing=scn.forcing)
    if mode in ("bulk", "both"):
        s_eval = None
        if (mode == "both" and scn.integrator.method == "dp54"
                and runs["intrinsic"].n):
            s_eval = runs["intrinsic"].s
        runs["bulk"] = integrate_bulk(
            scn.bulk_state(), scn.ell, scn.integrator, mass=scn.mass,
            s_eval=s_eval)
    return runs


def cmd_simulate(args) -> int:
    scn = load_scenario(args.config)
    mode = args.mode or scn.mode
    out = args.out or scn.outputs.get("trajectory")
    if mode == "both" and out is None:
        raise ScenarioError("mode 'both' writes two files; --out is required")

    runs = _run_modes(scn, mode)
    render = trajectory_csv if args.format == "csv" else trajectory_json
    if mode == "both":
        _write(render(runs["intrinsic"]), _suffixed(out, "intrinsic"))
        _write(render(runs["bulk"]), _suffixed(out, "bulk"))
    else:
        _write(render(runs[mode]), out)
    return _status_exit(*runs.values())


def _verify_checks(scn: Scenario, runs: dict) -> tuple[dict, bool]:
    thr = dict(DEFAULT_THRESHOLDS)
    thr.update(scn.thresholds)
    checks = []

    def check(name, target, value, threshold):
        ok = bool(value <= threshold) if math.isfinite(value) else False
        checks.append({"name": name, "target": target,
                       "value": _jsonable(float(value)),
                       "threshold": float(threshold), "passed": ok})

    reports = {}
    for tag, traj in runs.items():
        rep = conservation_report(traj)
        reports[tag] = rep
        check("l_drift_rel_max", tag, rep.l_drift_rel_max, thr["l_drift_rel_max"])
        check("norm_drift", tag, rep.norm_drift, thr["norm_drift"])
        if tag == "bulk":
            key = ("constraint_max_projected"
                   if scn.integrator.constraint_projection else "constraint_max")
            check("constraint_max", tag, rep.constraint_max,
                  thr[key] * scn.ell**2)
        check("mac_max", tag, rep.mac_max, thr["mac_max"])
        check("maca_max", tag, rep.maca_max, thr["maca_max"])
        if scn.forcing is None and rep.geodesic_residual_max is not None:
            floor = rep.fd_floor if rep.fd_floor is not None else 0.0
            budget = thr["geodesic_residual_factor"] * max(floor, 1e-15)
            check("geodesic_residual_max", tag, rep.geodesic_residual_max,
                  budget)

    agreement = None
    if len(runs) == 2:
        tr_b = runs["bulk"]
        if scn.integrator.method == "dp54":
            tr_b = _subsample(tr_b, runs["intrinsic"].s)
        agreement = trajectory_agreement(runs["intrinsic"], tr_b)
        check("agreement", "both", agreement, thr["agreement"] * scn.ell)

    passed = all(c["passed"] for c in checks)
    payload = {
        "mode": "both" if len(runs) == 2 else next(iter(runs)),
        "passed": passed,
        "checks": checks,
        "reports": {tag: _jsonable(rep.to_dict()) for tag, rep in reports.items()},
    }
    if agreement is not None:
        payload["agreement"] = _jsonable(float(agreement))
    return payload, passed


def cmd_verify(args) -> int:
    scn = load_scenario(args.config)
    mode = args.mode or scn.mode
    runs = _run_modes(scn, mode)

    status_code = _status_exit(*runs.values())
    payload, passed = _verify_checks(scn, runs)
    _write(json.dumps(payload, sort_keys=True, indent=1) + "\n", args.out)
    if status_code != EXIT_OK:
        return status_code
    return EXIT_OK if passed else EXIT_THRESHOLD


def _parse_vector(text: str, length: int, label: str) -> np.ndarray:
    try:
        v = np.asarray([float(part) for part in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ScenarioError(f"{label}: expected comma separated numbers") from exc
    if v.shape != (length,) or not np.all(np.isfinite(v)):
        raise ScenarioError(f"{label}: expected {length} finite components")
    return v


def _endpoints(args):
    """Returns (Xa, Xb, ell, pa, pb); pa/pb are ChartPoints, or None when
    the bulk point has no image in the chart."""
    ell = args.ell
    if ell <= 0:
        raise ScenarioError("--ell must be positive")
    if args.Xa is not None or args.Xb is not None:
        if args.Xa is None or args.Xb is None or args.frm or args.to:
            raise ScenarioError("give either --from/--to or --Xa/--Xb")
        Xa = _parse_vector(args.Xa, 5, "--Xa")
        Xb = _parse_vector(args.Xb, 5, "--Xb")
        points = []
        for tag, X in (("--Xa", Xa), ("--Xb", Xb)):
            res = abs(pseudo_sphere_residual(X, ell))
            if res > 1e-9 * ell**2:
                raise ScenarioError(f"{tag} is off the pseudo-sphere "
                                    f"(residual {res:.3e})")
            try:
                points.append(unembed(X, ell))
            except DeSitterError:
                points.append(None)
        return Xa, Xb, ell, points[0], points[1]
    if not (args.frm and args.to):
        raise ScenarioError("give either --from/--to or --Xa/--Xb")
    pa = ChartPoint(_parse_vector(args.frm, 4, "--from"), ell)
    pb = ChartPoint(_parse_vector(args.to, 4, "--to"), ell)
    return embed(pa), embed(pb), ell, pa, pb


def cmd_classify(args) -> int:
    Xa, Xb, ell, _, _ = _endpoints(args)
    kind = connectability(Xa, Xb, ell, boundary_tol=args.boundary_tol)
    payload = {
        "ell": ell,
        "inner": float(bulk_inner(Xa, Xb)),
        "class": kind.value,
    }
    _write(json.dumps(payload, sort_keys=True, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_shoot(args) -> int:
    Xa, Xb, ell, pa, pb = _endpoints(args)
    kind = connectability(Xa, Xb, ell, boundary_tol=args.boundary_tol)
    cfg = IntegratorConfig(h=args.h) if args.h else None

    result = None
    failure = ""
    if kind not in (Connectability.NO_GEODESIC, Connectability.COINCIDENT):
        if pa is None or pb is None:
            raise ScenarioError("shooting needs endpoints with chart images; "
                                "use classify for raw bulk points")
        try:
            result = shoot_geodesic(pa, pb, cfg=cfg,
                                    endpoint_tol=args.endpoint_tol)
        except NoConvergence as exc:
            failure = str(exc)

    payload = {
        "ell": ell,
        "inner": float(bulk_inner(Xa, Xb)),
        "class": kind.value,
    }
    if result is not None:
        payload["shooting"] = {
            "converged": True,
            "kind": result.kind.value,
            "u": [float(v) for v in result.u],
            "s_star": float(result.s_star),
            "endpoint_error": float(result.endpoint_error),
            "iterations": int(result.iterations),
        }
        agree = result.kind is kind
    elif kind in (Connectability.NO_GEODESIC, Connectability.COINCIDENT):
        payload["shooting"] = {"converged": False,
                               "reason": f"classifier: {kind.value}"}
        agree = True
    else:
        payload["shooting"] = {"converged": False, "reason": failure}
        agree = False
    payload["agree"] = agree

    _write(json.dumps(payload, sort_keys=True, indent=1) + "\n", args.out)
    return EXIT_OK if agree else EXIT_DISAGREE


SWEEP_COLUMNS = ("parameter,value,status,n_samples,endpoint_error,"
                 "l_drift_rel_max,norm_drift,constraint_max,mac_max,maca_max,"
                 "geodesic_residual_max,fd_floor,straightline_dev")


def _straightline_dev(traj: Trajectory) -> float:
    finite = np.all(np.isfinite(traj.x), axis=1)
    if not finite.any():
        return float("nan")
    s = traj.s[finite, None] - traj.s[0]
    line = traj.x[0] + traj.u[0] * s
    return float(np.max(np.abs(traj.x[finite] - line)))


def _sweep_scenario(scn: Scenario, param: str, value: float) -> Scenario:
    if param == "h":
        cfg = replace(scn.integrator, h=value)
        return replace(scn, integrator=cfg)
    if param == "s_span":
        s0 = scn.integrator.s_span[0]
        cfg = replace(scn.integrator, s_span=(s0, value))
        return replace(scn, integrator=cfg)
    return replace(scn, ell=value)


def _endpoint_error(traj: Trajectory) -> float:
    if traj.status != STATUS_OK or traj.n < 2:
        return float("nan")
    ref = analytic_reference(traj)
    if traj.mode == "bulk":
        return float(np.max(np.abs(traj.X[-1] - ref.X[-1])))
    return float(np.max(np.abs(traj.x[-1] - ref.x[-1])))


def cmd_sweep(args) -> int:
    scn = load_scenario(args.config)
    if scn.sweep is None:
        raise ScenarioError("scenario has no sweep block")
    if scn.mode == "both":
        raise ScenarioError("sweep requires a single-representation mode")
    param, values = scn.sweep
    if param == "ell" and "x" not in scn.initial:
        # chart coordinates are ell independent, bulk ones are not
        raise ScenarioError("ell sweep needs a chart-form initial state")

    lines = [SWEEP_COLUMNS]
    worst = EXIT_OK
    for value in values:
        variant = _sweep_scenario(scn, param, value)
        try:
            traj = _run_modes(variant, variant.mode)[variant.mode]
        except DeSitterError as exc:
            lines.append(",".join([param, _fmt(value), "failed"]
                                  + ["nan"] * 10))
            lines.append(f"# aborted: {exc}")
            worst = EXIT_NUMERICAL
            break
        rep = conservation_report(traj)
        row = [param, _fmt(value), traj.status, str(traj.n),
               _fmt(_endpoint_error(traj)),
               _fmt(rep.l_drift_rel_max), _fmt(rep.norm_drift),
               _fmt(rep.constraint_max), _fmt(rep.mac_max),
               _fmt(rep.maca_max), _fmt_opt(rep.geodesic_residual_max),
               _fmt_opt(rep.fd_floor), _fmt(_straightline_dev(traj))]
        lines.append(",".join(row))
        code = _status_exit(traj)
        if code != EXIT_OK:
            worst = code
            break
    _write("\n".join(lines) + "\n", args.out)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="desitter",
        description="Geodesics and conserved charges on a constant-curvature "
                    "spacetime, in chart coordinates and in the flat "
                    "embedding space.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario=True):
        if scenario:
            p.add_argument("--config", required=True,
                           help="scenario JSON file")
            p.add_argument("--mode", choices=("intrinsic", "bulk", "both"),
                           help="override the scenario mode")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized fixtures (reserved)")

    p_sim = sub.add_parser("simulate", help="integrate and dump a trajectory")
    add_common(p_sim)
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="integrate and check conservation "
                                          "and residual thresholds")
    add_common(p_ver)
    p_ver.set_defaults(func=cmd_verify)

    def add_endpoints(p):
        p.add_argument("--from", dest="frm", help="chart coords x0,x1,x2,x3")
        p.add_argument("--to", help="chart coords x0,x1,x2,x3")
        p.add_argument("--Xa", help="embedding coords X0,...,X4")
        p.add_argument("--Xb", help="embedding coords X0,...,X4")
        p.add_argument("--ell", type=float, default=1.0)
        p.add_argument("--boundary-tol", type=float, default=1e-9,
                       help="relative width of the class boundaries")
        add_common(p, scenario=False)

    p_cls = sub.add_parser("classify",
                           help="geodesic connectability of two points")
    add_endpoints(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_shoot = sub.add_parser("shoot", help="solve the two-point boundary "
                                           "value problem and cross-check "
                                           "the classifier")
    add_endpoints(p_shoot)
    p_shoot.add_argument("--h", type=float, default=None,
                         help="integrator step for the shooting propagator")
    p_shoot.add_argument("--endpoint-tol", type=float, default=1e-10)
    p_shoot.set_defaults(func=cmd_shoot)

    p_sweep = sub.add_parser("sweep", help="rerun a scenario over a grid of "
                                           "one parameter")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DeSitterError as exc:
        # bad states discovered while setting a run up
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
