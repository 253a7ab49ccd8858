"""finslerlab command-line interface.

Exit status: 0 pass, 1 fail verdict, 2 usage / spec / domain error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import (
    DomainError,
    FinslerError,
    ResidualReport,
    TangentSample,
    UsageError,
    samples_to_arrays,
)
from .flatness import (
    hamel_batch,
    hamel_report,
    indicatrix_translation_check,
    minkowski_check,
    param_report,
    randers_report,
)
from .geodesics import integrate_geodesic
from .jets import jet_batch
from .metrics import MetricSpec, build_metric, sample_domain
from .projective import VectorFieldSpec, flow_oracle, killing_report
from .regularity import regularity_summary
from .transforms import CoordinateChange, eval_terms, pullback_by, rectilinear_search

COMMANDS = ("check-hamel", "check-param", "check-rank", "check-randers", "check-minkowski",
            "geodesic", "killing", "terms-ab", "search-rectilinear", "indicatrix")
NEEDS_AUX = {"killing", "terms-ab"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finslerlab", description="Numerical projective-flatness checks for Finsler metrics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--metric", required=True, help="MetricSpec JSON document")
    p.add_argument("--aux", help="coordinate change (terms-ab) or vector field (killing) JSON document")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="json (default) or csv (default for geodesic)")
    p.add_argument("--jobs", type=int, default=0, help="worker threads; 0 means all cores")
    p.add_argument("--x0", type=float, action="append", help="initial point coordinate (repeat per axis)")
    p.add_argument("--y0", type=float, action="append", help="initial direction component (repeat per axis)")
    p.add_argument("--p", type=float, action="append", dest="p_point", help="indicatrix point p (repeat)")
    p.add_argument("--q", type=float, action="append", dest="q_point", help="indicatrix point q (repeat)")
    p.add_argument("--T", type=float, default=1.0, help="geodesic duration")
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--epsilon", type=float, default=0.05, help="flow time for the killing flow oracle")
    p.add_argument("--degree", type=int, default=3, help="search-rectilinear polynomial degree (2 or 3)")
    p.add_argument("--iters", type=int, default=200)
    return p


def resolve_config(args) -> dict:
    seed = args.seed
    env = os.environ.get("FINSLERLAB_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"FINSLERLAB_SEED: expected an integer, got {env!r}") from None
    if args.command in NEEDS_AUX and not args.aux:
        raise UsageError(f"--aux: required for {args.command}")
    if args.samples < 1:
        raise UsageError("--samples: must be >= 1")
    if args.command == "geodesic" and (not args.x0 or not args.y0):
        raise UsageError("--x0/--y0: geodesic needs the initial point and direction")
    if args.command == "indicatrix" and (not args.p_point or not args.q_point):
        raise UsageError("--p/--q: indicatrix needs both points")
    fmt = args.format or ("csv" if args.command == "geodesic" else "json")
    cfg = {
        "command": args.command,
        "metric_path": args.metric,
        "aux_path": args.aux,
        "samples": args.samples,
        "seed": seed,
        "tol": args.tol,
        "format": fmt,
        "jobs": args.jobs,
    }
    if args.command in ("geodesic", "killing"):
        cfg.update(x0=args.x0, y0=args.y0, T=args.T, steps=args.steps)
    if args.command == "killing":
        cfg["epsilon"] = args.epsilon
    if args.command == "search-rectilinear":
        cfg.update(degree=args.degree, iters=args.iters)
    if args.command == "indicatrix":
        cfg.update(p=args.p_point, q=args.q_point)
    return cfg


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"{what}: file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{what}: invalid JSON ({e})") from None


def _tangent(cfg, m, xk, yk) -> TangentSample:
    x, y = cfg[xk], cfg[yk]
    if len(x) != m.dimension or len(y) != m.dimension:
        raise UsageError(f"--{xk}/--{yk}: expected {m.dimension} values each")
    if not bool(m.in_domain(np.asarray(x, dtype=float))):
        raise DomainError(f"--{xk}: {x} lies outside the metric's domain")
    return TangentSample.of(x, y)


def _rank_report(m, samples, tol):
    X, Y = samples_to_arrays(samples)
    summ = regularity_summary(m, samples, tol=tol)
    n = m.dimension
    R = np.stack([np.abs(summ["ranks"] - (n - 1)).astype(float),
                  np.maximum(0.0, -summ["min_eigenvalue"]),
                  summ["kernel_residual"]], axis=1)
    meta = {"rank_ok": summ["rank_ok"], "positive_definite": summ["positive_definite"],
            "kernel_ok": summ["kernel_ok"], "min_eigenvalue": float(np.min(summ["min_eigenvalue"]))}
    note = ("Components: |rank(F_yy) - (n-1)|, negative part of the smallest eigenvalue of g, "
            "|F_yy y|. All zero for a Finsler function at the samples.")
    return ResidualReport.from_arrays("rank", X, Y / np.linalg.norm(Y, axis=1, keepdims=True), R, tol, note, meta)


def _minkowski_report(m, samples, tol):
    v = minkowski_check(m, samples, tol)
    X, Y = samples_to_arrays(samples)
    Y = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    j = jet_batch(m, X, Y, 2)
    P = np.einsum("bki,bk->bi", j.d2E_dxdy, Y) - 0.5 * np.einsum("bik,bk->bi", j.d2E_dxdy, Y)
    R = np.concatenate([j.dF_dx, P], axis=1)
    meta = {"dF_dx_sup": v.dF_dx_sup, "param_sup": v.param_sup, "x_independent": v.x_independent,
            "param_preserving": v.param_preserving, "criteria_agree": v.agree}
    note = "Residual components: dF/dx (n entries) then the F**2 parameter-preserving residual (n entries)."
    return ResidualReport.from_arrays("minkowski", X, Y, R, tol, note, meta)


def _terms_report(m, change, samples, tol):
    X, Y = samples_to_arrays(samples)
    rows, full = [], []
    for s in samples:
        t = eval_terms(m, change, s)
        rows.append(t.term_full - t.term_A - t.term_B)
        full.append(np.max(np.abs(t.term_full)))
    meta = {"term_full_sup": float(np.max(full))}
    note = "term_full - term_A - term_B for the pulled-back metric; an algebraic identity."
    return ResidualReport.from_arrays("terms_ab", X, Y / np.linalg.norm(Y, axis=1, keepdims=True), rows, tol, note, meta)


def run(cfg: dict) -> tuple:
    """Execute a resolved config; returns (exit status, output text)."""
    spec = MetricSpec.from_json(_read_json(cfg["metric_path"], "metric"))
    m = build_metric(spec)
    cfg = dict(cfg, metric=spec.to_json())
    cmd, tol = cfg["command"], cfg["tol"]
    jobs = cfg["jobs"] or (os.cpu_count() or 1)

    if cmd == "geodesic":
        s0 = _tangent(cfg, m, "x0", "y0")
        tr = integrate_geodesic(m, s0, cfg["T"], cfg["steps"])
        ok = (not tr.truncated) and tr.straightness <= tol
        if cfg["format"] == "csv":
            return (0 if ok else 1), tr.to_csv()
        doc = {"name": "geodesic", "verdict": "pass" if ok else "fail", "trace": tr.summary(), "config": cfg}
        return (0 if ok else 1), json.dumps(doc, indent=2, sort_keys=True) + "\n"

    if cmd == "indicatrix":
        p, q = np.asarray(cfg["p"], dtype=float), np.asarray(cfg["q"], dtype=float)
        if len(p) != m.dimension or len(q) != m.dimension:
            raise UsageError(f"--p/--q: expected {m.dimension} values each")
        val = indicatrix_translation_check(m, p, q, count=cfg["samples"], seed=cfg["seed"])
        ok = val <= tol
        doc = {"name": "indicatrix", "verdict": "pass" if ok else "fail", "max_relative_difference": val,
               "config": cfg}
        if cfg["format"] == "csv":
            return (0 if ok else 1), f"max_relative_difference\n{val!r}\n"
        return (0 if ok else 1), json.dumps(doc, indent=2, sort_keys=True) + "\n"

    if cmd == "search-rectilinear":
        samples = sample_domain(m, cfg["samples"], cfg["seed"])
        res = rectilinear_search(m, cfg["degree"], samples, iters=cfg["iters"])
        X, Y = samples_to_arrays(samples)
        Yu = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        R = hamel_batch(pullback_by(m, res.change), X, Yu)
        meta = {"flag": res.flag, "initial_residual": res.initial_residual,
                "achieved_residual": res.achieved_residual, "iterations": res.iterations,
                "change": res.change.to_json()}
        note = ("Hamel residual of the metric pulled back by the best change found. A failure to "
                "converge is inconclusive about projective flatness.")
        rep = ResidualReport.from_arrays("search_rectilinear", X, Yu, R, tol, note, meta)
    else:
        samples = sample_domain(m, cfg["samples"], cfg["seed"])
        if cmd == "check-hamel":
            rep = hamel_report(m, samples, tol, jobs)
        elif cmd == "check-param":
            rep = param_report(m, samples, tol, jobs)
        elif cmd == "check-rank":
            rep = _rank_report(m, samples, tol)
        elif cmd == "check-randers":
            rep = randers_report(m, samples, tol)
        elif cmd == "check-minkowski":
            rep = _minkowski_report(m, samples, tol)
        elif cmd == "killing":
            field = VectorFieldSpec.from_json(_read_json(cfg["aux_path"], "aux"))
            if field.dimension != m.dimension:
                raise UsageError(f"aux.dimension: field has dimension {field.dimension}, metric {m.dimension}")
            cfg["aux"] = field.to_json()
            rep = killing_report(m, field, samples, tol)
            if cfg.get("x0") and cfg.get("y0"):
                fo = flow_oracle(m, field, _tangent(cfg, m, "x0", "y0"), cfg["epsilon"], cfg["T"], cfg["steps"])
                rep.meta.update(flow_defect=fo.defect, flow_image_straightness=fo.image_straightness,
                                flow_truncated=fo.truncated)
        elif cmd == "terms-ab":
            change = CoordinateChange.from_json(_read_json(cfg["aux_path"], "aux"))
            if change.dimension != m.dimension:
                raise UsageError(f"aux.dimension: change has dimension {change.dimension}, metric {m.dimension}")
            cfg["aux"] = change.to_json()
            pulled = pullback_by(m, change)
            rep = _terms_report(m, change, sample_domain(pulled, cfg["samples"], cfg["seed"]), tol)
        else:  # pragma: no cover - argparse restricts the choices
            raise UsageError(f"command: unknown {cmd!r}")

    status = 0 if rep.passed else 1
    if cfg["format"] == "csv":
        return status, rep.to_csv()
    return status, rep.to_json(cfg) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        status, text = run(cfg)
    except (FinslerError, np.linalg.LinAlgError) as e:
        print(f"finslerlab: error: {e}", file=sys.stderr)
        return 2
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
