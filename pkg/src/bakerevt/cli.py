"""Experiment driver: validated JSON configs in, CSV tables and a manifest out.

Configs are flat JSON with no defaults for scientific parameters; every run
writes its fully resolved configuration, derived quantities, and a content
digest per output file into ``<name>_manifest.json``.  CSV bodies are
byte-identical across reruns with the same seed (timestamps live only in
the manifest).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, orbits
from .evt import qk_estimator, survival_curve
from .geometry import PeriodicGeometry, theta_sup, write_reference_table
from .measure import (Ball, SRBSampler, annulus_exponent,
                      ball_measure_profile, dimension_formula,
                      draw_typical_center, local_dimension)
from .pointprocess import (estimate_cluster_law, geometric_cluster_test,
                           gof_distance, poisson_pmf, polya_aeppli_pmf,
                           visit_statistics)
from .symbolic import BakerParams, Metric, evaluate_coords, periodic_point
from .ulam import (build_ulam, dump_operator, leading_eigenvalue, punch_hole,
                   punch_hole_bracket)

# ---------------------------------------------------------------------------
# config schemas

_PARAM_PROPS = {
    "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.\-]+$"},
    "seed": {"type": "integer", "minimum": 0},
    "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "gamma_a": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "gamma_b": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
}

_CENTER_PROPS = {
    "center_kind": {"enum": ["srb_typical", "periodic", "coords"]},
    "center_word": {"type": "string", "pattern": "^[01]+$"},
    "center_seed": {"type": "integer", "minimum": 0},
    "center_clip_r": {"type": "number", "exclusiveMinimum": 0,
                      "exclusiveMaximum": 0.5},
    "center_x": {"type": "number", "minimum": 0, "maximum": 1},
    "center_y": {"type": "number", "minimum": 0, "maximum": 1},
}

_CENTER_RULES = [
    {"if": {"properties": {"center_kind": {"const": "periodic"}}},
     "then": {"required": ["center_word"]}},
    {"if": {"properties": {"center_kind": {"const": "srb_typical"}}},
     "then": {"required": ["center_seed", "center_clip_r"]}},
    {"if": {"properties": {"center_kind": {"const": "coords"}}},
     "then": {"required": ["center_x", "center_y"]}},
]

_METRIC = {"enum": ["sup", "euclidean"]}
_RADIUS = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5}
_COUNT = {"type": "integer", "minimum": 1}


def _schema(extra_props: dict, required: list[str], center: bool = True) -> dict:
    props = dict(_PARAM_PROPS)
    if center:
        props.update(_CENTER_PROPS)
    props.update(extra_props)
    out = {
        "type": "object",
        "properties": props,
        "required": ["seed", "alpha", "gamma_a", "gamma_b"] + required,
        "additionalProperties": False,
    }
    if center:
        out["allOf"] = _CENTER_RULES
        out["required"].append("center_kind")
    return out


SCHEMAS = {
    "gumbel": _schema({
        "metric": _METRIC,
        "taus": {"type": "array", "items": {"type": "number", "minimum": 0},
                 "minItems": 1},
        "n": {"type": "integer", "minimum": 2},
        "n_samples": _COUNT,
        "start": {"enum": ["srb", "lebesgue"]},
        "burn_in": {"type": "integer", "minimum": 0},
    }, ["metric", "taus", "n", "n_samples", "start", "burn_in"]),
    "ei": _schema({
        "metric": _METRIC,
        "r": _RADIUS,
        "k_max": {"type": "integer", "minimum": 0},
        "n_samples": _COUNT,
    }, ["metric", "r", "k_max", "n_samples"]),
    "visits": _schema({
        "metric": _METRIC,
        "r": _RADIUS,
        "ts": {"type": "array", "items": {"type": "number",
                                          "exclusiveMinimum": 0},
               "minItems": 1},
        "n_samples": _COUNT,
        "theta_ref": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    }, ["metric", "r", "ts", "n_samples", "theta_ref"]),
    "cluster": _schema({
        "metric": _METRIC,
        "r": _RADIUS,
        "p": {"type": "integer", "minimum": 1},
        "k_max": {"type": "integer", "minimum": 4},
        "n_samples": _COUNT,
    }, ["metric", "r", "p", "k_max", "n_samples"]),
    "ulam": _schema({
        "metric": _METRIC,
        "ms": {"type": "array", "items": {"type": "integer", "minimum": 1,
                                          "maximum": 14}, "minItems": 1},
        "radii": {"type": "array", "items": _RADIUS, "minItems": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "dump": {"type": "boolean"},
    }, ["metric", "ms", "radii", "tol"]),
    "dimension": _schema({
        "metric": _METRIC,
        "radii": {"type": "array", "items": _RADIUS, "minItems": 4},
        "n_samples": _COUNT,
    }, ["metric", "radii", "n_samples"]),
    "annulus": _schema({
        "metric": _METRIC,
        "w": {"type": "number", "exclusiveMinimum": 1},
        "radii": {"type": "array", "items": _RADIUS, "minItems": 3},
        "n_samples": _COUNT,
    }, ["metric", "w", "radii", "n_samples"]),
    "geometry": _schema({
        "ps": {"type": "array", "items": {"type": "integer", "minimum": 1},
               "minItems": 1},
        "ks": {"type": "array", "items": {"type": "integer", "minimum": 0},
               "minItems": 1},
    }, ["ps", "ks"], center=False),
}


# ---------------------------------------------------------------------------
# shared helpers

def _params(cfg: dict) -> BakerParams:
    return BakerParams(cfg["alpha"], cfg["gamma_a"], cfg["gamma_b"])


def _metric(cfg: dict) -> Metric:
    return Metric.SUP if cfg["metric"] == "sup" else Metric.EUCLIDEAN


def _resolve_center(cfg: dict, params: BakerParams, metric: Metric):
    """Returns (coords, derived-info dict, symbolic point or None)."""
    kind = cfg["center_kind"]
    if kind == "periodic":
        pt, p = periodic_point(params, cfg["center_word"])
        c = evaluate_coords(pt)
        return c, {"center_x": c[0], "center_y": c[1],
                   "minimal_period": p}, pt
    if kind == "coords":
        c = (cfg["center_x"], cfg["center_y"])
        return c, {"center_x": c[0], "center_y": c[1]}, None
    sampler = SRBSampler(params, cfg["center_seed"])
    pt = draw_typical_center(sampler, cfg["center_clip_r"], metric)
    c = evaluate_coords(pt)
    return c, {"center_x": c[0], "center_y": c[1],
               "center_symbols": "".join(map(str, pt.symbols.tolist())),
               "center_cursor": pt.cursor}, pt


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, name: str, command: str, cfg: dict,
                    derived: dict, files: list[Path]) -> Path:
    manifest = {
        "command": command,
        "config": cfg,
        "derived": derived,
        "files": [{"name": f.name, "sha256": _sha256(f),
                   "bytes": f.stat().st_size} for f in files],
        "versions": {"bakerevt": __version__, "numpy": np.__version__},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out_dir / f"{name}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# runners

def run_gumbel(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    theta_ref = 1.0
    if cfg["center_kind"] == "periodic" and metric is Metric.SUP:
        theta_ref = theta_sup(PeriodicGeometry.from_word(params,
                                                         cfg["center_word"]))
    results = survival_curve(params, center, metric, cfg["taus"], cfg["n"],
                             cfg["n_samples"], cfg["seed"],
                             start=cfg["start"], burn_in=cfg["burn_in"],
                             theta_ref=theta_ref)
    rows = []
    for r in results:
        p = r.survival.estimate
        th = -math.log(p) / r.tau if 0.0 < p <= 1.0 and r.tau > 0 else float("nan")
        rows.append(("gumbel-" + cfg["start"], center[0], center[1],
                     cfg["metric"], r.tau, r.n, r.survival.n_samples, p,
                     r.survival.std_error, r.reference, th, "block",
                     cfg["seed"]))
    f = _write_csv(out_dir / f"{name}_gumbel.csv",
                   ["experiment", "center_x", "center_y", "metric", "tau",
                    "n", "n_samples", "p_hat", "stderr", "reference",
                    "theta_hat", "method", "seed"], rows)
    info.update({"theta_ref": theta_ref,
                 "levels": [{"tau": r.tau, "u_n": r.u_n, "radius": r.radius}
                            for r in results]})
    return [f], info


def run_ei(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    sampler = SRBSampler(params, cfg["seed"])
    ball = Ball(center, cfg["r"], metric, center_point=pt)
    est = qk_estimator(ball, cfg["k_max"], sampler, cfg["n_samples"])
    f1 = _write_csv(out_dir / f"{name}_ei_summary.csv",
                    ["experiment", "center_x", "center_y", "metric", "r",
                     "n_samples", "theta_hat", "stderr", "method", "seed"],
                    [("ei", center[0], center[1], cfg["metric"], cfg["r"],
                      cfg["n_samples"], est.theta, est.std_error, est.method,
                      cfg["seed"])])
    f2 = _write_csv(out_dir / f"{name}_ei_qk.csv",
                    ["k", "q_hat", "stderr"],
                    [(k, q, math.sqrt(max(q * (1 - q), 0.0) / cfg["n_samples"]))
                     for k, q in enumerate(est.q)])
    info["theta_hat"] = est.theta
    return [f1, f2], info


def run_visits(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    sampler = SRBSampler(params, cfg["seed"])
    ball = Ball(center, cfg["r"], metric, center_point=pt)
    hists = visit_statistics(ball, cfg["ts"], sampler, cfg["n_samples"])
    theta = cfg["theta_ref"]
    krows, srows = [], []
    for h in hists:
        kmax = max(h.counts)
        for k in range(kmax + 1):
            krows.append((h.t, k, h.frequency(k), poisson_pmf(h.t, k),
                          polya_aeppli_pmf(theta, h.t, k)))
        tv_p = gof_distance(h, lambda k: poisson_pmf(h.t, k))
        tv_pa = gof_distance(h, lambda k: polya_aeppli_pmf(theta, h.t, k))
        verdict = "poisson" if tv_p <= tv_pa else "polya_aeppli"
        srows.append((h.t, theta, tv_p, tv_pa, verdict, h.horizon, h.mu,
                      h.n_samples))
    f1 = _write_csv(out_dir / f"{name}_visits_k.csv",
                    ["t", "k", "empirical_p", "poisson_p", "polya_aeppli_p"],
                    krows)
    f2 = _write_csv(out_dir / f"{name}_visits_summary.csv",
                    ["t", "theta_ref", "tv_poisson", "tv_polya_aeppli",
                     "verdict", "horizon", "mu", "n_samples"], srows)
    return [f1, f2], info


def run_cluster(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    sampler = SRBSampler(params, cfg["seed"])
    ball = Ball(center, cfg["r"], metric, center_point=pt)
    law = estimate_cluster_law(ball, cfg["p"], sampler, cfg["n_samples"],
                               cfg["k_max"])
    verdict = geometric_cluster_test(law)
    krows = []
    for k in range(law.alpha_hat.size):
        krows.append((k + 1, law.alpha_hat[k],
                      law.alpha[k] if k < law.alpha.size else "",
                      law.lam[k] if k < law.lam.size else ""))
    f1 = _write_csv(out_dir / f"{name}_cluster_k.csv",
                    ["order", "alpha_hat", "alpha", "lambda"], krows)
    f2 = _write_csv(out_dir / f"{name}_cluster_summary.csv",
                    ["theta_hat", "stderr", "verdict", "max_abs_z", "period",
                     "r", "metric", "n_samples"],
                    [(law.theta, law.std_error, verdict.verdict,
                      verdict.max_abs_z, cfg["p"], cfg["r"], cfg["metric"],
                      cfg["n_samples"])])
    info.update({"theta_hat": law.theta, "verdict": verdict.verdict})
    return [f1, f2], info


def run_ulam(cfg, out_dir, name):
    params = _params(cfg)
    if not params.classical():
        raise ValueError("the grid operator is only built for classical "
                         "parameters (the dissipative invariant measure is "
                         "singular on any cell grid)")
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    rows = []
    files = []
    for m in cfg["ms"]:
        op = build_ulam(m)
        spec = leading_eigenvalue(op, cfg["tol"])
        rows.append((m, "closed", 0.0, spec.lam, spec.residual, ""))
        for r in cfg["radii"]:
            ball = Ball(center, r, metric)
            if metric is Metric.SUP:
                holed = [("exact", punch_hole(op, ball))]
            else:
                inner, outer = punch_hole_bracket(op, ball)
                holed = [("inner", inner), ("outer", outer)]
            for cover, hop in holed:
                spec = leading_eigenvalue(hop, cfg["tol"])
                rows.append((m, f"{cfg['metric']}@{center[0]:g},{center[1]:g}"
                             f";r={r:g};{cover}", hop.hole_measure, spec.lam,
                             spec.residual, spec.theta_spectral))
        if cfg.get("dump", False):
            path = out_dir / f"{name}_operator_m{m}.bin"
            dump_operator(op, path)
            files.append(path)
    f = _write_csv(out_dir / f"{name}_ulam.csv",
                   ["m", "hole_spec", "hole_measure", "lambda", "residual",
                    "theta_spectral"], rows)
    return [f] + files, info


def run_dimension(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    sampler = SRBSampler(params, cfg["seed"])
    radii = sorted(cfg["radii"], reverse=True)
    slope = local_dimension(center, radii, sampler, cfg["n_samples"], metric)
    profile = ball_measure_profile(center, radii, metric, sampler,
                                   cfg["n_samples"])
    rows = [(r, e.estimate, e.std_error, e.n_samples)
            for r, e in zip(radii, profile)]
    f1 = _write_csv(out_dir / f"{name}_dimension_r.csv",
                    ["r", "mu_hat", "stderr", "n_samples"], rows)
    try:
        d_s, d = dimension_formula(params)
        formula = {"d_s": d_s, "d": d}
    except ValueError:
        formula = {}
    f2 = _write_csv(out_dir / f"{name}_dimension_summary.csv",
                    ["slope", "stderr", "d_s_formula", "d_formula"],
                    [(slope.estimate, slope.std_error,
                      formula.get("d_s", ""), formula.get("d", ""))])
    info.update({"slope": slope.estimate, **formula})
    return [f1, f2], info


def run_annulus(cfg, out_dir, name):
    params = _params(cfg)
    metric = _metric(cfg)
    center, info, pt = _resolve_center(cfg, params, metric)
    sampler = SRBSampler(params, cfg["seed"])
    fit, rows = annulus_exponent(center, cfg["radii"], cfg["w"], sampler,
                                 cfg["n_samples"], metric)
    f1 = _write_csv(out_dir / f"{name}_annulus_r.csv",
                    ["r", "ratio", "stderr"],
                    [(r, e.estimate, e.std_error) for r, e in rows])
    ci_lo = fit.estimate - 1.96 * fit.std_error
    f2 = _write_csv(out_dir / f"{name}_annulus_summary.csv",
                    ["delta_hat", "stderr", "ci95_lo", "w", "n_samples"],
                    [(fit.estimate, fit.std_error, ci_lo, cfg["w"],
                      cfg["n_samples"])])
    info.update({"delta_hat": fit.estimate, "ci95_lo": ci_lo})
    return [f1, f2], info


def run_geometry(cfg, out_dir, name):
    path = out_dir / f"{name}_geometry.csv"
    write_reference_table(path, cfg["ps"], cfg["ks"])
    return [path], {}


RUNNERS = {
    "gumbel": run_gumbel,
    "ei": run_ei,
    "visits": run_visits,
    "cluster": run_cluster,
    "ulam": run_ulam,
    "dimension": run_dimension,
    "annulus": run_annulus,
    "geometry": run_geometry,
}


# ---------------------------------------------------------------------------

def _validate(command: str, cfg: dict, source: str) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    msgs = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.path)):
        where = "$" + "".join(f"[{p!r}]" for p in err.absolute_path)
        msgs.append(f"{source}: {where}: {err.message}")
    return msgs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bakerevt",
        description="Reproducible baker-family statistics experiments")
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes for the orbit scans")
    parser.add_argument("--out-dir", default=None,
                        help="output directory (default: $BAKEREVT_OUT_DIR or .)")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}",
              file=sys.stderr)
        return 2
    if not isinstance(cfg, dict):
        print(f"{args.config}: top level must be a JSON object", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    errors = _validate(args.command, cfg, args.config)
    if errors:
        print("\n".join(errors), file=sys.stderr)
        return 2

    out_dir = Path(args.out_dir or os.environ.get("BAKEREVT_OUT_DIR", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    name = cfg.get("name", Path(args.config).stem)
    orbits.set_workers(args.workers)
    try:
        files, derived = RUNNERS[args.command](cfg, out_dir, name)
    except (ValueError, RuntimeError, NotImplementedError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    manifest = _write_manifest(out_dir, name, args.command, cfg, derived, files)
    for f in files + [manifest]:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
