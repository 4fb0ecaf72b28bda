"""Command-line interface: ``degenflow <subcommand> ...``.

Every run writes exactly one JSON report (to ``--report`` or stdout) holding
the resolved configuration, a status, and either the result or the typed
error that stopped the run. Exit status is 0 on success, 1 on an analysis
error and 2 on an input or configuration error.
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigInvalid, DegenflowError, InputError, InputParseError
from .io import (dumps, loads, path_from_json, path_to_json, polytope_from_json, read_json,
                 ring_from_json, table_from_json, write_json)

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["degenflow_version", "command", "config", "status", "error", "result"],
    "additionalProperties": False,
    "properties": {
        "degenflow_version": {"type": "string"},
        "command": {"enum": ["gen-path", "analyze-path", "ring-degenerate", "futaki",
                             "soliton", "p1-flow"]},
        "config": {"type": "object"},
        "status": {"enum": ["ok", "error"]},
        "error": {
            "oneOf": [
                {"type": "null"},
                {"type": "object", "required": ["name", "module", "message"],
                 "properties": {"name": {"type": "string"}, "module": {"type": "string"},
                                "message": {"type": "string"}, "details": {"type": "object"}}},
            ]
        },
        "result": {"type": ["object", "null"]},
    },
    "allOf": [
        {"if": {"properties": {"status": {"const": "ok"}}},
         "then": {"properties": {"error": {"type": "null"}, "result": {"type": "object"}}}},
        {"if": {"properties": {"status": {"const": "error"}}},
         "then": {"properties": {"error": {"type": "object"}}}},
    ],
}

RESULT_SCHEMAS = {
    "analyze-path": {
        "type": "object",
        "required": ["lambda_spectrum", "multiplicities", "residuals", "case", "filtration",
                     "weights"],
        "properties": {
            "lambda_spectrum": {"type": "array", "items": {"type": "number"}},
            "multiplicities": {"type": "array", "items": {"type": "integer"}},
            "residuals": {"type": "object"},
            "case": {"enum": ["I", "II"]},
            "filtration": {"type": "object", "required": ["jumps", "dims"]},
            "weights": {"type": "array", "items": {
                "type": "object", "required": ["vector_id", "raw", "snapped"]}},
        },
    },
    "gen-path": {"type": "object", "required": ["out", "dim", "steps", "predicted"]},
    "ring-degenerate": {"type": "object", "required": ["weights", "degrees"]},
    "futaki": {"type": "object", "required": ["fut", "V", "vprime", "extrapolation"]},
    "soliton": {"type": "object", "required": ["vector", "residual", "iterations"]},
    "p1-flow": {"type": "object", "required": ["case_II", "series", "h2"]},
}


def validate_report(report):
    """Raise ``jsonschema.ValidationError`` unless ``report`` matches the schema."""
    jsonschema.validate(report, REPORT_SCHEMA)
    if report["status"] == "ok":
        jsonschema.validate(report["result"], RESULT_SCHEMAS[report["command"]])


# --- argument helpers ------------------------------------------------------

def _floats(text):
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigInvalid(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals or not np.all(np.isfinite(vals)):
        raise ConfigInvalid(f"expected finite comma-separated numbers, got {text!r}")
    return vals


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigInvalid(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def threads():
    """Worker count from ``DEGENFLOW_THREADS`` (default 1)."""
    raw = os.environ.get("DEGENFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"DEGENFLOW_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigInvalid("DEGENFLOW_THREADS must be at least 1")
    return n


@contextmanager
def ordered_map():
    """An order-preserving ``map`` backed by a thread pool when threads > 1."""
    n = threads()
    if n == 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map


# --- subcommands -----------------------------------------------------------

def cmd_gen_path(args):
    from .flows import SynthPathConfig, synth_path

    cfg = {}
    if args.config:
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise InputParseError("synthetic path config must be a JSON object")
    overrides = {
        "spectrum": _floats(args.spectrum) if args.spectrum else None,
        "multiplicities": _ints(args.mults) if args.mults else None,
        "steps": args.steps, "noise": args.noise, "decay": args.decay, "theta": args.theta,
        "twist": args.twist, "seed": args.seed,
        "random_frame": True if args.random_frame else None,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if "spectrum" not in cfg:
        raise ConfigInvalid("gen-path needs --spectrum or a config providing it")
    try:
        config = SynthPathConfig(**cfg)
    except TypeError as exc:
        raise ConfigInvalid(f"bad synthetic path config: {exc}") from exc
    config.validate()
    if args.dim is not None and args.dim != config.dim:
        raise ConfigInvalid(f"--dim {args.dim} disagrees with multiplicities (sum {config.dim})")
    if not args.out:
        raise ConfigInvalid("gen-path needs --out")
    resolved = {"synth": config.to_dict(), "out": args.out}
    path, truth = synth_path(config)
    write_json(path_to_json(path, kind="transitions"), args.out)
    result = {"out": args.out, "dim": config.dim, "steps": config.steps,
              "predicted": {"lambda_spectrum": truth.lam.spectrum.tolist(),
                            "multiplicities": list(truth.lam.multiplicities)}}
    return resolved, result


def _probe_vectors(dim, seed):
    rng = np.random.default_rng(seed)
    generic = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return np.vstack([np.eye(dim, dtype=complex), generic / np.linalg.norm(generic)])


def cmd_analyze_path(args):
    from .asymptotics import PathAnalyzer
    from .reps import RepDescriptor

    desc = RepDescriptor.parse(args.rep)
    resolved = {"input": args.input, "rep": str(desc), "tail_fraction": args.tail_fraction,
                "star_tol": args.star_tol, "snap_tol": args.snap_tol,
                "filt_tol": args.filt_tol, "lambda_zero_tol": args.lambda_zero_tol,
                "split_method": args.split_method, "probe_seed": args.seed,
                "probes": "standard basis of the representation, then one random vector"}
    path = path_from_json(read_json(args.input))
    est = PathAnalyzer(tail_fraction=args.tail_fraction, star_tol=args.star_tol,
                       snap_tol=args.snap_tol, filt_tol=args.filt_tol,
                       lambda_zero_tol=args.lambda_zero_tol, rep=str(desc),
                       split_method=args.split_method).fit(path)
    result = est.report(_probe_vectors(desc.dim(path.dim), args.seed))
    return resolved, result


def cmd_ring_degenerate(args):
    from .ringfilt import RingDegeneration, perturb_rational

    weights = _floats(args.weights)
    resolved = {"ring": args.ring, "weights": weights, "perturb": args.perturb,
                "n_samples": args.n_samples, "seed": args.seed}
    ring = ring_from_json(read_json(args.ring))
    perturbation = None
    if args.perturb:
        gamma, fracs = perturb_rational(weights, ring)
        perturbation = {"original": weights, "gamma": np.asarray(gamma, dtype=float).tolist(),
                        "fractions": [str(f) for f in fracs]}
        weights = perturbation["gamma"]
    est = RingDegeneration(weights, n_samples=args.n_samples, seed=args.seed).fit(ring)
    result = est.report()
    result["perturbation"] = perturbation
    return resolved, result


def _load_table(args):
    from .futaki import weights_from_polytope

    if bool(args.polytope) == bool(args.table):
        raise ConfigInvalid("give exactly one of --polytope and --table")
    if args.polytope:
        P = polytope_from_json(read_json(args.polytope))
        if args.kmax is not None:
            from .futaki import PolytopeData
            P = PolytopeData(P.vertices, kmax=args.kmax)
        table = weights_from_polytope(P)
        info = {"polytope": args.polytope, "kmax": P.kmax,
                "ehrhart": table.meta.get("ehrhart"),
                "ehrhart_exact": table.meta.get("ehrhart_exact")}
    else:
        table = table_from_json(read_json(args.table))
        if args.kmax is not None:
            table = table.truncated(args.kmax)
        info = {"table": args.table, "kmax": table.kmax}
    return table, info


def _extrapolation_dict(ex):
    return {"value": ex.value, "residual": ex.residual, "shifted_value": ex.shifted_value,
            "stable": ex.stable, "ks": ex.ks}


def cmd_futaki(args):
    from .futaki import df_and_n2, futaki_limit

    table, info = _load_table(args)
    vprime = _floats(args.vprime)
    V = _floats(args.v) if args.v else [0.0] * table.rank
    if len(vprime) != table.rank or len(V) != table.rank:
        raise ConfigInvalid(f"vectors must have {table.rank} entries")
    resolved = dict(info, vprime=vprime, V=V, tol=args.tol)
    ex = futaki_limit(table, V, vprime, tol=args.tol)
    # linearity: Fut_V(V') against the combination of basis values
    basis = [futaki_limit(table, V, e, tol=args.tol).value for e in np.eye(table.rank)]
    linear = float(np.dot(basis, vprime))
    result = {"fut": ex.value, "V": V, "vprime": vprime,
              "extrapolation": _extrapolation_dict(ex),
              "basis_values": basis, "linearity_defect": abs(ex.value - linear)}
    if info.get("ehrhart"):
        result["ehrhart_coefficients"] = info["ehrhart"]
        result["ehrhart_exact"] = info["ehrhart_exact"]
    if not any(V):
        d = df_and_n2(table, vprime, tol=args.tol)
        result["df_n2"] = {"fut": d["fut"], "n2": d["n2"], "n2_squared": d["n2_squared"],
                           "ratio": d["ratio"], "n2_definition": d["n2_definition"],
                           "n2_extrapolation": _extrapolation_dict(d["n2_extrapolation"])}
    return resolved, result


def cmd_soliton(args):
    from .futaki import gradient_hessian, soliton_vector

    table, info = _load_table(args)
    resolved = dict(info, tol=args.tol, max_iter=args.max_iter)
    res = soliton_vector(table, tol=args.tol, max_iter=args.max_iter)
    _, H = gradient_hessian(table, res.vector)
    result = {"vector": res.vector.tolist(), "residual": res.residual,
              "iterations": res.iterations, "history": res.history,
              "hessian_eigenvalues": np.linalg.eigvalsh(H).tolist()}
    return resolved, result


def cmd_p1_flow(args):
    from .flows import perturbed_round, pipeline_p1

    resolved = {"perturb": args.perturb, "T": args.T, "r": args.r, "K": args.K, "dt": args.dt,
                "grid": args.grid, "csv": args.csv}
    if args.T <= 0 or args.r < 1 or args.K < 2 or args.dt <= 0:
        raise ConfigInvalid("need T > 0, r >= 1, K >= 2 and dt > 0")
    initial = perturbed_round(args.perturb, args.grid)
    degrees = tuple(range(2, args.K + 1))
    with ordered_map() as mapper:
        out = pipeline_p1(initial, args.T, r=args.r, K=args.K, dt=args.dt,
                          h2_degrees=degrees, mapper=mapper)
    an = out.analyzer
    dim = 2 * args.r + 1
    asym = an.report(np.eye(dim))
    result = {
        "case_II": bool(an.gauge_.case_II),
        "analysis": asym,
        "all_weights_zero": all(w["snapped"] == 0 for w in asym["weights"]),
        "h2": {str(k): {"sup": v["sup"], "bounded": v["bounded"],
                        "last_quarter_increase": v["last_quarter_increase"]}
               for k, v in out.h2.items()},
        "final_calabi_energy": out.series[-1]["calabi_energy"],
        "series": out.series,
    }
    if args.csv:
        _write_csv(out.series, degrees, args.csv)
    return resolved, result


def _write_csv(series, degrees, path):
    cols = ["t", "calabi_energy", "sup_dev_S", "lambda_norm_estimate"] + [f"C_{k}" for k in degrees]
    header = ["t", "calabi_energy", "sup|S-S_mean|", "lambda_norm_estimate"] + cols[4:]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in series:
                w.writerow([format(float(row[c]), ".17g") for c in cols])
    except OSError as exc:
        raise InputParseError(f"cannot write {path}: {exc.strerror}", path=path) from exc


COMMANDS = {
    "gen-path": cmd_gen_path,
    "analyze-path": cmd_analyze_path,
    "ring-degenerate": cmd_ring_degenerate,
    "futaki": cmd_futaki,
    "soliton": cmd_soliton,
    "p1-flow": cmd_p1_flow,
}


def build_parser():
    p = argparse.ArgumentParser(prog="degenflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"degenflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--report", help="report JSON path (default: stdout)")
        return sp

    g = add("gen-path", "write a synthetic gauged self-similar path")
    g.add_argument("--config", help="synthetic config JSON (file or bundled:NAME)")
    g.add_argument("--dim", type=int)
    g.add_argument("--spectrum", help="generator levels, e.g. 2,1,0")
    g.add_argument("--mults", help="multiplicities, e.g. 1,2,3")
    g.add_argument("--steps", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--decay", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--twist", type=float)
    g.add_argument("--random-frame", action="store_true")
    g.add_argument("--seed", type=int)
    g.add_argument("--out")

    a = add("analyze-path", "estimate generator, filtration and weights of a path")
    a.add_argument("--input", required=True, help="path JSON (file or bundled:NAME)")
    a.add_argument("--rep", default="std")
    a.add_argument("--tail-fraction", type=float, default=0.25)
    a.add_argument("--star-tol", type=float, default=1e-3)
    a.add_argument("--snap-tol", type=float, default=None)
    a.add_argument("--filt-tol", type=float, default=1e-4)
    a.add_argument("--lambda-zero-tol", type=float, default=1e-3)
    a.add_argument("--split-method", choices=["orthogonal", "pullback"], default="orthogonal")
    a.add_argument("--seed", type=int, default=0, help="seed of the generic probe vector")

    r = add("ring-degenerate", "weight filtration and initial ideal of a graded ring")
    r.add_argument("--ring", required=True)
    r.add_argument("--weights", required=True)
    r.add_argument("--perturb", action="store_true",
                   help="replace irrational weights by a nearby rational vector first")
    r.add_argument("--n-samples", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)

    for name, help_ in (("futaki", "Futaki invariant of a toric weight table"),
                        ("soliton", "soliton vector of a toric weight table")):
        f = add(name, help_)
        f.add_argument("--polytope")
        f.add_argument("--table")
        f.add_argument("--kmax", type=int)
        if name == "futaki":
            f.add_argument("--vprime", required=True)
            f.add_argument("--v", help="twisting vector (default 0)")
            f.add_argument("--tol", type=float, default=1e-3)
        else:
            f.add_argument("--tol", type=float, default=1e-8)
            f.add_argument("--max-iter", type=int, default=100)

    k = add("p1-flow", "Kahler-Ricci flow on P^1 fed through the Gram pipeline")
    k.add_argument("--perturb", type=float, default=0.1)
    k.add_argument("--T", type=float, default=50.0)
    k.add_argument("--r", type=int, default=2)
    k.add_argument("--K", type=int, default=3)
    k.add_argument("--dt", type=float, default=1e-3)
    k.add_argument("--grid", type=int, default=256)
    k.add_argument("--csv")
    return p


def _error_record(exc):
    details = {}
    for key, val in getattr(exc, "details", {}).items():
        details[key] = val if isinstance(val, (str, int, float, bool, list, dict, type(None))) \
            else repr(val)
    return {"name": type(exc).__name__, "module": getattr(exc, "module", "degenflow"),
            "message": str(exc), "details": details}


def run(argv=None):
    """Parse ``argv``, dispatch and return ``(exit_status, report)``."""
    args = build_parser().parse_args(argv)
    report = {"degenflow_version": __version__, "command": args.command,
              "config": {k: v for k, v in vars(args).items() if k != "command"},
              "status": "ok", "error": None, "result": None}
    status = 0
    try:
        threads()
        resolved, result = COMMANDS[args.command](args)
        report["config"].update(resolved)
        report["result"] = result
    except DegenflowError as exc:
        report["status"] = "error"
        report["error"] = _error_record(exc)
        status = 2 if isinstance(exc, InputError) else 1
    text = dumps(report)
    validate_report(loads(text))
    if args.report:
        try:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            sys.stderr.write(f"degenflow: cannot write {args.report}: {exc.strerror}\n")
            return 2, report
    else:
        sys.stdout.write(text)
    if status:
        sys.stderr.write(f"degenflow: {report['error']['name']}: {report['error']['message']}\n")
    return status, report


def main(argv=None):
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
