"""JSON readers and writers for path, ring, polytope and weight-table files.

All readers reject NaN and infinities. The writer emits every float with 17
significant digits so that emitted path files re-ingest bit-for-bit, and
normalizes ``-0.0`` to ``0`` so reports do not depend on the sign of zero.
"""

import json
import math
import os
from fractions import Fraction
from importlib import resources

import numpy as np

from .errors import ConfigInvalid, InputParseError
from .futaki import PolytopeData, TorusWeightTable
from .linalg import HermitianForm, OperatorPath
from .ringfilt import GradedRing

__all__ = [
    "dumps", "write_json", "read_json", "bundled_names", "resolve_input",
    "path_to_json", "path_from_json", "ring_from_json", "ring_to_json",
    "polytope_from_json", "polytope_to_json", "table_from_json", "table_to_json",
]

BUNDLED_PREFIX = "bundled:"


# --- writing ---------------------------------------------------------------

def _number(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0"
    return format(x, ".17g")


def _encode(obj, indent, level):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        # keep short numeric rows on one line
        if all(isinstance(v, (int, float, np.number, Fraction, str, complex)) or v is None
               for v in obj) or all(isinstance(v, (list, tuple, complex)) and len(p) < 60
                                    for v, p in zip(obj, parts)):
            return "[" + ", ".join(parts) + "]"
        return "[" + pad + ("," + pad).join(parts) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """Deterministic JSON text with 17-significant-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path):
    """Write ``obj`` to ``path`` with :func:`dumps`."""
    text = dumps(obj)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputParseError(f"cannot write {path}: {exc.strerror}", path=str(path)) from exc


# --- reading ---------------------------------------------------------------

def _reject_constant(name):
    raise InputParseError(f"non-finite number {name!r} in input")


def _check_finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise InputParseError("non-finite number in input")
    if isinstance(obj, dict):
        for v in obj.values():
            _check_finite(v)
    elif isinstance(obj, list):
        for v in obj:
            _check_finite(v)


def loads(text, source="<string>"):
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputParseError(f"{source}: invalid JSON ({exc.msg} at line {exc.lineno})",
                              path=source) from exc
    # overflowing literals such as 1e999 parse to inf
    _check_finite(obj)
    return obj


def bundled_names():
    """Names accepted after the ``bundled:`` prefix."""
    data = resources.files("degenflow") / "data"
    return sorted(p.name[:-5] for p in data.iterdir() if p.name.endswith(".json"))


def resolve_input(ref):
    """Return ``(text, source)`` for a file path or a ``bundled:NAME`` reference."""
    ref = str(ref)
    if ref.startswith(BUNDLED_PREFIX):
        name = ref[len(BUNDLED_PREFIX):]
        res = resources.files("degenflow") / "data" / f"{name}.json"
        if not res.is_file():
            raise InputParseError(f"unknown bundled example {name!r}; "
                                  f"available: {', '.join(bundled_names())}", path=ref)
        return res.read_text(encoding="utf-8"), ref
    if not os.path.isfile(ref):
        raise InputParseError(f"input file not found: {ref}", path=ref)
    try:
        with open(ref, encoding="utf-8") as fh:
            return fh.read(), ref
    except (OSError, UnicodeDecodeError) as exc:
        raise InputParseError(f"cannot read {ref}: {exc}", path=ref) from exc


def read_json(ref):
    """Parse a JSON file (or bundled example), rejecting NaN and infinities."""
    text, source = resolve_input(ref)
    return loads(text, source)


def _require(obj, keys, what):
    if not isinstance(obj, dict):
        raise InputParseError(f"{what} must be a JSON object")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise InputParseError(f"{what} is missing field(s): {', '.join(missing)}")


def _complex_matrix(m, dim, what):
    try:
        a = np.asarray(m, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputParseError(f"{what}: entries must be [re, im] pairs") from exc
    if a.shape == (dim * dim, 2):
        a = a.reshape(dim, dim, 2)
    if a.shape != (dim, dim, 2):
        raise InputParseError(f"{what}: expected {dim}x{dim} [re, im] entries, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _pairs(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


# --- matrix paths ----------------------------------------------------------

def path_from_json(obj):
    """Build an :class:`OperatorPath` from a path-file object.

    ``kind`` is ``"operators"`` (default; ``A_0, ..., A_N``) or
    ``"transitions"`` (``B_1, ..., B_N``). Matrices are row-major, either as
    nested rows or as a flat list of ``[re, im]`` pairs.
    """
    _require(obj, ("dim", "times", "matrices"), "path file")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise InputParseError("path file: dim must be a positive integer")
    kind = obj.get("kind", "operators")
    if kind not in ("operators", "transitions"):
        raise InputParseError(f"path file: unknown kind {kind!r}")
    mats = [_complex_matrix(m, dim, f"matrix {i}") for i, m in enumerate(obj["matrices"])]
    if not mats:
        raise InputParseError("path file: no matrices")
    ref = None
    if obj.get("reference_gram") is not None:
        ref = HermitianForm(_complex_matrix(obj["reference_gram"], dim, "reference_gram"))
    times = np.asarray(obj["times"], dtype=float)
    try:
        if kind == "transitions":
            return OperatorPath.from_transitions(times, mats, reference_form=ref)
        return OperatorPath(times=times, operators=mats, reference_form=ref)
    except Exception as exc:
        if isinstance(exc, InputParseError):
            raise
        raise InputParseError(f"path file: {exc}") from exc


def path_to_json(path, kind="transitions"):
    """Serialize an :class:`OperatorPath`; transitions avoid overflow."""
    if kind == "transitions":
        mats = path.steps()
    elif kind == "operators":
        mats = path.cumulative()
    else:
        raise ConfigInvalid(f"unknown path kind {kind!r}")
    out = {
        "dim": int(path.dim),
        "kind": kind,
        "times": [float(t) for t in path.times],
        "matrices": [_pairs(M) for M in mats],
    }
    G = path.reference_form.gram
    if not np.array_equal(G, np.eye(path.dim)):
        out["reference_gram"] = _pairs(G)
    return out


# --- rings -----------------------------------------------------------------

def ring_from_json(obj):
    _require(obj, ("vars", "generators"), "ring file")
    gens = []
    for i, g in enumerate(obj["generators"]):
        _require(g, ("monomials", "coeffs"), f"generator {i}")
        if len(g["monomials"]) != len(g["coeffs"]):
            raise InputParseError(f"generator {i}: monomials and coeffs differ in length")
        poly = {}
        for a, c in zip(g["monomials"], g["coeffs"]):
            if isinstance(c, (int, float)):
                c = [c, 0]
            if len(c) != 2:
                raise InputParseError(f"generator {i}: coefficients must be [re, im]")
            key = tuple(int(e) for e in a)
            poly[key] = poly.get(key, 0) + complex(c[0], c[1])
        gens.append(poly)
    hilbert = obj.get("hilbert")
    return GradedRing(int(obj["vars"]), tuple(gens), K=int(obj.get("K", 6)),
                      hilbert=tuple(hilbert) if hilbert is not None else None)


def ring_to_json(ring):
    return {
        "vars": ring.num_vars,
        "generators": [{"monomials": [list(a) for a in g],
                        "coeffs": [[c.real, c.imag] for c in g.values()]}
                       for g in ring.generators],
        "K": ring.K,
        "hilbert": list(ring.hilbert) if ring.hilbert is not None else None,
    }


# --- polytopes and weight tables ------------------------------------------

def polytope_from_json(obj):
    _require(obj, ("vertices",), "polytope file")
    try:
        verts = [[Fraction(str(x)) for x in v] for v in obj["vertices"]]
    except (ValueError, ZeroDivisionError) as exc:
        raise InputParseError(f"polytope file: bad rational ({exc})") from exc
    P = PolytopeData(tuple(map(tuple, verts)), kmax=int(obj.get("kmax", 30)))
    if "dim" in obj and obj["dim"] != P.dim:
        raise InputParseError(f"polytope file: dim {obj['dim']} does not match vertices")
    return P


def polytope_to_json(P):
    return {"dim": P.dim, "vertices": [[str(x) for x in v] for v in P.vertices], "kmax": P.kmax}


def table_from_json(obj):
    _require(obj, ("n", "rank", "degrees"), "weight-table file")
    degs = {}
    for d in obj["degrees"]:
        _require(d, ("k", "weights"), "weight-table degree")
        degs[int(d["k"])] = np.asarray(d["weights"], dtype=float).reshape(-1, int(obj["rank"]))
    return TorusWeightTable(int(obj["n"]), int(obj["rank"]), degs)


def table_to_json(table):
    return {"n": table.n, "rank": table.rank,
            "degrees": [{"k": k, "weights": np.asarray(w).tolist()}
                        for k, w in table.degrees.items()]}
