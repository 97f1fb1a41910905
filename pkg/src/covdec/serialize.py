"""JSON encoding of matrices, maps and generators.

Complex numbers are [re, im] pairs; bare real numbers are accepted on input.
Map files look like ``{"n": 2, "basis": "frobenius", "c": [[[re, im], ...]]}``
with an optional ``"certificate": {"cp": <map>, "cocp": <map>}``.  Generator
files are ``{"H": <matrix>, "phi_cp": <map>, "phi_cocp": <map>}`` with both
map entries optional.
"""

import json
import numbers

import numpy as np

from .errors import CovdecError, InputError
from .linmap import CANONICAL, FROBENIUS, MapMatrix, decomposable_certificate, zero_map

__all__ = [
    "encode_array",
    "decode_array",
    "map_to_json",
    "map_from_json",
    "generator_from_json",
    "generator_to_json",
    "load_json",
    "dumps",
]


def encode_array(a):
    a = np.asarray(a)
    if a.ndim == 0:
        z = complex(a)
        return [z.real, z.imag]
    return [encode_array(x) for x in a]


def _decode_leaf(x, field):
    if isinstance(x, bool):
        raise InputError(field, "booleans are not numbers")
    if isinstance(x, numbers.Real):
        return complex(float(x), 0.0)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, numbers.Real) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise InputError(field, f"expected a number or an [re, im] pair, got {x!r}")


def decode_array(obj, field, shape=None):
    """Nested lists of [re, im] pairs to a complex array of fixed ``shape``."""

    def walk(x, depth):
        if depth == 0:
            return _decode_leaf(x, field)
        if not isinstance(x, list):
            raise InputError(field, "expected a nested list")
        return [walk(v, depth - 1) for v in x]

    depth = 2 if shape is None else len(shape)
    try:
        arr = np.array(walk(obj, depth), dtype=complex)
    except ValueError as exc:
        raise InputError(field, f"ragged array ({exc})") from None
    if shape is not None and arr.shape != tuple(shape):
        raise InputError(field, f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(field, "entries must be finite")
    return arr


def map_to_json(m, with_certificate=True):
    out = {"n": m.n, "basis": m.basis, "c": encode_array(m.c)}
    if with_certificate and m.certificate is not None:
        cp, cocp = m.certificate
        out["certificate"] = {"cp": map_to_json(cp, False), "cocp": map_to_json(cocp, False)}
    return out


def map_from_json(obj, field="map"):
    if not isinstance(obj, dict):
        raise InputError(field, "expected a JSON object")
    n = obj.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise InputError(f"{field}.n", "must be an integer >= 2")
    basis = obj.get("basis", FROBENIUS)
    if basis not in (FROBENIUS, CANONICAL):
        raise InputError(f"{field}.basis", f"must be {FROBENIUS!r} or {CANONICAL!r}")
    if "c" not in obj:
        raise InputError(f"{field}.c", "missing")
    c = decode_array(obj["c"], f"{field}.c", (n * n, n * n))
    m = MapMatrix(n, c, basis)
    cert = obj.get("certificate")
    if cert is None:
        return m
    if not isinstance(cert, dict) or set(cert) != {"cp", "cocp"}:
        raise InputError(f"{field}.certificate", "must hold exactly the keys 'cp' and 'cocp'")
    cp = map_from_json(cert["cp"], f"{field}.certificate.cp")
    cocp = map_from_json(cert["cocp"], f"{field}.certificate.cocp")
    try:
        certified = decomposable_certificate(cp, cocp)
    except CovdecError as exc:
        raise InputError(f"{field}.certificate", str(exc)) from None
    if certified.distance(m) > 1e-9 * max(1.0, np.linalg.norm(c)):
        raise InputError(f"{field}.certificate", "parts do not sum to the map")
    return MapMatrix(n, m.c, basis, certified.to_basis(basis).certificate)


def generator_to_json(H, phi):
    cp, cocp = phi.certificate
    return {"H": encode_array(H), "phi_cp": map_to_json(cp, False), "phi_cocp": map_to_json(cocp, False)}


def generator_from_json(obj, field="generator"):
    """Return (H, certified phi) from a generator object."""
    if not isinstance(obj, dict):
        raise InputError(field, "expected a JSON object")
    if "H" not in obj:
        raise InputError(f"{field}.H", "missing")
    H = decode_array(obj["H"], f"{field}.H")
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 2:
        raise InputError(f"{field}.H", f"must be a square matrix of size >= 2, got shape {H.shape}")
    n = H.shape[0]
    parts = []
    for key in ("phi_cp", "phi_cocp"):
        if obj.get(key) is None:
            parts.append(zero_map(n))
            continue
        p = map_from_json(obj[key], f"{field}.{key}")
        if p.n != n:
            raise InputError(f"{field}.{key}", f"acts on n={p.n}, H has n={n}")
        parts.append(p.to_basis(FROBENIUS))
    try:
        phi = decomposable_certificate(*parts)
    except CovdecError as exc:
        raise InputError(f"{field}.phi", str(exc)) from None
    return H, phi


def load_json(path, field):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(field, f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(field, f"malformed JSON in {path}: {exc.msg} at line {exc.lineno}") from None


def _default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return encode_array(o) if np.iscomplexobj(o) else o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj, indent=2):
    """Deterministic JSON: sorted keys, fixed separators."""
    return json.dumps(obj, sort_keys=True, indent=indent, default=_default)
