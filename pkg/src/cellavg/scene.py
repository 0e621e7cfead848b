"""JSON scene files: strict parsing with line-numbered errors, and round-tripping."""

from __future__ import annotations

import json
import json.decoder
import json.scanner
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import DEFAULT_THETA, OFFSET, RECIPROCAL, epsilon_schedule
from .geometry import ConvexPolytope, GeometryError, InterfacePlane, box, from_halfspaces, hull
from .lattice import BOUNDARY_RULES, CLOSED, BravaisLattice, integer_lattice, miller_reduce
from .material import (
    Affine,
    NonInvertibleDeformationError,
    PairPotential,
    PiecewiseAffine,
    builtin_potential,
)

SCENE_VERSION = 1
DENSITY_LABELS = ("W", "gamma", "gamma_diamond", "sigma", "tau")
NAMED_DOMAINS = {
    "unit_cube": lambda: box([0, 0, 0], [1, 1, 1]),
    "cube": lambda: box([-1, -1, -1], [1, 1, 1]),
    "lattice_tetrahedron": lambda: hull([[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2]]),
}


class SceneError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        return f"line {self.line}: {msg}" if self.line is not None else msg


# -- position-tracking JSON loader ------------------------------------------------------

class _Obj(dict):
    """dict that remembers the source line of itself and of each key."""

    line: int = 1
    key_lines: dict


def _key_lines(s: str, start: int, end: int, base_line: int) -> dict:
    """Lines of the keys at nesting depth 1 of the object spanning ``s[start:end]``."""
    out = {}
    depth, i, line = 0, start, base_line
    expect_key = False
    while i < end:
        c = s[i]
        if c == "\n":
            line += 1
        elif c in "{[":
            depth += 1
            expect_key = depth == 1 and c == "{"
        elif c in "}]":
            depth -= 1
        elif c == "," and depth == 1:
            expect_key = True
        elif c == '"':
            j = i + 1
            while s[j] != '"':
                j += 2 if s[j] == "\\" else 1
            if depth == 1 and expect_key:
                out[json.loads(s[i:j + 1])] = line
                expect_key = False
            line += s.count("\n", i, j)
            i = j
        i += 1
    return out


def _loads_with_lines(text: str):
    decoder = json.JSONDecoder()
    plain = json.decoder.JSONObject

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        s, begin = s_and_end
        pairs, end = plain(s_and_end, strict, scan_once, None, list, memo)
        obj = _Obj(pairs)
        if len(obj) != len(pairs):
            dup = next(k for k in obj if sum(1 for p in pairs if p[0] == k) > 1)
            raise SceneError(f"duplicate key {dup!r}", s.count("\n", 0, begin) + 1)
        obj.line = s.count("\n", 0, begin) + 1
        obj.key_lines = _key_lines(s, begin - 1, end, obj.line)
        return obj, end

    decoder.parse_object = parse_object
    decoder.scan_once = json.scanner.py_make_scanner(decoder)
    try:
        return decoder.decode(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"invalid JSON: {exc.msg}", exc.lineno) from None


# -- validation helpers --------------------------------------------------------------

def _line(obj, key=None):
    if isinstance(obj, _Obj):
        return obj.key_lines.get(key, obj.line) if key is not None else obj.line
    return None


def _section(obj, key, allowed, required=()):
    sec = obj.get(key)
    if not isinstance(sec, dict):
        raise SceneError(f"'{key}' must be an object", _line(obj, key))
    for k in sec:
        if k not in allowed:
            raise SceneError(f"unknown field '{key}.{k}'", _line(sec, k))
    for k in required:
        if k not in sec:
            raise SceneError(f"'{key}' is missing '{k}'", _line(sec))
    return sec


def _array(obj, key, shape, ctx):
    try:
        arr = np.asarray(obj[key], dtype=float)
    except (TypeError, ValueError):
        arr = None
    if arr is None or arr.shape != shape or not np.all(np.isfinite(arr)):
        raise SceneError(f"'{ctx}.{key}' must be a finite array of shape {shape}", _line(obj, key))
    return arr


def _number(obj, key, ctx, kind=float, default=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        raise SceneError(f"'{ctx}.{key}' must be {'an integer' if kind is int else 'a number'}", _line(obj, key))
    return kind(v)


# -- scene ---------------------------------------------------------------------------

@dataclass
class Scene:
    lattice: BravaisLattice
    domain: ConvexPolytope
    potential: PairPotential
    deformation: object
    interface: dict | None = None
    schedule: dict = field(default_factory=lambda: {"kind": RECIPROCAL, "k_min": 4, "k_max": 40,
                                                    "theta": DEFAULT_THETA})
    boundary_rule: str = CLOSED
    quad_order: int | None = None
    threads: int = 1
    format: str = "csv"
    densities: list = field(default_factory=list)
    epsilon: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def plane(self) -> InterfacePlane | None:
        if self.interface is None:
            return None
        if "miller" in self.interface:
            return InterfacePlane.from_miller(self.interface["miller"])
        n = np.asarray(self.interface["normal"], float)
        return InterfacePlane(n / np.linalg.norm(n))

    @property
    def jump(self) -> np.ndarray:
        return np.asarray(self.interface["a"], float) if self.interface else np.zeros(3)

    @property
    def base_F(self) -> np.ndarray:
        d = self.deformation
        if isinstance(d, Affine):
            return d.F
        if isinstance(d, PiecewiseAffine):
            return d.F_minus
        return np.eye(3)

    def epsilon_list(self):
        s = self.schedule
        return epsilon_schedule(s["kind"], s["k_min"], s["k_max"], s.get("theta", DEFAULT_THETA))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


_TOP = {"version", "lattice", "domain", "potential", "deformation", "interface", "schedule",
        "boundary_rule", "quadrature", "threads", "format", "densities", "epsilon"}


def _parse_lattice(obj):
    if "lattice" not in obj:
        return integer_lattice()
    sec = _section(obj, "lattice", {"basis"}, ("basis",))
    try:
        return BravaisLattice(_array(sec, "basis", (3, 3), "lattice"))
    except SceneError:
        raise
    except ValueError as exc:
        raise SceneError(f"lattice: {exc}", _line(sec, "basis")) from None


def _parse_domain(obj):
    sec = obj.get("domain")
    if not isinstance(sec, dict) or "type" not in sec:
        raise SceneError("'domain' must be an object with a 'type'", _line(obj, "domain"))
    kind = sec["type"]
    fields = {"box": {"lo", "hi"}, "hull": {"vertices"}, "halfspaces": {"normals", "offsets"},
              "named": {"name"}}
    if kind not in fields:
        raise SceneError(f"unknown domain type {kind!r}; expected one of {sorted(fields)}", _line(sec, "type"))
    _section(obj, "domain", fields[kind] | {"type"}, tuple(fields[kind]))
    try:
        if kind == "box":
            lo, hi = _array(sec, "lo", (3,), "domain"), _array(sec, "hi", (3,), "domain")
            return box(lo, hi)
        if kind == "hull":
            v = np.asarray(sec["vertices"], dtype=float)
            if v.ndim != 2 or v.shape[1] != 3 or len(v) < 4:
                raise SceneError("'domain.vertices' must list at least 4 points in 3-D", _line(sec, "vertices"))
            return hull(v)
        if kind == "halfspaces":
            N = np.asarray(sec["normals"], dtype=float)
            b = np.asarray(sec["offsets"], dtype=float)
            if N.ndim != 2 or N.shape[1] != 3 or b.shape != (len(N),):
                raise SceneError("'domain.normals'/'offsets' shapes disagree", _line(sec, "normals"))
            return from_halfspaces(N, b)
        name = sec["name"]
        if name not in NAMED_DOMAINS:
            raise SceneError(f"unknown named domain {name!r}; expected one of {sorted(NAMED_DOMAINS)}",
                             _line(sec, "name"))
        return NAMED_DOMAINS[name]()
    except (GeometryError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"domain: {exc}", _line(sec)) from None


def _parse_potential(obj):
    sec = _section(obj, "potential", {"name", "params"}, ("name",))
    params = sec.get("params", {})
    if not isinstance(params, dict):
        raise SceneError("'potential.params' must be an object", _line(sec, "params"))
    try:
        return builtin_potential(sec["name"], **params)
    except ValueError as exc:
        raise SceneError(f"potential: {exc}", _line(sec, "name")) from None


def _parse_interface(obj):
    if "interface" not in obj or obj["interface"] is None:
        return None
    sec = _section(obj, "interface", {"miller", "normal", "a"}, ("a",))
    if ("miller" in sec) == ("normal" in sec):
        raise SceneError("'interface' needs exactly one of 'miller' or 'normal'", _line(sec))
    out = {"a": _array(sec, "a", (3,), "interface").tolist()}
    if "miller" in sec:
        m = _array(sec, "miller", (3,), "interface")
        try:
            out["miller"] = miller_reduce(m).components
        except ValueError as exc:
            raise SceneError(f"interface.miller: {exc}", _line(sec, "miller")) from None
    else:
        n = _array(sec, "normal", (3,), "interface")
        if not np.any(n):
            raise SceneError("'interface.normal' must be nonzero", _line(sec, "normal"))
        out["normal"] = n.tolist()
    return out


def _parse_deformation(obj, interface):
    if "deformation" not in obj:
        return Affine(np.eye(3))
    sec = obj["deformation"]
    if not isinstance(sec, dict) or "type" not in sec:
        raise SceneError("'deformation' must be an object with a 'type'", _line(obj, "deformation"))
    kind = sec["type"]
    fields = {"affine": {"F"}, "piecewise": {"F_minus"}, "none": set()}
    if kind not in fields:
        raise SceneError(f"unknown deformation type {kind!r}; expected one of {sorted(fields)}",
                         _line(sec, "type"))
    _section(obj, "deformation", fields[kind] | {"type"}, tuple(fields[kind]))
    try:
        if kind == "none":
            return Affine(np.eye(3))
        if kind == "affine":
            return Affine(_array(sec, "F", (3, 3), "deformation"))
        if interface is None:
            raise SceneError("piecewise deformation requires an 'interface' section", _line(sec, "type"))
        Fm = _array(sec, "F_minus", (3, 3), "deformation")
        if "miller" in interface:
            plane = InterfacePlane.from_miller(interface["miller"])
        else:
            n = np.asarray(interface["normal"])
            plane = InterfacePlane(n / np.linalg.norm(n))
        return PiecewiseAffine(Fm, interface["a"], plane)
    except NonInvertibleDeformationError as exc:
        raise SceneError(f"deformation: {exc}", _line(sec)) from None


def _parse_schedule(obj):
    if "schedule" not in obj:
        return {"kind": RECIPROCAL, "k_min": 4, "k_max": 40, "theta": DEFAULT_THETA}
    sec = _section(obj, "schedule", {"kind", "k_min", "k_max", "theta"})
    out = {
        "kind": sec.get("kind", RECIPROCAL),
        "k_min": _number(sec, "k_min", "schedule", int, 4),
        "k_max": _number(sec, "k_max", "schedule", int, 40),
        "theta": _number(sec, "theta", "schedule", float, DEFAULT_THETA),
    }
    if out["kind"] not in (RECIPROCAL, OFFSET):
        raise SceneError(f"unknown schedule kind {out['kind']!r}", _line(sec, "kind"))
    try:
        epsilon_schedule(**out)
    except ValueError as exc:
        raise SceneError(f"schedule: {exc}", _line(sec)) from None
    return out


def _parse_densities(obj, interface):
    if "densities" not in obj:
        return []
    reqs = obj["densities"]
    if not isinstance(reqs, list):
        raise SceneError("'densities' must be a list", _line(obj, "densities"))
    out = []
    for r in reqs:
        if isinstance(r, str):
            r = {"label": r}
        if not isinstance(r, dict) or r.get("label") not in DENSITY_LABELS:
            raise SceneError(f"density request needs a label in {DENSITY_LABELS}", _line(r) or _line(obj, "densities"))
        for k in r:
            if k not in ("label", "normal", "miller", "F"):
                raise SceneError(f"unknown field 'densities.{k}'", _line(r, k))
        req = {"label": r["label"]}
        if "F" in r:
            req["F"] = _array(r, "F", (3, 3), "densities").tolist()
        if "normal" in r:
            req["normal"] = _array(r, "normal", (3,), "densities").tolist()
        if "miller" in r:
            req["miller"] = list(miller_reduce(_array(r, "miller", (3,), "densities")).components)
        if req["label"] in ("sigma", "tau") and interface is None:
            raise SceneError(f"'{req['label']}' density requires an 'interface' section", _line(r) or _line(obj, "densities"))
        if req["label"] == "gamma" and "normal" not in req and "miller" not in req and interface is None:
            raise SceneError("'gamma' density needs a 'normal' (or an interface)", _line(r))
        if req["label"] == "gamma_diamond" and "miller" not in req and not (interface and "miller" in interface):
            raise SceneError("'gamma_diamond' density needs a 'miller' vector", _line(r))
        out.append(req)
    return out


def scene_from_dict(obj: dict) -> Scene:
    if not isinstance(obj, dict):
        raise SceneError("scene must be a JSON object", 1)
    for k in obj:
        if k not in _TOP:
            raise SceneError(f"unknown field '{k}'", _line(obj, k))
    if obj.get("version") != SCENE_VERSION:
        raise SceneError(f"'version' must be {SCENE_VERSION}", _line(obj, "version"))
    lattice = _parse_lattice(obj)
    domain = _parse_domain(obj)
    potential = _parse_potential(obj)
    interface = _parse_interface(obj)
    deformation = _parse_deformation(obj, interface)
    schedule = _parse_schedule(obj)
    rule = obj.get("boundary_rule", CLOSED)
    if rule not in BOUNDARY_RULES:
        raise SceneError(f"'boundary_rule' must be one of {BOUNDARY_RULES}", _line(obj, "boundary_rule"))
    quad = None
    if "quadrature" in obj:
        sec = _section(obj, "quadrature", {"order"})
        quad = _number(sec, "order", "quadrature", int)
        if quad is not None and quad < 1:
            raise SceneError("'quadrature.order' must be positive", _line(sec, "order"))
    threads = _number(obj, "threads", "scene", int, 1)
    if threads < 1:
        raise SceneError("'threads' must be >= 1", _line(obj, "threads"))
    fmt = obj.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise SceneError("'format' must be 'csv' or 'json'", _line(obj, "format"))
    eps = _number(obj, "epsilon", "scene", float)
    if eps is not None and eps <= 0:
        raise SceneError("'epsilon' must be positive", _line(obj, "epsilon"))
    return Scene(lattice, domain, potential, deformation, interface, schedule, rule, quad, threads,
                 fmt, _parse_densities(obj, interface), eps, raw=obj)


def load_scene(text: str) -> Scene:
    return scene_from_dict(_loads_with_lines(text))


def load_scene_file(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return load_scene(fh.read())
