"""Command line front end: scene file in, CSV/JSON report out.

Exit codes: 0 success, 1 numerical failure, 2 invalid scene or arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, energy, oracle
from .asymptotics import PROPOSITIONS
from .energy import DensityTable, EnergyBreakdown, IncompatibleInterfaceError
from .geometry import GeometryError
from .lattice import BOUNDARY_RULES, lattice_remainder
from .material import Affine, NonInvertibleDeformationError, PiecewiseAffine
from .scene import Scene, SceneError, load_scene_file, scene_from_dict

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scene", required=True, help="scene JSON file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int)
    common.add_argument("--quad-order", type=int)
    common.add_argument("--boundary", choices=BOUNDARY_RULES)
    common.add_argument("--theta", type=float, help="offset of the eps = 1/(k+theta) schedule")

    p = _Parser(prog="cellavg", description="Lattice energies, cell averages and their expansions.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("density", parents=[common], help="W, gamma, gamma_diamond, sigma, tau table")
    ex = sub.add_parser("expand", parents=[common], help="energies along an eps schedule vs prediction")
    ex.add_argument("--proposition", required=True, help="one of " + ", ".join(PROPOSITIONS))
    mi = sub.add_parser("miller", parents=[common], help="gaps along a Miller-index sequence")
    mi.add_argument("--j-max", type=int, default=40)
    sub.add_parser("remainder", parents=[common], help="lattice-point remainders along the schedule")
    orc = sub.add_parser("oracle", parents=[common], help="closed forms vs translation averages")
    orc.add_argument("--grid-n", type=int, default=32)
    return p


def _apply_overrides(scene: Scene, args) -> Scene:
    raw = scene.to_dict()
    if args.threads is not None:
        raw["threads"] = args.threads
    if args.quad_order is not None:
        raw["quadrature"] = {"order": args.quad_order}
    if args.boundary is not None:
        raw["boundary_rule"] = args.boundary
    if args.format is not None:
        raw["format"] = args.format
    if args.theta is not None:
        sched = dict(raw.get("schedule", {}))
        sched.update(kind="offset", theta=args.theta)
        raw["schedule"] = sched
    return scene_from_dict(raw)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


# -- commands ------------------------------------------------------------------------

def cmd_density(scene: Scene):
    Phi, L = scene.potential, scene.lattice
    reqs = scene.densities or _default_densities(scene)
    table = DensityTable()
    for r in reqs:
        label = r["label"]
        F = np.asarray(r["F"], float) if "F" in r else scene.base_F
        if label == "W":
            table.add("W", F, None, energy.cauchy_born_W(Phi, F, L))
        elif label == "gamma":
            n = _request_normal(scene, r)
            table.add("gamma", F, n, energy.gamma(Phi, F, n, L))
        elif label == "gamma_diamond":
            m = r.get("miller") or scene.interface["miller"]
            table.add("gamma_diamond", F, tuple(m), energy.gamma_diamond(Phi, F, m, L))
        elif label == "sigma":
            n = scene.plane.unit_normal
            Fp = F + np.outer(scene.jump, n)
            s, sh = energy.sigma(Phi, Fp, F, n, L, **_order(scene))
            table.add("sigma", (Fp, F), n, s)
            table.add("sigma_hat", (Fp, F), n, sh)
        elif label == "tau":
            if "miller" not in scene.interface:
                raise SceneError("'tau' density needs a Miller interface normal")
            m = scene.interface["miller"]
            Fp = F + np.outer(scene.jump, scene.plane.unit_normal)
            t, th = energy.tau(Phi, Fp, F, m, L)
            table.add("tau", (Fp, F), tuple(m), t)
            table.add("tau_hat", (Fp, F), tuple(m), th)
    summary = {r.label: r.value for r in table.rows}
    if scene.format == "json":
        return json.dumps({"rows": table.to_json()}, indent=1), summary
    return table.to_csv(), summary


def _order(scene):
    return {"order": scene.quad_order} if scene.quad_order else {}


def _default_densities(scene):
    reqs = [{"label": "W"}]
    if scene.interface is not None:
        reqs.append({"label": "gamma"})
        if "miller" in scene.interface:
            reqs.append({"label": "gamma_diamond"})
        reqs.append({"label": "sigma"})
        if "miller" in scene.interface:
            reqs.append({"label": "tau"})
    return reqs


def _request_normal(scene, r):
    if "normal" in r:
        n = np.asarray(r["normal"], float)
    elif "miller" in r:
        n = scene.lattice.reciprocal(r["miller"])
    else:
        n = scene.plane.unit_normal
    return n / np.linalg.norm(n)


def cmd_expand(scene: Scene, proposition: str):
    if proposition not in PROPOSITIONS:
        raise SceneError(f"invalid proposition {proposition!r}; expected one of {PROPOSITIONS}")
    try:
        rep = asymptotics.verify_proposition(
            proposition, scene.domain, scene.potential, scene.deformation, scene.lattice,
            scene.epsilon_list(), scene.boundary_rule, scene.threads, scene.quad_order)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, (NonInvertibleDeformationError, GeometryError)):
            raise
        raise SceneError(str(exc)) from None
    summary = rep.summary()
    summary["residual_decreasing_k10"] = rep.residual_decreasing(10)
    header = ("k", "eps", "energy", "prediction", "scaled_residual")
    if scene.format == "json":
        return json.dumps({"rows": [dict(zip(header, r)) for r in rep.rows()], "summary": summary},
                          indent=1), summary
    return _csv(header, rep.rows()), summary


def cmd_miller(scene: Scene, j_max: int):
    if j_max < 1:
        raise SceneError("--j-max must be >= 1")
    if scene.interface is not None:
        target = scene.interface.get("miller") or scene.interface["normal"]
        a = scene.jump
    else:
        target, a = (0, 0, 1), None
    study = asymptotics.miller_limit_study(scene.potential, scene.base_F, target, j_max, a, scene.lattice)
    header = ("j", "miller", "norm", "gamma_gap", "tau_gap", "gamma_bound")
    rows = [(r.j, " ".join(map(str, r.miller)), r.norm, r.gamma_gap, r.tau_gap, study.bound(r))
            for r in study.rows]
    summary = {"W": study.W, "gamma_target": study.gamma_target, "sigma_target": study.sigma_target,
               "c_gamma": study.c_gamma, "gamma_slope": study.gamma_slope}
    if scene.format == "json":
        return json.dumps({"rows": [dict(zip(header, r)) for r in rows], "summary": summary},
                          indent=1), summary
    return _csv(header, rows), summary


def cmd_remainder(scene: Scene):
    sched = scene.epsilon_list()
    modified = None
    if scene.domain.miller_normals or scene.domain.is_lattice_polyhedron(scene.lattice):
        if all(float(k).is_integer() and abs(1 / k - e) < 1e-15 for k, e in sched):
            modified = {r.k: r for r in asymptotics.modified_domain_check(
                scene.domain, [k for k, _ in sched], scene.lattice)}
    header = ("k", "eps", "remainder", "scaled_remainder", "modified_remainder", "count_difference")
    rows = []
    for k, eps in sched:
        rem = lattice_remainder(scene.domain, scene.lattice, eps, scene.boundary_rule)
        m = modified.get(k) if modified else None
        rows.append((k, eps, rem, rem / eps, m.remainder if m else "", m.count_difference if m else ""))
    summary = {"max_abs_remainder": max(abs(r[2]) for r in rows),
               "modified_domains": modified is not None}
    if scene.format == "json":
        return json.dumps({"rows": [dict(zip(header, r)) for r in rows], "summary": summary},
                          indent=1), summary
    return _csv(header, rows), summary


def cmd_oracle(scene: Scene, grid_n: int):
    if grid_n < 2:
        raise SceneError("--grid-n must be >= 2")
    if not isinstance(scene.deformation, (Affine, PiecewiseAffine)):
        raise SceneError("oracle comparison needs an affine or piecewise-affine deformation")
    eps = scene.epsilon if scene.epsilon is not None else 0.5
    d, Phi, L, dom = scene.deformation, scene.potential, scene.lattice, scene.domain
    closed = energy.cell_avg_energy(dom, L, eps, d, Phi, scene.quad_order, scene.threads)
    brute = oracle.translate_average_energy(dom, L, eps, d, Phi, grid_n)
    count = oracle.translate_average_count(dom, L, eps, grid_n)
    kind = "cell_avg_interface" if isinstance(d, PiecewiseAffine) else "cell_avg_affine"
    try:
        pred = energy.predict_expansion(kind, dom, Phi, d, L, eps)
    except GeometryError:
        pred = EnergyBreakdown(float("nan"), float("nan"), float("nan"), 0.0, eps)
    rows = []
    for label, value in (("cell_avg", closed), ("translate_average", brute)):
        b = EnergyBreakdown(value, pred.bulk_prediction, pred.surface_prediction,
                            pred.interface_prediction, eps)
        rows.append(b.csv_row(label))
    vol = EnergyBreakdown(count, dom.volume, 0.0, 0.0, eps)
    rows.append(vol.csv_row("count"))
    summary = {"eps": eps, "grid_n": grid_n, "cell_avg": closed, "translate_average": brute,
               "relative_gap": abs(brute - closed) / abs(closed) if closed else abs(brute),
               "count": count, "volume": dom.volume}
    if scene.format == "json":
        return json.dumps({"rows": [dict(zip(EnergyBreakdown.CSV_COLUMNS, r)) for r in rows],
                           "summary": summary}, indent=1), summary
    return _csv(EnergyBreakdown.CSV_COLUMNS, rows), summary


# -- driver --------------------------------------------------------------------------

def _sidecar(out: Path) -> Path:
    return out.with_name(out.stem + ".meta.json")


def _write(args, scene: Scene, text: str, summary: dict):
    if args.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out = Path(args.out)
    out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    meta = {"command": args.command, "scene": scene.to_dict(), "summary": summary}
    _sidecar(out).write_text(json.dumps(meta, indent=1, sort_keys=True, default=_jsonable) + "\n",
                             encoding="utf-8")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ArgumentError as exc:
        print(f"cellavg: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        scene = _apply_overrides(load_scene_file(args.scene), args)
        if args.command == "density":
            text, summary = cmd_density(scene)
        elif args.command == "expand":
            text, summary = cmd_expand(scene, args.proposition)
        elif args.command == "miller":
            text, summary = cmd_miller(scene, args.j_max)
        elif args.command == "remainder":
            text, summary = cmd_remainder(scene)
        else:
            text, summary = cmd_oracle(scene, args.grid_n)
    except SceneError as exc:
        print(f"{args.scene}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cellavg: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IncompatibleInterfaceError as exc:
        print(f"{args.scene}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonInvertibleDeformationError, GeometryError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"cellavg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(args, scene, text, summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
