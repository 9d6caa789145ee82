"""Command-line driver: resolve, build and verify ideals, scan metrics."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import metric
from .blowup import ResolutionTree, resolve
from .errors import IrrationalCenter, SaperForgeError
from .poly import MultiPoly
from .singlestep import SingleStepIdeal, build_single_step, example_v6_ladder, remark_v9_witness, verify_single_step

HERMITIAN_TOL = 1e-12
CHERN_TOL = 1e-9
RESIDUAL_TOL = 1e-6
RESIDUAL_WINDOW = (1e-8, 0.9)


def fmt(v: float) -> str:
    return f"{v:.17g}"


def _read_curve(arg: str) -> str:
    if os.path.isfile(arg):
        with open(arg) as fh:
            return fh.read().strip()
    return arg


def _parse_point(text: str) -> tuple[Fraction, ...]:
    return tuple(Fraction(p.strip()) for p in text.split(","))


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(p) for p in text.split(",")]


def dumps(o, indent: int = 0) -> str:
    """JSON text with sorted keys and every float at 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(o, float) and math.isfinite(o):
        return fmt(o)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in sorted(o.items())]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(o, (list, tuple)):
        if not o:
            return "[]"
        return "[\n" + ",\n".join(f"{inner}{dumps(v, indent + 1)}" for v in o) + f"\n{pad}]"
    return json.dumps(o)


def _write_json(path: str | None, payload: dict) -> None:
    text = dumps(payload) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _load_tree(path: str) -> ResolutionTree:
    data = _load(path)
    return ResolutionTree.from_json(data.get("tree", data))


def _load_ideal(path: str) -> SingleStepIdeal:
    data = _load(path)
    return SingleStepIdeal.from_json(data.get("ideal", data))


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _fail(gate: str, detail: str) -> int:
    print(f"FAIL {gate}: {detail}", file=sys.stderr)
    return 1


def cmd_resolve(args) -> int:
    text = _read_curve(args.curve)
    curve = MultiPoly.parse(text)
    hints = [_parse_point(h) for h in args.hint or []]
    try:
        tree = resolve(curve, hints=hints)
    except IrrationalCenter as exc:
        poly = exc.poly.to_text() if exc.poly is not None else "?"
        print(f"IrrationalCenter: {exc} [polynomial: {poly}]", file=sys.stderr)
        return 2
    _write_json(args.out, {"config": _config(args), "tree": tree.to_json()})
    print(tree.summary())
    return 0


def _report(ssi: SingleStepIdeal, tree: ResolutionTree) -> tuple[int, list[str]]:
    report = verify_single_step(ssi, tree)
    lines = report.lines()
    for line in lines:
        print(line)
    if not report.ok:
        clause = report.first_failure()
        return _fail(f"VerificationFailed clause ({clause})", report.clauses[clause][1]), lines
    return 0, lines


def cmd_single_ideal(args) -> int:
    tree = _load_tree(args.tree)
    ssi = build_single_step(tree, variant=args.variant)
    print(f"factors: {ssi.factored_text()}")
    print(f"product: {ssi.product.to_text(ssi.names)}")
    code, lines = _report(ssi, tree)
    _write_json(args.out, {"config": _config(args), "ideal": ssi.to_json(), "verification": lines})
    return code


def cmd_verify(args) -> int:
    tree = _load_tree(args.tree)
    ssi = _load_ideal(args.ideal)
    code, _ = _report(ssi, tree)
    return code


def _params(args, gens) -> metric.MetricParams:
    scale = Fraction(args.scale) if args.scale else metric.default_scale(gens)
    return metric.MetricParams(args.l, args.base_form, scale)


def cmd_metric_scan(args) -> int:
    ssi = _load_ideal(args.ideal)
    gens = ssi.product.to_polys()
    params = _params(args, gens)
    points = metric.sample_points(args.grid, args.seed, nvars=2)

    def row(z):
        chern = metric.chern_form_local(gens, z)
        tilde = metric.omega_tilde(gens, params, z)
        dec = metric.saper_decomposition(gens, params, z)
        return z, chern, tilde, dec

    rows = metric.map_points(row, list(points))
    buf = io.StringIO()
    cfg = _config(args) | {"params": params.to_json()}
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    buf.write(f"# ideal: {ssi.product.to_text(ssi.names)}\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(
        ["re_x", "im_x", "re_y", "im_y", "F", "chern_min", "chern_max", "tilde_min", "tilde_max",
         "saper_min", "saper_max", "residual"]
    )
    failures = []
    for z, chern, tilde, dec in rows:
        saper = dec.form
        out.writerow(
            [fmt(c) for w in z for c in (w.real, w.imag)]
            + [fmt(dec.F)]
            + [fmt(v) for s in (chern, tilde, saper) for v in (s.min_eig, s.max_eig)]
            + [fmt(dec.residual)]
        )
        for name, s in (("chern", chern), ("tilde", tilde), ("saper", saper)):
            if s.hermitian_defect() > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(s.matrix)))):
                failures.append(("hermitian", f"{name} at {z}"))
        if chern.max_eig > CHERN_TOL * max(1.0, abs(chern.min_eig)):
            failures.append(("chern-nsd", f"max eigenvalue {chern.max_eig} at {z}"))
        if RESIDUAL_WINDOW[0] < dec.F < RESIDUAL_WINDOW[1] and dec.residual > RESIDUAL_TOL:
            failures.append(("decomposition", f"residual {dec.residual} at {z}"))
        if saper.min_eig <= metric.PD_TOL:
            failures.append(("saper-pd", f"min eigenvalue {saper.min_eig} at {z} for l={params.l}"))
    text = buf.getvalue()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"{len(rows)} points, scale {params.scale}, l {params.l}", file=sys.stderr)
    if failures:
        return _fail(*failures[0])
    return 0


def cmd_saper_length(args) -> int:
    ssi = _load_ideal(args.ideal)
    gens = ssi.product.to_polys()
    params = _params(args, gens)
    ray = [complex(p) for p in args.ray.split(",")]
    stops = [float(s) for s in args.stops.split(",")]
    saper = metric.path_length("saper", gens, params, ray, stops)
    tilde = metric.path_length("tilde", gens, params, ray, stops)
    gates = {"saper-diverging": saper.diverging(), "tilde-bounded": tilde.bounded()}
    payload = {
        "config": _config(args) | {"params": params.to_json()},
        "saper": saper.to_json(),
        "tilde": tilde.to_json(),
        "gates": gates,
    }
    _write_json(args.out, payload)
    for name, res in (("saper", saper), ("tilde", tilde)):
        print(f"{name}: " + ", ".join(fmt(c) for c in res.cumulative), file=sys.stderr)
    for gate, ok in gates.items():
        if not ok:
            return _fail(gate, "signature not observed")
    return 0


def cmd_example_v6(args) -> int:
    ds = _parse_range(args.d)
    print("d  degree  power  charts")
    ok = True
    for d in ds:
        row = example_v6_ladder(d)
        ok &= row.equal and row.expected_power == max(d, 2)
        marks = " ".join("=" if e else "!" for e in row.per_chart)
        print(f"{d:<2} {row.degree:<7} {row.expected_power:<6} {marks}")
    w = remark_v9_witness()
    print(
        f"witness: pullback of direct image has E-exponents {w.pullback_of_direct_image}, "
        f"product of pullbacks has {w.product_of_pullbacks}"
    )
    ok &= w.distinct
    return 0 if ok else _fail("example-v6", "ladder or witness mismatch")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saper-forge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("resolve", help="resolve a plane curve by point blow-ups")
    r.add_argument("--curve", required=True, help="polynomial text or a file containing it")
    r.add_argument("--out", default="-")
    r.add_argument("--hint", action="append", help="extra center candidate x,y in the base chart")
    r.set_defaults(func=cmd_resolve)

    s = sub.add_parser("single-ideal", help="build and verify the single-step ideal")
    s.add_argument("--tree", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--variant", choices=("composite", "stepwise"), default="composite")
    s.set_defaults(func=cmd_single_ideal)

    v = sub.add_parser("verify", help="check an ideal file against a tree file")
    v.add_argument("--tree", required=True)
    v.add_argument("--ideal", required=True)
    v.set_defaults(func=cmd_verify)

    for name, func, help_ in (
        ("metric-scan", cmd_metric_scan, "sample the Chern, desingularizing and Saper forms"),
        ("saper-length", cmd_saper_length, "path lengths along a ray into the center"),
    ):
        m = sub.add_parser(name, help=help_)
        m.add_argument("--ideal", required=True)
        m.add_argument("--l", type=int, default=1)
        m.add_argument("--scale", default=None, help="generator scale; found by a max-scan if omitted")
        m.add_argument("--base-form", choices=metric.BASE_FORMS, default="euclidean")
        m.add_argument("--out", default="-")
        if name == "metric-scan":
            m.add_argument("--grid", type=int, default=1000)
            m.add_argument("--seed", type=lambda t: int(t, 0), default=metric.SEED)
        else:
            m.add_argument("--ray", default="1,1")
            m.add_argument("--stops", default=",".join(str(t) for t in metric.DEFAULT_STOPS))
        m.set_defaults(func=func)

    e = sub.add_parser("example-v6", help="the cone-over-a-conic twist ladder")
    e.add_argument("--d", default="0..4", help="range lo..hi or comma list")
    e.set_defaults(func=cmd_example_v6)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    paths = [getattr(args, k) for k in ("curve", "tree", "ideal", "out") if getattr(args, k, None) not in (None, "-")]
    if len(paths) != len(set(paths)):
        return _fail("config", "input and output paths must differ")
    try:
        return args.func(args)
    except SaperForgeError as exc:
        return _fail(type(exc).__name__, str(exc))
    except ValueError as exc:
        return _fail("input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
