"""Batch command line driver.

Five subcommands: ``trig`` prints the right-angled polygon constants
with closed-form bisector disjointness checks, ``build`` constructs a
representation from a product description, ``extend`` widens one by an
orthogonal twist, and ``verify`` / ``distort`` re-run the numerical
checks on a stored representation file.

Exit codes: 0 all checks pass, 2 a verification failed, 3 invalid
input, 4 a resource cap refused the request.  Every report embeds the
config hash, the seed, and the tolerance set; reruns with the same
arguments are byte-identical apart from the timestamp field.
"""
from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import hyperbolic as hyp
from .complexes import build_ball
from .distortion import distortion_report, report_csv, report_json_dict
from .errors import InvalidInputError, PolyrepError, SizeLimitError
from .groups import (
    GraphProductSpec,
    GroupHom,
    group_hom_from_json,
    group_spec_from_json,
    make_cyclic_group,
    tautological_quotient,
)
from .representation import (
    OrthogonalTwist,
    TOL_BUILD,
    build_even,
    build_odd,
    extend_representation,
    min_displacement_scan,
    representation_from_json,
    representation_to_json,
    verify_orthogonality,
    verify_relations,
)

__all__ = ["RunConfig", "main"]

MAX_RADIUS = 6
TRIG_RANGE = (5, 64)
CHECK_TOL = 1e-9
DISPLACEMENT_TOL = 1e-6
SEPARATION_TOL = 1e-3

TOLERANCES = {
    "build": TOL_BUILD,
    "check": CHECK_TOL,
    "displacement": DISPLACEMENT_TOL,
    "separation": SEPARATION_TOL,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated knobs shared by the ball-walking subcommands."""

    command: str
    input: Path | None
    radius: int
    sample: int | None
    seed: int

    def __post_init__(self):
        if self.radius > MAX_RADIUS:
            raise SizeLimitError(
                f"radius {self.radius} exceeds the cap of {MAX_RADIUS}"
            )
        if self.radius < 0:
            raise InvalidInputError("radius must be nonnegative")

    def hash(self) -> str:
        payload = json.dumps(
            {
                "command": self.command,
                "input": str(self.input) if self.input else None,
                "radius": self.radius,
                "sample": self.sample,
                "seed": self.seed,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _stamp(obj: dict, config_hash: str, seed) -> dict:
    obj["configHash"] = config_hash
    obj["seed"] = seed
    obj["tolerances"] = dict(TOLERANCES)
    obj["timestamp"] = _now()
    return obj


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")


def _emit(lines: list, obj: dict, args) -> None:
    if args.format == "json":
        _write(json.dumps(obj, sort_keys=True, indent=2), args.out)
    else:
        _write("\n".join(lines), args.out)


def _read_file(path: Path, what: str) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise InvalidInputError(f"{path}: cannot read {what}: {exc}") from exc


def _load_spec(path: Path) -> GraphProductSpec:
    text = _read_file(path, "group description")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return group_spec_from_json(data)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc


def _load_representation(path: Path):
    text = _read_file(path, "representation")
    try:
        return representation_from_json(text)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc


def _trivial_quotient(spec: GraphProductSpec) -> GroupHom:
    return GroupHom(
        spec=spec,
        target=make_cyclic_group(1),
        factor_images=tuple(tuple(0 for _ in range(f.order)) for f in spec.factors),
    )


def _load_quotient(arg: str, spec: GraphProductSpec) -> GroupHom:
    if arg == "tautological":
        return tautological_quotient(spec)
    if arg == "trivial":
        return _trivial_quotient(spec)
    path = Path(arg)
    text = _read_file(path, "quotient")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return group_hom_from_json(data, spec)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# trig


def _status(margin: float) -> str:
    if margin > CHECK_TOL:
        return "PASS"
    if margin < -CHECK_TOL:
        return "FAIL"
    return "TANGENT"


def _trig_row(n: int) -> dict:
    t = hyp.trig_table(n)
    # bisectors of a diameter and an edge meeting at a right angle
    diameter_edge = hyp.disjoint_bisectors_test(2.0 * t.circumradius, t.edge_length)
    # bisectors of a short diagonal and an edge
    diagonal_edge = hyp.disjoint_bisectors_test(t.short_diagonal, t.edge_length)
    # diagonal-edge-diagonal chain at mutual right angles, collapsed to
    # an equivalent pair: margin sinh^2(diag/2) cosh(edge) - 1
    chain = math.sinh(t.short_diagonal / 2.0) ** 2 * t.cosh_edge - 1.0
    return {
        "n": n,
        "edge": t.edge_length,
        "shortDiagonal": t.short_diagonal,
        "inradius": t.inradius,
        "circumradius": t.circumradius,
        "checks": {
            "diameterEdge": {
                "status": _status(diameter_edge.margin),
                "margin": diameter_edge.margin,
            },
            "diagonalEdge": {
                "status": _status(diagonal_edge.margin),
                "margin": diagonal_edge.margin,
            },
            "diagonalChain": {"status": _status(chain), "margin": chain},
        },
    }


def cmd_trig(args) -> int:
    first = args.first
    last = args.last if args.last is not None else first
    lo, hi = TRIG_RANGE
    if not lo <= first <= last <= hi:
        raise InvalidInputError(
            f"range {first}..{last} outside the supported {lo}..{hi}"
        )
    cfg = RunConfig(command="trig", input=None, radius=0, sample=None, seed=0)
    rows = [_trig_row(n) for n in range(first, last + 1)]
    lines = []
    for row in rows:
        checks = " ".join(
            f"{name}={c['status']}({c['margin']:+.3f})"
            for name, c in row["checks"].items()
        )
        lines.append(
            f"n={row['n']:2d} edge={row['edge']:.9f} "
            f"diag={row['shortDiagonal']:.9f} inradius={row['inradius']:.9f} "
            f"circumradius={row['circumradius']:.9f} {checks}"
        )
    lines.append(f"config {cfg.hash()[:12]} seed -")
    obj = _stamp({"command": "trig", "range": [first, last], "rows": rows},
                 cfg.hash(), None)
    _emit(lines, obj, args)
    return 0


# ---------------------------------------------------------------------------
# build / extend


def cmd_build(args) -> int:
    spec = _load_spec(args.input)
    if args.mode == "odd":
        rep = build_odd(spec, seed=args.seed)
    else:
        hom = _load_quotient(args.quotient, spec)
        rep = build_even(spec, hom, seed=args.seed)
    text = representation_to_json(rep)
    _write(text, args.out)
    if args.out is not None:
        print(
            f"wrote mode={rep.mode} p={rep.p} "
            f"generators={len(rep.generators)} to {args.out}"
        )
    return 0


def cmd_extend(args) -> int:
    rep = _load_representation(args.input)
    hom = _load_quotient(args.quotient, rep.spec)
    twist = OrthogonalTwist.from_group_hom(rep, hom)
    ext = extend_representation(rep, twist)
    text = representation_to_json(ext)
    _write(text, args.out)
    if args.out is not None:
        print(f"wrote mode={ext.mode} p={ext.p} to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify / distort


def cmd_verify(args) -> int:
    cfg = RunConfig(
        command="verify", input=args.input, radius=args.radius,
        sample=None, seed=args.seed,
    )
    rep = _load_representation(args.input)
    rel = verify_relations(rep)
    scan = verify_orthogonality(rep)
    ball = build_ball(rep.spec, cfg.radius)
    disp = min_displacement_scan(rep, ball)
    checks = {
        "relations": {
            "passed": rel.max_residual() <= CHECK_TOL,
            "maxResidual": rel.max_residual(),
        },
        "orthogonality": {
            "passed": scan.all_orthogonal,
            "worstResidual": scan.worst_residual,
            "pairsChecked": scan.pairs_checked,
            "failures": [list(f) for f in scan.failures],
        },
        "displacement": {
            "passed": disp.min_score > DISPLACEMENT_TOL,
            "min": disp.min_score,
            "elements": len(disp.scores),
        },
    }
    passed = all(c["passed"] for c in checks.values())
    lines = [
        f"relations {'PASS' if checks['relations']['passed'] else 'FAIL'} "
        f"max residual {rel.max_residual():.3e}",
        f"orthogonality {'PASS' if scan.all_orthogonal else 'FAIL'} "
        f"worst residual {scan.worst_residual:.3e} "
        f"({len(scan.failures)} of {scan.pairs_checked} pairs failing)",
        f"displacement {'PASS' if checks['displacement']['passed'] else 'FAIL'} "
        f"min {disp.min_score:.6f} over {len(disp.scores)} ball elements",
        f"verify {'PASS' if passed else 'FAIL'}",
        f"config {cfg.hash()[:12]} seed {cfg.seed}",
    ]
    obj = _stamp(
        {"command": "verify", "checks": checks, "passed": passed},
        cfg.hash(), cfg.seed,
    )
    _emit(lines, obj, args)
    return 0 if passed else 2


def cmd_distort(args) -> int:
    cfg = RunConfig(
        command="distort", input=args.input, radius=args.radius,
        sample=args.sample, seed=args.seed,
    )
    if cfg.radius < 3:
        raise InvalidInputError("distortion needs --radius at least 3")
    rep = _load_representation(args.input)
    ball = build_ball(rep.spec, cfg.radius)
    rpt = distortion_report(rep, ball, sample=cfg.sample, seed=cfg.seed)
    env = rpt.envelope()
    monotone = all(
        hi >= lo - 1e-12 for (_, lo), (_, hi) in zip(env[1:], env[2:])
    )
    checks = {
        "envelope": {"passed": monotone},
        "slope": {"passed": rpt.slope is not None and rpt.slope > 0,
                  "value": rpt.slope},
        "displacement": {"passed": rpt.min_displacement > DISPLACEMENT_TOL,
                         "min": rpt.min_displacement},
        "separation": {
            "passed": rpt.all_required_disjoint
            and rpt.delta_min > SEPARATION_TOL,
            "deltaMin": None if math.isinf(rpt.delta_min) else rpt.delta_min,
        },
        "crossings": {"passed": rpt.crossings_ok},
    }
    passed = all(c["passed"] for c in checks.values())
    lines = []
    for row in rpt.rows:
        lines.append(
            f"k={row.k:2d} count={row.count:5d} min={row.dmin:.9f} "
            f"med={row.dmed:.9f} max={row.dmax:.9f}"
        )
    for name, c in checks.items():
        detail = " ".join(
            f"{k}={v}" for k, v in c.items() if k != "passed"
        )
        lines.append(f"{name} {'PASS' if c['passed'] else 'FAIL'} {detail}".rstrip())
    lines.append(f"distort {'PASS' if passed else 'FAIL'}")
    lines.append(f"config {cfg.hash()[:12]} seed {cfg.seed}")
    obj = _stamp(
        {"command": "distort", "report": report_json_dict(rpt),
         "checks": checks, "passed": passed},
        cfg.hash(), cfg.seed,
    )
    if args.csv is not None:
        args.csv.write_text(report_csv(rpt))
    _emit(lines, obj, args)
    return 0 if passed else 2


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyrep",
        description="Build and check hyperbolic polygon-of-groups actions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", type=Path, help="write the report here")

    t = sub.add_parser("trig", parents=[common],
                       help="polygon constants and bisector checks")
    t.add_argument("first", type=int)
    t.add_argument("last", type=int, nargs="?")
    t.set_defaults(func=cmd_trig)

    b = sub.add_parser("build", help="construct a representation")
    b.add_argument("--input", type=Path, required=True,
                   help="group description JSON")
    b.add_argument("--mode", choices=("odd", "even"), required=True)
    b.add_argument("--quotient", default="tautological",
                   help="quotient JSON path, 'tautological', or 'trivial'")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path)
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("extend", help="extend by an orthogonal twist")
    e.add_argument("--input", type=Path, required=True,
                   help="representation JSON")
    e.add_argument("--quotient", required=True,
                   help="quotient JSON path, 'tautological', or 'trivial'")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_extend)

    v = sub.add_parser("verify", parents=[common],
                       help="re-run checks on a stored representation")
    v.add_argument("--input", type=Path, required=True)
    v.add_argument("--radius", type=int, default=2,
                   help="ball radius for the displacement scan")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("distort", parents=[common],
                       help="distortion report for a stored representation")
    d.add_argument("--input", type=Path, required=True)
    d.add_argument("--radius", type=int, default=3)
    d.add_argument("--sample", type=int, default=None)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--csv", type=Path, help="write the distance table here")
    d.set_defaults(func=cmd_distort)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PolyrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cert = getattr(exc, "certificate", None)
        if cert is not None:
            print(json.dumps({"certificate": cert}, sort_keys=True))
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
