"""Command-line entry point: ``dirmax {gen,apply,verify,experiment}``.

Exit codes: 0 success, 1 a verification gate failed, 2 usage or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import constants
from .directions import (LacunarityError, SlopeSet, build_from_dict, certify_log_order,
                         equispaced_slopes, geometric_slopes, verify_certificate)
from .experiment import ConfigError, atomic_write, run_experiment, write_report
from .gridops import GridFormatError, GridFunction, directional_max, parse_scales
from .verify import (ChainError, IntervalChain, StructuralCheckError, chain_scale,
                     check_lemma1, check_lemma2, check_sector_overlap, kernel_checks,
                     lemma1_suite, random_chain, random_field)

OK, GATE_FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _family(spec: str) -> SlopeSet:
    """``equispaced:N``, ``geometric:RATIO:COUNT[:ANCHOR]`` or ``file:PATH``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "equispaced":
            s = equispaced_slopes(int(rest))
        elif kind == "geometric":
            parts = rest.split(":")
            s = geometric_slopes(float(parts[0]), int(parts[1]),
                                 float(parts[2]) if len(parts) > 2 else 1.0)
        elif kind == "file":
            s = SlopeSet.from_json(Path(rest).read_text())
        else:
            raise UsageError(f"unknown family {spec!r}")
    except (ValueError, IndexError, OSError) as exc:
        raise UsageError(f"bad family {spec!r}: {exc}") from exc
    if s.certificate is None:
        s = SlopeSet(s.slopes, certify_log_order(s))
    return s


def _emit(text: str, output) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(output, text)


# -- gen ------------------------------------------------------------------------------

def cmd_gen_directions(args) -> int:
    if args.geometric is not None:
        if args.count is None:
            raise UsageError("--geometric needs --count")
        s = geometric_slopes(args.geometric, args.count, args.anchor)
    elif args.equispaced is not None:
        s = equispaced_slopes(args.equispaced)
    else:
        spec = json.loads(Path(args.built).read_text())
        s = build_from_dict(spec)
    if s.certificate is None:
        s = SlopeSet(s.slopes, certify_log_order(s))
    ok, problems = verify_certificate(s, s.certificate)
    if not ok:
        print("certificate check failed: " + "; ".join(problems), file=sys.stderr)
        return GATE_FAILED
    _emit(s.to_json() + "\n", args.output)
    print(f"{len(s)} slopes, lacunary order {s.order}", file=sys.stderr)
    return OK


# -- apply ----------------------------------------------------------------------------

def cmd_apply(args) -> int:
    f = GridFunction.load(args.input)
    if args.directions:
        s = SlopeSet.from_json(Path(args.directions).read_text())
    else:
        s = _family(args.family)
    scales = parse_scales(args.scales, f.n)
    g = directional_max(f, s.slopes, scales)
    atomic_write(args.output, g.to_bytes())
    if args.pgm:
        atomic_write(args.pgm, g.to_pgm())
    ratio = g.norm() / f.norm() if f.norm() > 0 else float("nan")
    print(f"L2 ratio {ratio!r}")
    return OK


# -- verify ---------------------------------------------------------------------------

def _gate(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def _finish(results) -> int:
    failed = [name for name, ok in results if not ok]
    if failed:
        print(f"first failing check: {failed[0]}", file=sys.stderr)
        return GATE_FAILED
    return OK


def _verify_kernels(args):
    return [(name, _gate(name, ok, detail)) for name, ok, detail in kernel_checks()]


def _verify_lemma1(args):
    cases = lemma1_suite(args.count, args.n, args.seed)
    scales = parse_scales(args.scales, args.n)
    worst, where = 0.0, None
    for i, (f, p, beta) in enumerate(cases):
        r, loc = check_lemma1(f, p, beta, scales)
        if r > worst:
            worst, where = r, (i, loc)
    lim = constants.limit("lemma1_C_pin")
    name = "single-slope pointwise constant"
    return [(name, _gate(name, worst <= lim,
                         f"max ratio {worst:.6g} (case {where}) vs limit {lim:.6g}"))]


def _verify_lemma2(args):
    rng = np.random.default_rng(args.seed)
    if args.chain_file:
        try:
            d = json.loads(Path(args.chain_file).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read chain file: {exc}") from exc
        try:
            chains = [IntervalChain.from_dict(d)]
        except ChainError as exc:
            name = f"chain condition at level {exc.level}"
            return [(name, _gate(name, False, str(exc)))]
    else:
        chains = [random_chain(rng, int(rng.integers(1, 5))) for _ in range(args.count)]
    scales = parse_scales(args.scales, args.n)
    results = []
    worst = 0.0
    for i, chain in enumerate(chains):
        h = args.h if args.h else chain_scale(chain, args.R)
        f = random_field(rng, args.n, "bumps")
        name = f"band split, chain {i}"
        try:
            rep = check_lemma2(f, chain, args.R, h, scales)
        except StructuralCheckError as exc:
            results.append((name, _gate(name, False, str(exc))))
            continue
        worst = max(worst, rep.constant_sheared)
        results.append((name, _gate(name, True,
                                    f"telescoping {rep.telescoping_error:.1e}, support ok, "
                                    f"weights {max(rep.scalars, default=0.0):.3f} <= 4, "
                                    f"constant {rep.constant_sheared:.4g}")))
    lim = constants.limit("lemma2_C_sheared")
    name = "band split pointwise constant"
    results.append((name, _gate(name, worst <= lim, f"{worst:.6g} vs limit {lim:.6g}")))
    return results


def _verify_overlap(args):
    s = _family(args.family)
    ok, problems = verify_certificate(s, s.certificate)
    mult = check_sector_overlap(s.certificate)
    print(f"per-level multiplicity: {' '.join(map(str, mult))}")
    print(f"multiplicity {max(mult)}")
    name = "certificate"
    return [(name, _gate(name, ok, "valid" if ok else "; ".join(problems)))]


def cmd_verify(args) -> int:
    runner = {"kernels": _verify_kernels, "lemma1": _verify_lemma1,
              "lemma2": _verify_lemma2, "overlap": _verify_overlap}[args.which]
    return _finish(runner(args))


# -- experiment -----------------------------------------------------------------------

BUNDLED = ("katz_sweep", "theorem_sweep")


def load_config(name_or_path: str):
    """Read a config file, or a bundled config by name; returns ``(config, base_dir)``."""
    if name_or_path in BUNDLED or name_or_path in {b + ".json" for b in BUNDLED}:
        stem = name_or_path.removesuffix(".json")
        text = resources.files("dirmax").joinpath("configs", stem + ".json").read_text()
        return json.loads(text), Path(".")
    path = Path(name_or_path)
    return json.loads(path.read_text()), path.parent


def cmd_experiment(args) -> int:
    try:
        cfg, base = load_config(args.config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if args.seed is not None:
        cfg["seed"] = args.seed
    report = run_experiment(cfg, base)
    out_dir = args.out_dir or cfg.get("output_dir", ".")
    name = cfg.get("name", Path(args.config).stem)
    csv_path, json_path = write_report(report, out_dir, name)
    sys.stdout.write(report.csv_text())
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirmax", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a certified slope set")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--geometric", type=float, metavar="RATIO")
    src.add_argument("--equispaced", type=int, metavar="COUNT")
    src.add_argument("--built", metavar="SPEC_JSON")
    g.add_argument("--count", type=int)
    g.add_argument("--anchor", type=float, default=1.0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_directions)

    a = sub.add_parser("apply", help="apply the directional maximal operator to a grid")
    a.add_argument("input")
    a.add_argument("-o", "--output", required=True)
    dsrc = a.add_mutually_exclusive_group(required=True)
    dsrc.add_argument("--directions", metavar="SLOPES_JSON")
    dsrc.add_argument("--family", metavar="SPEC")
    a.add_argument("--scales", default="dyadic")
    a.add_argument("--pgm", help="also write a normalized PGM preview")
    a.set_defaults(func=cmd_apply)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("which", choices=("kernels", "lemma1", "lemma2", "overlap"))
    v.add_argument("--seed", type=int, default=20240611)
    v.add_argument("--n", type=int, default=128)
    v.add_argument("--count", type=int, default=None)
    v.add_argument("--scales", default="wide")
    v.add_argument("--chain-file")
    v.add_argument("--R", type=float, default=1.2)
    v.add_argument("--h", type=float, default=None)
    v.add_argument("--family", default="equispaced:32")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a sweep config (file or bundled name)")
    e.add_argument("config", help=f"JSON config path or one of {', '.join(BUNDLED)}")
    e.add_argument("--out-dir")
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if getattr(args, "count", None) is None and args.command == "verify":
        args.count = 100 if args.which == "lemma1" else 5
    try:
        return args.func(args)
    except (UsageError, GridFormatError, LacunarityError, ConfigError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"dirmax: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
