"""Command line front end.

Exit codes: 0 all gates pass, 1 a gate or solver failed, 2 malformed input.
"""
from __future__ import annotations

import argparse
import ast
import json
import sys
from pathlib import Path

from . import formats
from .algorithm import build_model_space, run_algorithm, step0_check
from .complexmp import ConsistencyFail, complex_moments_of_measure, complex_to_real, consistency_residuals, solve_complex
from .config import RunConfig
from .core import (AtomicMeasure, BoxSpec, ComplexMomentTable, ExtMomentTable, MomentError, MomentTable2D,
                   moments_of_measure, random_measure, real_moments_of_measure)
from .extended import check_recurrences, solve_extended
from .gram import NotHermitian, build_gram_extended, psd_check

EXIT_OK, EXIT_FAIL, EXIT_MALFORMED = 0, 1, 2


def _box(text: str) -> BoxSpec:
    try:
        m, n, k = (int(p) for p in text.split(","))
        return BoxSpec(m, n, k)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--box expects m,n,k with non-negative integers: {exc}")


def _atoms(text: str) -> AtomicMeasure:
    try:
        val = ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise argparse.ArgumentTypeError(f"cannot parse atoms {text!r}: {exc}")
    if isinstance(val, tuple) and len(val) == 3 and all(isinstance(v, (int, float)) for v in val):
        val = [val]
    try:
        return AtomicMeasure(tuple(tuple(float(c) for c in a) for a in val))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"atoms must be (x1, x2, w) triples: {exc}")


def _add_common(p: argparse.ArgumentParser):
    d = RunConfig()
    p.add_argument("--tol-psd", type=float, default=d.tol_psd)
    p.add_argument("--tol-rank", type=float, default=d.tol_rank)
    p.add_argument("--tol-op", type=float, default=d.tol_op)
    p.add_argument("--tol-recon", type=float, default=d.tol_recon)
    p.add_argument("--tol-res", type=float, default=d.tol_res)
    p.add_argument("--depth", type=int, default=d.depth)
    p.add_argument("--beam", type=int, default=d.beam)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--box", type=_box, default=d.box, help="m_max,n_max,k_abs_max")
    p.add_argument("--json", action="store_true", help="print the machine-readable report")


def _config(args) -> RunConfig:
    return RunConfig(tol_psd=args.tol_psd, tol_rank=args.tol_rank, tol_op=args.tol_op,
                     tol_recon=args.tol_recon, tol_res=args.tol_res, depth=args.depth,
                     beam=args.beam, seed=args.seed, box=args.box)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moment2d", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write measure and moment files for a given or random measure")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--atoms", type=_atoms, help='e.g. "(1,2,3)" or "[(0,0,1),(1,1,2)]"')
    src.add_argument("--random", type=int, metavar="N", help="N random atoms")
    g.add_argument("--degree", type=int, default=4, help="total degree of the 2D and complex tables")
    g.add_argument("--out-dir", type=Path, default=Path("."))
    g.add_argument("--prefix", default="")
    _add_common(g)

    for name in ("check", "solve-extended", "solve-2d", "solve-complex"):
        p = sub.add_parser(name)
        p.add_argument("input", type=Path)
        if name != "check":
            p.add_argument("--out", type=Path, help="write recovered measure(s) here")
            p.add_argument("--report", type=Path, help="write the JSON report here")
        _add_common(p)
    return ap


def _emit(args, report: dict, lines: list[str]):
    if args.json:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=1, default=formats._default) + "\n")
    else:
        for line in lines:
            print(line)
    rp = getattr(args, "report", None)
    if rp is not None:
        Path(rp).write_text(json.dumps(report, sort_keys=True, indent=1, default=formats._default) + "\n",
                            encoding="utf-8")


def cmd_gen(args) -> int:
    mu = args.atoms if args.atoms is not None else random_measure(args.seed, args.random)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "measure.json": mu,
        "moments2d.json": real_moments_of_measure(mu, args.degree),
        "extended.json": moments_of_measure(mu, args.box),
        "complex.json": complex_moments_of_measure(mu, args.degree),
    }
    for name, obj in files.items():
        formats.write(out / f"{args.prefix}{name}", obj)
    report = {"command": "gen", "atoms": [list(a) for a in mu.sorted().atoms],
              "files": sorted(f"{args.prefix}{n}" for n in files)}
    _emit(args, report, [f"wrote {out / (args.prefix + n)}" for n in files])
    return EXIT_OK


def _check_extended(u: ExtMomentTable, cfg: RunConfig) -> tuple[dict, list]:
    rep, fails = {"kind": "extended"}, []
    scale = 1.0 + u.max_abs()
    conj = u.conjugation_residual()
    rep["conjugation_residual"] = conj
    if conj > 1e-12 * scale:
        fails.append("conjugation")
    try:
        G = build_gram_extended(u)
        p = psd_check(G, cfg.tol_psd, cfg.tol_rank)
        rep.update(psd_min_eig=p.min_eig, psd_margin=p.margin, gram_rank=p.rank,
                   hermitian_residual=p.hermitian_residual)
        if not p.is_psd:
            fails.append("psd")
    except NotHermitian:
        rep["hermitian_residual"] = build_gram_extended(u).hermitian_residual()
        fails.append("hermitian")
    rec = check_recurrences(u, 1e-9 * scale)
    rep.update(recurrence_residual=rec.max_residual, recurrence_tolerance=rec.tolerance,
               recurrence_violations=[[list(i), f, r] for i, f, r in rec.violations[:10]])
    if not rec.passed:
        fails.append("recurrence")
    return rep, fails


def _check_2d(s: MomentTable2D, cfg: RunConfig) -> tuple[dict, list]:
    ms = build_model_space(s, tol_rank=cfg.tol_rank, tol_psd=cfg.tol_psd, check_psd=False)
    r0 = step0_check(ms, s)
    rep = {"kind": "moments2d", "step0": r0.to_dict()}
    fails = []
    if not r0.psd_ok:
        fails.append("psd")
    if r0.hermitian_residual > 1e-12 * (1.0 + s.max_abs()):
        fails.append("hermitian")
    if r0.pairing_residual > r0.tolerance or r0.shift_residual > r0.tolerance:
        fails.append("step0")
    return rep, fails


def cmd_check(args) -> int:
    obj = formats.read(args.input)
    cfg = _config(args)
    if isinstance(obj, ExtMomentTable):
        rep, fails = _check_extended(obj, cfg)
    elif isinstance(obj, ComplexMomentTable):
        rt, im = consistency_residuals(obj)
        rep, fails = _check_2d(complex_to_real(obj), cfg)
        rep.update(kind="complex", roundtrip_residual=rt, imaginary_residual=im)
        if max(rt, im) > 1e-9 * (1.0 + obj.max_abs()):
            fails.insert(0, "consistency")
    elif isinstance(obj, MomentTable2D):
        rep, fails = _check_2d(obj, cfg)
    else:
        raise formats.FormatError("check expects a moment file, got a measure")
    rep["failed_gates"] = fails
    rep["passed"] = not fails
    lines = [f"{k}: {v}" for k, v in sorted(rep.items()) if k not in ("failed_gates", "passed")]
    lines.append("PASS" if not fails else "FAIL: " + ", ".join(fails))
    _emit(args, rep, lines)
    return EXIT_OK if not fails else EXIT_FAIL


def _expect(obj, cls, what):
    if not isinstance(obj, cls):
        raise formats.FormatError(f"expected {what}")
    return obj


def cmd_solve_extended(args) -> int:
    cfg = _config(args)
    u = _expect(formats.read(args.input, "extended"), ExtMomentTable, "an extended moment file")
    sol = solve_extended(u, tol=cfg.tolerances())
    rep = sol.report.to_dict()
    rep["command"] = "solve-extended"
    rep["atoms"] = [] if sol.measure is None else [list(a) for a in sol.measure.sorted().atoms]
    if sol.success and args.out is not None:
        formats.write(args.out, sol.measure)
    lines = [f"stage reached: {'all' if sol.success else sol.report.failed_stage}"]
    lines += [f"atom x1={a} x2={b} w={w}" for a, b, w in rep["atoms"]]
    lines.append("OK" if sol.success else f"FAILED at {sol.report.failed_stage}: {sol.report.message}")
    _emit(args, rep, lines)
    return EXIT_OK if sol.success else EXIT_FAIL


def cmd_solve_2d(args) -> int:
    cfg = _config(args)
    s = _expect(formats.read(args.input, "moments2d"), MomentTable2D, "a 2D moment file")
    res = run_algorithm(s, cfg.depth, cfg)
    rep = res.to_dict()
    rep["command"] = "solve-2d"
    rep["config"] = cfg.to_dict()
    if res.candidates and args.out is not None:
        formats.write(args.out, [c.measure for c in res.candidates])
    lines = [f"verdict: {res.verdict} ({res.stage}): {res.message}"]
    for i, c in enumerate(res.candidates):
        lines += [f"candidate {i}: atom x1={a} x2={b} w={w}" for a, b, w in c.measure.sorted().atoms]
    _emit(args, rep, lines)
    return EXIT_OK if res.candidates else EXIT_FAIL


def cmd_solve_complex(args) -> int:
    cfg = _config(args)
    a = _expect(formats.read(args.input, "complex"), MomentTable2D, "a complex moment file")
    if not isinstance(a, ComplexMomentTable):
        a = ComplexMomentTable(a.degree, a.entries, a.rectangular)
    try:
        sol = solve_complex(a, cfg)
    except ConsistencyFail as exc:
        rep = {"command": "solve-complex", "verdict": "ConsistencyFail", "message": str(exc)}
        _emit(args, rep, [f"FAILED consistency: {exc}"])
        return EXIT_FAIL
    rep = dict(sol.report)
    rep["command"] = "solve-complex"
    rep["atoms_z"] = [[[z.real, z.imag], w] for m in sol.measures for z, w in sorted(m.complex_atoms(), key=lambda p: (p[0].real, p[0].imag))]
    if sol.measures and args.out is not None:
        formats.write(args.out, sol.measures)
    lines = [f"verdict: {rep['verdict']}: {rep['message']}"]
    lines += [f"atom z=({z[0]}, {z[1]}) w={w}" for z, w in rep["atoms_z"]]
    _emit(args, rep, lines)
    return EXIT_OK if sol.measures else EXIT_FAIL


COMMANDS = {"gen": cmd_gen, "check": cmd_check, "solve-extended": cmd_solve_extended,
            "solve-2d": cmd_solve_2d, "solve-complex": cmd_solve_complex}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_MALFORMED if exc.code else EXIT_OK
    try:
        _config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    try:
        return COMMANDS[args.cmd](args)
    except formats.FormatError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except FileNotFoundError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except MomentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
