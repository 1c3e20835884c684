"""Command-line front end.

Exit codes: 0 success, 1 bad usage or input, 2 numerical non-convergence
(or, for ``verify-paper-table``, a reproduced value out of tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import games, reference
from .polytope import GammaTable, NotDecomposable, decompose_gamma
from .projection import DEFAULT_TOL, MAX_ITER, ProjectionNotConverged, project
from .proofs import LocalTheory, NonlocalityProof, SettingDistribution, dump_proof, load_proof
from .quantum import CATALOG_NAMES, catalog, violation_report
from .simulate import evidence, simulate

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("bellstrength")


class InputError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    proof: str
    mode: str = "all"
    tol: float = DEFAULT_TOL
    seed: int = games.DEFAULT_SEED
    fmt: str = "table"

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("tolerance must be positive")
        if self.fmt not in ("table", "json", "csv"):
            raise InputError(f"unknown output format {self.fmt!r}")

    def load(self) -> NonlocalityProof:
        return load_source(self.proof)


def load_source(source: str) -> NonlocalityProof:
    """A catalog name or the path of a proof JSON file."""
    if source in CATALOG_NAMES:
        return catalog(source)
    path = Path(source)
    if not path.exists():
        raise InputError(f"{source!r} is neither a catalog proof ({', '.join(CATALOG_NAMES)}) nor a file")
    try:
        return load_proof(path)
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read proof from {source}: {e}") from e


def parse_sigma(text: str, proof: NonlocalityProof) -> SettingDistribution:
    """``uniform``, ``p1,p2,...`` over joint settings in row-major order, or
    ``product:a1,a2/b1,b2`` with one marginal per party."""
    sc = proof.scenario
    try:
        if text == "uniform":
            return SettingDistribution.uniform(sc)
        if text.startswith("product:"):
            margs = [[float(x) for x in part.split(",")] for part in text[8:].split("/")]
            return SettingDistribution.product(sc, margs)
        return SettingDistribution.general(sc, [float(x) for x in text.split(",")])
    except ValueError as e:
        raise InputError(f"bad setting distribution {text!r}: {e}") from e


def _label(setting) -> str:
    return "".join(str(s + 1) for s in setting)


def _fmt(x: float) -> str:
    return f"{x:.10f}"


# printed in scientific notation; 10 decimals would show them as zero
_DIAGNOSTICS = {"kkt_residual", "outer_gap", "crosscheck_gap", "reconstruction_error"}


def _emit(obj, fmt: str, out):
    if fmt == "json":
        json.dump(obj, out, indent=2, allow_nan=True)
        out.write("\n")
        return
    rows = obj if isinstance(obj, list) else [obj]
    if fmt == "csv":
        flat = [{k: v for k, v in r.items() if not isinstance(v, (dict, list))} for r in rows]
        w = csv.DictWriter(out, fieldnames=list(flat[0]))
        w.writeheader()
        w.writerows(flat)
        return
    for r in rows:
        for k, v in r.items():
            if isinstance(v, list):
                continue  # raw vectors are only emitted as JSON
            if isinstance(v, float):
                v = f"{v:.1e}" if k in _DIAGNOSTICS else _fmt(v)
            elif isinstance(v, dict) and v and isinstance(next(iter(v.values())), dict):
                out.write(f"{k:>16}:\n")
                for a, tab in v.items():
                    cells = "  ".join(f"{o}: {_fmt(p)}" for o, p in tab.items())
                    out.write(f"{'':>16}  {a}  {cells}\n")
                continue
            elif isinstance(v, dict):
                v = "  ".join(f"{a}={_fmt(b) if isinstance(b, float) else b}" for a, b in v.items())
            out.write(f"{k:>16}: {v}\n")
        out.write("\n")


def _tables(proof: NonlocalityProof, theory) -> dict:
    out = {}
    for st in proof.scenario.joint_settings():
        t = theory.induced(st)
        out[_label(st)] = {",".join(map(str, o)): float(p) for o, p in t.items()}
    return out


def _strength_record(proof, r: games.StrengthResult, with_tables: bool) -> dict:
    sc = proof.scenario
    rec = {
        "proof": proof.name,
        "mode": r.mode,
        "strength_bits": r.strength_bits,
        "kkt_residual": r.kkt_residual,
        "outer_gap": r.outer_gap,
        "crosscheck_gap": r.crosscheck_gap,
        "converged": r.converged,
        "sigma": {_label(st): float(p) for st, p in zip(sc.joint_settings(), r.sigma_star.probs)},
    }
    if with_tables:
        rec["best_local_tables"] = _tables(proof, r.pi_star)
        rec["pi_star"] = [float(w) for w in r.pi_star.weights]
    return rec


# ---------------------------------------------------------------- commands


def cmd_export_proof(args, out) -> int:
    proof = load_source(args.name)
    text = dump_proof(proof, args.output)
    if args.output is None:
        out.write(text + "\n")
    return EXIT_OK


def cmd_project(args, out) -> int:
    proof = load_source(args.proof)
    sigma = parse_sigma(args.sigma, proof)
    if args.tol <= 0:
        raise InputError("tolerance must be positive")
    code = EXIT_OK
    try:
        r = project(proof, sigma, args.tol, args.max_iter)
    except ProjectionNotConverged as e:
        r, code = e.result, EXIT_NUMERIC
    rec = {
        "proof": proof.name,
        "value_bits": r.value,
        "kkt_residual": r.kkt_residual,
        "iterations": r.iterations,
        "converged": r.converged,
        "pi_star": [float(w) for w in r.pi_star.weights],
        "best_local_tables": _tables(proof, r.pi_star),
    }
    _emit(rec, "json", out)
    return code


def cmd_strength(args, out) -> int:
    cfg = RunConfig(args.proof, args.mode, args.tol, args.seed, args.format)
    proof = cfg.load()
    modes = games.MODES if cfg.mode == "all" else (cfg.mode,)
    records, ok = [], True
    for m in modes:
        kw = {"seed": cfg.seed} if m == "uncorrelated" else {}
        try:
            r = games.strength(proof, m, **kw)
        except ProjectionNotConverged as e:
            log.error("%s: %s", m, e)
            return EXIT_NUMERIC
        ok &= r.converged and r.kkt_residual <= cfg.tol
        records.append(_strength_record(proof, r, cfg.fmt != "csv"))
    _emit(records if len(records) > 1 or cfg.fmt != "json" else records[0], cfg.fmt, out)
    return EXIT_OK if ok else EXIT_NUMERIC


def verify_table(names, tol: float = 1e-6):
    """Recompute the published strengths; yields (name, mode, computed, published, ok)."""
    for name in names:
        proof = catalog(name)
        for m, published in zip(games.MODES, reference.STRENGTHS[name]):
            got = games.strength(proof, m).strength_bits
            yield name, m, got, published, abs(got - published) <= tol


def cmd_verify_paper_table(args, out) -> int:
    names = [args.proof] if args.proof else list(CATALOG_NAMES)
    for n in names:
        if n not in CATALOG_NAMES:
            raise InputError(f"unknown proof {n!r}")
    if args.tol <= 0:
        raise InputError("tolerance must be positive")
    failed = []
    out.write(f"{'proof':<15} {'mode':<13} {'computed':>13} {'published':>13} {'deviation':>10}\n")
    for name, m, got, pub, ok in verify_table(names, args.tol):
        out.write(f"{name:<15} {m:<13} {_fmt(got):>13} {_fmt(pub):>13} {got - pub:>10.1e}{'' if ok else '  FAIL'}\n")
        if not ok:
            failed.append(f"{name}/{m}")
    if failed:
        out.write(f"{len(failed)} cell(s) outside {args.tol:g}: {', '.join(failed)}\n")
        return EXIT_NUMERIC
    out.write(f"all {len(names) * 3} cells within {args.tol:g}\n")
    return EXIT_OK


def cmd_decompose(args, out) -> int:
    try:
        gamma = GammaTable.load(args.gamma)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read Gamma-table from {args.gamma}: {e}") from e
    try:
        d = decompose_gamma(gamma)
    except NotDecomposable as e:
        raise InputError(str(e)) from e
    w = d.theory.weights
    rec = {
        "weights": {str(v): float(w[v]) for v in np.flatnonzero(w)},
        "reconstruction_error": d.error,
        "steps": d.steps,
    }
    _emit(rec, "json", out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    proof = load_source(args.proof)
    sigma = parse_sigma(args.sigma, proof)
    if args.n < 0:
        raise InputError("trial count must be nonnegative")
    if not 0 <= args.seed < 2**64:
        raise InputError("seed must be an unsigned 64-bit integer")
    if args.against == "best-lr":
        try:
            pi = project(proof, sigma).pi_star
        except ProjectionNotConverged as e:
            log.error("%s", e)
            return EXIT_NUMERIC
    else:
        pi = LocalTheory.uniform(proof.scenario)
    tr = evidence(simulate(proof, sigma, args.n, args.seed), proof, sigma, pi)
    rec = {
        "proof": proof.name,
        "n": tr.n,
        "seed": args.seed,
        "against": args.against,
        "total_llr_bits": tr.total_llr_bits,
        "per_trial_mean": tr.per_trial_mean,
        "std_llr_bits": tr.std_llr_bits,
        "running_history": [list(h) for h in tr.history],
    }
    _emit(rec, "json", out)
    return EXIT_OK


def cmd_violation_report(args, out) -> int:
    proof = load_source(args.proof)
    try:
        r = violation_report(proof, args.family)
    except (KeyError, ValueError) as e:
        raise InputError(str(e.args[0] if e.args else e)) from e
    rec = {"inequality": r.inequality, "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack, "violated": r.violated}
    _emit(rec, args.format, out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bellstrength", description="Statistical strength of nonlocality proofs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("export-proof", help="write a catalog proof as JSON")
    s.add_argument("name")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_proof)

    s = sub.add_parser("project", help="closest local theory at a fixed setting distribution")
    s.add_argument("proof")
    s.add_argument("--sigma", default="uniform")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=MAX_ITER)
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("strength", help="uniform / uncorrelated / correlated strength")
    s.add_argument("proof")
    s.add_argument("--mode", choices=games.MODES + ("all",), default="all")
    s.add_argument("--tol", type=float, default=1e-8, help="largest acceptable KKT residual")
    s.add_argument("--seed", type=int, default=games.DEFAULT_SEED)
    fmt = s.add_mutually_exclusive_group()
    fmt.add_argument("--format", choices=("table", "json", "csv"), default="table")
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--table", dest="format", action="store_const", const="table")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    s.set_defaults(func=cmd_strength)

    s = sub.add_parser("verify-paper-table", help="recompute the published strength table")
    s.add_argument("--proof", choices=CATALOG_NAMES)
    s.add_argument("--tol", type=float, default=1e-6)
    s.set_defaults(func=cmd_verify_paper_table)

    s = sub.add_parser("decompose", help="split a Gamma-table JSON into deterministic theories")
    s.add_argument("gamma")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("simulate", help="simulate trials and accumulate log-likelihood evidence")
    s.add_argument("proof")
    s.add_argument("--sigma", default="uniform")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--against", choices=("best-lr", "uniform-lr"), default="best-lr")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("violation-report", help="evaluate the proof's Bell-type inequality")
    s.add_argument("proof")
    s.add_argument("--family", choices=CATALOG_NAMES)
    s.add_argument("--format", choices=("table", "json", "csv"), default="table")
    s.set_defaults(func=cmd_violation_report)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except InputError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT


def run(argv) -> tuple[int, str]:
    """Run the CLI in-process and capture stdout (used by the tests)."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
