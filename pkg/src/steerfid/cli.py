"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 when any solve did not reach
``optimal``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import certify
from .moment import AboveQuantumBound, ContainmentError, assemble
from .scenarios import SCENARIOS, get_scenario
from .sdp import export_sdpa
from .selftest import (curve_csv, default_gap_tol, deviation_to_violation, fidelity_lower_bound, sweep)
from .steering import classical_fidelity_eig, classical_fidelity_sdp, verify_mixture_identities

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, keys may use dashes."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _add_scenario(p):
    p.add_argument("--scenario", choices=SCENARIOS, default="chsh")
    p.add_argument("--alpha", type=float, default=0.0, help="tilt parameter of the tilted scenario")


def _add_point(p):
    p.add_argument("--violation", type=float, help="observed Bell value")
    p.add_argument("--deviation-pct", type=float, help="percent below the quantum bound")
    p.add_argument("--marginals", help="comma-separated P(a|x), outcome-major")
    p.add_argument("--mode", choices=("eq", "geq"), default="eq")
    p.add_argument("--gap-tol", type=float)
    p.add_argument("--feas-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="steerfid", description="Device-independent fidelity bounds for steering assemblages")
    ap.add_argument("--config", help="key = value file; command-line flags take precedence")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("selftest", help="fidelity lower bound at one Bell value or over a sweep")
    _add_scenario(p)
    _add_point(p)
    p.add_argument("--sweep", type=int, help="number of uniformly spaced Bell values")
    p.add_argument("--no-crossing", action="store_true", help="skip the classical crossing search")
    p.add_argument("--out", help="output file (stdout by default)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--report", help="also write the JSON report here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--export-sdpa", help="write the assembled single-point problem in SDPA format")

    p = sub.add_parser("classical", help="classical (LHS) fidelity of a reference assemblage")
    _add_scenario(p)
    p.add_argument("--method", choices=("eig", "sdp", "both"), default="eig")

    p = sub.add_parser("identities", help="check the controlled-mixture fidelity identities")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("certify-state", help="DI entanglement witness for a two-qubit state")
    p.add_argument("--state", help="JSON 4x4 density matrix (entries as numbers or [re, im])")
    p.add_argument("--w", type=float, help="use the Werner state with this weight")

    p = sub.add_parser("certify-channel", help="DI witness for a non-entanglement-breaking qubit channel")
    p.add_argument("--channel", help="JSON Kraus list")
    p.add_argument("--preset", choices=("identity", "depolarizing", "amplitude-damping"))
    p.add_argument("--param", type=float, default=1.0, help="parameter of the preset channel")

    p = sub.add_parser("export-sdpa", help="write an assembled problem in SDPA sparse format")
    _add_scenario(p)
    _add_point(p)
    p.add_argument("--out", required=False)
    return ap


# helpers ------------------------------------------------------------------------------

def _mode(m: str) -> str:
    return "equality" if m == "eq" else "at-least"


def _violation(args, sc) -> float | None:
    if args.violation is not None and args.deviation_pct is not None:
        raise UsageError("give either --violation or --deviation-pct")
    if args.deviation_pct is not None:
        return deviation_to_violation(sc, args.deviation_pct)
    return args.violation


def _marginals(args, sc):
    if not getattr(args, "marginals", None):
        return None
    vals = np.array([float(t) for t in str(args.marginals).split(",")])
    if vals.size != sc.n_outcomes * sc.n_settings:
        raise UsageError(f"--marginals needs {sc.n_outcomes * sc.n_settings} values")
    return vals.reshape(sc.n_outcomes, sc.n_settings)


def _check_tols(args):
    for k in ("gap_tol", "feas_tol"):
        v = getattr(args, k, None)
        if v is not None and v <= 0:
            raise UsageError(f"--{k.replace('_', '-')} must be positive")
    if getattr(args, "max_iter", 1) < 1:
        raise UsageError("--max-iter must be positive")


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_matrix(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("state", data.get("rho"))
    return np.array([[complex(*z) if isinstance(z, list) else complex(z) for z in row] for row in data])


# commands ------------------------------------------------------------------------------

def cmd_selftest(args) -> int:
    _check_tols(args)
    sc = get_scenario(args.scenario, args.alpha)
    v = _violation(args, sc)
    if (v is None) == (args.sweep is None):
        raise UsageError("give exactly one of --violation/--deviation-pct or --sweep")
    kw = {"gap_tol": args.gap_tol if args.gap_tol is not None else default_gap_tol(sc),
          "feas_tol": args.feas_tol, "max_iter": args.max_iter}
    mode = _mode(args.mode)
    if args.sweep is not None:
        if args.marginals:
            raise UsageError("--marginals applies to single points only")
        rep = sweep(sc, args.sweep, mode, jobs=max(1, args.jobs), locate_crossing=not args.no_crossing, **kw)
        _emit(rep.to_json() + "\n" if args.format == "json" else rep.to_csv(), args.out)
        if args.report:
            Path(args.report).write_text(rep.to_json() + "\n")
        return EXIT_OK if not rep.failed else EXIT_FAILED
    marg = _marginals(args, sc)
    if args.export_sdpa:
        rp = assemble(sc, v, marg, mode)
        export_sdpa(rp.to_sdp(), args.export_sdpa)
    pt = fidelity_lower_bound(sc, v, marg, mode, **kw)
    if args.format == "json":
        from dataclasses import asdict
        _emit(json.dumps(asdict(pt), sort_keys=True) + "\n", args.out)
    else:
        _emit(curve_csv([pt]), args.out)
    return EXIT_OK if pt.ok else EXIT_FAILED


def cmd_classical(args) -> int:
    sc = get_scenario(args.scenario, args.alpha)
    out = {"scenario": sc.name}
    if args.method in ("eig", "both"):
        out["classical_fidelity_eig"] = round(classical_fidelity_eig(sc.reference_assemblage), 12)
    if args.method in ("sdp", "both"):
        out["classical_fidelity_sdp"] = round(classical_fidelity_sdp(sc.reference_assemblage), 9)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_identities(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    rep = verify_mixture_identities(args.samples, seed=args.seed, raise_on_failure=False)
    print(json.dumps({"samples": rep.samples, "max_residual": rep.max_residual, "ok": rep.ok}, sort_keys=True))
    return EXIT_OK if rep.ok else EXIT_FAILED


def cmd_certify_state(args) -> int:
    if (args.state is None) == (args.w is None):
        raise UsageError("give exactly one of --state or --w")
    rho = certify.werner_state(args.w) if args.w is not None else _load_matrix(args.state)
    if rho.shape != (4, 4):
        raise UsageError("state must be 4x4")
    print(certify.certify_state(rho).to_json())
    return EXIT_OK


def cmd_certify_channel(args) -> int:
    if (args.channel is None) == (args.preset is None):
        raise UsageError("give exactly one of --channel or --preset")
    if args.preset == "identity":
        ch = certify.QubitChannel.identity()
    elif args.preset == "depolarizing":
        ch = certify.QubitChannel.depolarizing(args.param)
    elif args.preset == "amplitude-damping":
        ch = certify.QubitChannel.amplitude_damping(args.param)
    else:
        ch = certify.QubitChannel.from_json(Path(args.channel).read_text())
    print(certify.certify_channel(ch).to_json())
    return EXIT_OK


def cmd_export_sdpa(args) -> int:
    sc = get_scenario(args.scenario, args.alpha)
    v = _violation(args, sc)
    if v is None:
        raise UsageError("give --violation or --deviation-pct")
    rp = assemble(sc, v, _marginals(args, sc), _mode(args.mode))
    if args.out:
        c0 = export_sdpa(rp.to_sdp(), args.out)
    else:
        c0 = export_sdpa(rp.to_sdp(), sys.stdout)
    print(json.dumps({"objective_offset": c0}), file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "selftest": cmd_selftest,
    "classical": cmd_classical,
    "identities": cmd_identities,
    "certify-state": cmd_certify_state,
    "certify-channel": cmd_certify_channel,
    "export-sdpa": cmd_export_sdpa,
}


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest: a for a in sp._actions}
        vals = {}
        for k, v in cfg.items():
            if k in dests:
                act = dests[k]
                if isinstance(act, argparse._StoreTrueAction):
                    vals[k] = v.lower() in ("1", "true", "yes", "on")
                else:
                    conv = act.type or str
                    vals[k] = conv(v)
                    if act.choices is not None and vals[k] not in act.choices:
                        raise UsageError(f"config key {k}: {v!r} not in {sorted(act.choices)}")
        sp.set_defaults(**vals)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"steerfid: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ContainmentError, AboveQuantumBound, OSError) as e:
        print(f"steerfid: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
