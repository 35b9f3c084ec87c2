"""``sedna`` command line: plan, simulate, sweep, codec-bench, rerun.

Output is CSV with ``#`` metadata lines carrying the full resolved spec.
Without ``--out`` the CSV goes to stdout, or to ``$SEDNA_OUTPUT_DIR/<command>.csv``
when that variable is set.

Exit codes: 0 ok, 1 runtime error, 2 invalid or infeasible input.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__, analysis
from .experiments import COMMANDS, SpecError, load_config, normalize_censors, read_embedded_spec, render, resolve

OUTPUT_DIR_ENV = "SEDNA_OUTPUT_DIR"

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


def _num(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _num_list(text: str) -> list:
    return [_num(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _censor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="lane count")
    p.add_argument("--ce", dest="c_e", type=int, help="effective censoring lanes")
    p.add_argument("--f", type=int, help="Byzantine lanes (with --c)")
    p.add_argument("--c", type=int, help="colluding censors (with --f); sets c_e = min(f, c)")


def _plan_flags(p: argparse.ArgumentParser) -> None:
    _censor_flags(p)
    p.add_argument("--delta", type=float, help="per-slot failure budget")
    p.add_argument("--delta-code", type=float, help="override the codec's decode-failure probability")
    p.add_argument("--S", type=int, help="message length in bytes")
    p.add_argument("--M-h", dest="M_h", type=int, help="per-bundle metadata bytes")
    p.add_argument("--M-s", dest="M_s", type=int, help="per-symbol metadata bytes")
    p.add_argument("--epsilon", type=float, help="rateless reception overhead")
    p.add_argument("--s-max", type=int, help="largest symbols-per-bundle searched")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sedna", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sedna {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; keys from [<command>] apply, flags override")
    common.add_argument("--out", help="output CSV path (default stdout or $%s)" % OUTPUT_DIR_ENV)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="bandwidth-minimal plan per variant")
    p.add_argument("--variant", choices=["naive", "mds", "rateless", "all"])
    _plan_flags(p)
    p.add_argument("--ell-sym", dest="ell_sym_grid", type=_num_list, help="symbol sizes to search, comma separated")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo inclusion trials")
    _censor_flags(p)
    p.add_argument("--variant", choices=["naive", "mds", "rateless"])
    p.add_argument("--m", type=int, help="lanes per slot")
    p.add_argument("--s", type=int, help="symbols per bundle (rateless)")
    p.add_argument("--k", type=int, help="shares needed (mds)")
    p.add_argument("--ell-sym", dest="ell_sym", type=int, help="symbol length (rateless)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--payload-size", type=int, help="random payload of this many bytes")
    p.add_argument("--payload-file", help="payload bytes from a file (embedded as hex)")
    p.add_argument("--no-collect", dest="collects_symbols", action="store_const", const=False,
                   help="adversary does not pool symbols")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-slots", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("sweep", parents=[common], help="long-form CSV over one parameter axis")
    p.add_argument("--axis", help="one of S, m, s, ce_ratio, delta, n")
    p.add_argument("--values", type=_num_list, help="grid values, comma separated")
    p.add_argument("--variants", type=_str_list)
    _plan_flags(p)
    p.add_argument("--ell-sym-grid", dest="ell_sym_grid", type=_num_list)
    p.add_argument("--ce-ratio", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--ell-sym", dest="ell_sym", type=int)
    p.add_argument("--trials", type=int, help="simulated trials per point (m and s axes)")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("codec-bench", parents=[common], help="measured decode-failure table")
    p.add_argument("--blocks", type=_num_list)
    p.add_argument("--excess", type=_num_list, help="extra symbols beyond the block count")
    p.add_argument("--symbol-len", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("rerun", help="regenerate a CSV from its embedded parameters")
    p.add_argument("csv", help="CSV written by this tool")
    p.add_argument("--out")
    return parser


def _flags(ns: argparse.Namespace) -> dict:
    skip = {"command", "config", "out", "payload_file"}
    return {k: v for k, v in vars(ns).items() if k not in skip and v is not None}


def spec_from_args(ns: argparse.Namespace) -> tuple[str, dict]:
    if ns.command == "rerun":
        return read_embedded_spec(Path(ns.csv).read_text())
    defaults = COMMANDS[ns.command].defaults
    file_layer = load_config(ns.config, ns.command) if ns.config else {}
    flags = _flags(ns)
    if getattr(ns, "payload_file", None):
        flags["payload_hex"] = Path(ns.payload_file).read_bytes().hex()
    # censor inputs from the file first, then flags
    layers = []
    for layer in (file_layer, flags):
        layers.append(normalize_censors(layer, layer.get("n") or defaults.get("n", 0)))
    return ns.command, resolve(defaults, *layers)


def _destination(ns: argparse.Namespace, command: str) -> Path | None:
    if ns.out:
        return Path(ns.out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env) / f"{command}.csv"
    return None


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        command, spec = spec_from_args(ns)
        text, warnings = render(command, spec)
    except (SpecError, analysis.Infeasible, ValueError, KeyError, TypeError) as exc:
        kind = type(exc).__name__
        print(f"sedna {ns.command}: {kind}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"sedna {ns.command}: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for w in warnings:
        print(f"sedna {command}: skipped {w}", file=sys.stderr)
    dest = _destination(ns, command)
    try:
        if dest is None:
            sys.stdout.write(text)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text)
            print(f"wrote {dest}", file=sys.stderr)
    except OSError as exc:
        print(f"sedna {command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
