"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when a verification fails, 2 on
input errors (bad config, bad flags, unwritable output).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError
from .experiments import DEMOS, Settings, parse_config, run_all, spectrum_rows

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _plain(x: Any) -> Any:
    """Turn a report into JSON-safe builtins; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _plain(x.real), "im": _plain(x.imag)}
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if x is None or isinstance(x, str):
        return x
    return str(x)


def dumps(doc: Any) -> str:
    # float repr is the shortest round-trip form, so output is byte-stable
    return json.dumps(_plain(doc), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _settings(args) -> Settings:
    return Settings(tol_alg=args.tol_alg, tol_spec=args.tol_spec, hbar=args.hbar)


def _load(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _emit_reports(doc: Any, args) -> int:
    experiments = parse_config(doc, _settings(args))
    reports = run_all(experiments)
    ok = all(r.passed for r in reports)
    out = {
        "tool": "tqslab",
        "version": __version__,
        "pass": ok,
        "reports": [r.to_dict(timing=args.timing) for r in reports],
    }
    _write(dumps(out), args.out)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.kind} {r.name}", file=sys.stderr)
        for c in r.checks:
            if not c.passed:
                print(f"  {c.name} = {c.value!r} (needs {c.relation} {c.tolerance!r})", file=sys.stderr)
        for note in r.notes:
            print(f"  note: {note}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args) -> int:
    return _emit_reports(_load(args.config), args)


def cmd_demo(args) -> int:
    return _emit_reports(DEMOS[args.kind], args)


def cmd_spectrum(args) -> int:
    experiments = parse_config(_load(args.config), _settings(args))
    if len(experiments) != 1:
        raise ConfigError("spectrum expects a config with exactly one experiment")
    rows = spectrum_rows(experiments[0])
    text = "".join(f"{e!r},{m}\n" for e, m in rows)
    _write(text, args.csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-alg", type=float, default=None, help="algebraic tolerance (default 1e-10)")
    common.add_argument("--tol-spec", type=float, default=None, help="spectral tolerance (default 1e-8)")
    common.add_argument("--hbar", type=float, default=None, help="override hbar for every experiment")
    common.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    common.add_argument("--timing", action="store_true", help="include wall-clock durations in the report")

    p = argparse.ArgumentParser(prog="tqslab", description="Verify translational quantum system constructions.")
    p.add_argument("--version", action="version", version=f"tqslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run the experiments in a JSON config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("demo", parents=[common], help="run built-in showcase configs")
    d.add_argument("kind", choices=sorted(DEMOS))
    d.set_defaults(func=cmd_demo)

    s = sub.add_parser("spectrum", parents=[common], help="write eigenvalue,multiplicity CSV")
    s.add_argument("config")
    s.add_argument("--csv", required=True, help="output CSV path ('-' for stdout)")
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    for flag in ("tol_alg", "tol_spec", "hbar"):
        v = getattr(args, flag, None)
        if v is not None and not (math.isfinite(v) and v > 0):
            print(f"tqslab: error: --{flag.replace('_', '-')} must be a positive number", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tqslab: config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"tqslab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # keep the exit-code contract even on internal errors
        print(f"tqslab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
