"""Command-line interface: check, run, and corpus verification.

Exit codes: check 0 ok / 1 type error / 2 parse error; run additionally
3 deadlock / 4 out of fuel. Output goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .anf import anf_transform
from .ast import Config, CProc
from .kinding import KindError
from .normalize import conv
from .parser import ParseError, Program, parse_program, parse_type
from .pretty import pretty, pretty_ctx
from .runtime import Machine, iter_procs
from .typing import ExprTyping, TypecheckError, type_config, type_expr

DEFAULT_FUEL = 100_000


@dataclasses.dataclass
class Diagnostic:
    severity: str
    code: str
    message: str
    file: str | None = None
    line: int | None = None
    col: int | None = None
    expected: str | None = None
    found: str | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    def render(self) -> str:
        loc = ""
        if self.file is not None and self.line is not None:
            loc = f"{self.file}:{self.line}:{self.col}: "
        out = f"{loc}{self.severity}[{self.code}]: {self.message}"
        if self.expected is not None:
            out += f"\n  expected: {self.expected}"
        if self.found is not None:
            out += f"\n  found:    {self.found}"
        return out


def _diag_from_error(e: Exception) -> Diagnostic:
    if isinstance(e, ParseError):
        return Diagnostic(
            "error", "parse", e.message,
            file=e.span.file, line=e.span.line, col=e.span.col,
        )
    if isinstance(e, TypecheckError):
        d = Diagnostic("error", e.rule, e.message, expected=e.expected, found=e.found)
        if e.span:
            d.file, d.line, d.col = e.span.file, e.span.line, e.span.col
        return d
    if isinstance(e, KindError):
        d = Diagnostic("error", e.rule, e.message, expected=e.expected, found=e.found)
        if e.span:
            d.file, d.line, d.col = e.span.file, e.span.line, e.span.col
        return d
    return Diagnostic("error", "internal", str(e))


def _emit(diag: Diagnostic, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(diag.to_json()), file=sys.stderr)
    else:
        print(diag.render(), file=sys.stderr)


def _load(path: str) -> Program:
    src = Path(path).read_text(encoding="utf-8")
    prog = parse_program(src, filename=path)
    if prog.expr is not None:
        prog = Program(config=None, expr=anf_transform(prog.expr), filename=prog.filename)
    return prog


def _check_program(prog: Program) -> ExprTyping | None:
    """Type-check; returns the expression typing for expression programs."""
    if prog.expr is not None:
        return type_expr((), parse_type("."), prog.expr)
    type_config((), parse_type("."), prog.config)
    return None


def cmd_check(args: argparse.Namespace) -> int:
    fmt = args.format
    try:
        prog = _load(args.file)
    except ParseError as e:
        _emit(_diag_from_error(e), fmt)
        return 2
    try:
        typing = _check_program(prog)
    except (TypecheckError, KindError) as e:
        _emit(_diag_from_error(e), fmt)
        return 1
    if typing is None:
        if fmt == "json":
            print(json.dumps({"ok": True, "kind": "config"}))
        else:
            print("config: ok")
        return 0
    if fmt == "json":
        print(
            json.dumps(
                {
                    "ok": True,
                    "kind": "expr",
                    "type": pretty(typing.ty),
                    "post": pretty(typing.post_state),
                    "ex": pretty_ctx(typing.exctx),
                }
            )
        )
    else:
        print(f"ex: {pretty_ctx(typing.exctx) or '.'}")
        print(f"post: {pretty(typing.post_state)}")
        print(f"type: {pretty(typing.ty)}")
    return 0


def _recheck(cfg: Config) -> None:
    type_config((), parse_type("."), cfg)


def cmd_run(args: argparse.Namespace) -> int:
    fmt = "pretty"
    try:
        prog = _load(args.file)
    except ParseError as e:
        _emit(_diag_from_error(e), fmt)
        return 2
    if not args.no_check:
        try:
            _check_program(prog)
        except (TypecheckError, KindError) as e:
            _emit(_diag_from_error(e), fmt)
            print("refusing to run an ill-typed program (use --no-check to override)", file=sys.stderr)
            return 1
    cfg = prog.config if prog.config is not None else CProc(prog.expr)
    fuel = args.max_steps if args.max_steps is not None else int(
        os.environ.get("PVGR_MAX_STEPS", DEFAULT_FUEL)
    )
    machine = Machine(cfg, max_steps=fuel, seed=args.seed)
    while True:
        if args.check:
            try:
                _recheck(machine.config)
            except (TypecheckError, KindError) as e:
                _emit(_diag_from_error(e), fmt)
                print("subject reduction violated", file=sys.stderr)
                return 1
        out = machine.step()
        if args.trace and machine.trace and out.kind == "stepped":
            print(machine.trace[-1])
        if out.kind != "stepped":
            break
    if args.check:
        try:
            _recheck(machine.config)
        except (TypecheckError, KindError) as e:
            _emit(_diag_from_error(e), fmt)
            print("subject reduction violated", file=sys.stderr)
            return 1
    if out.kind == "final":
        values = [pretty(e) for _, e in iter_procs(machine.config)]
        print(f"final after {machine.steps} steps: " + " | ".join(values))
        return 0
    if out.kind == "deadlock":
        print(f"deadlock after {machine.steps} steps: {out.report}")
        return 3
    print(f"out of fuel after {machine.steps} steps")
    return 4


def cmd_corpus(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    files = sorted(root.glob("*.pvgr"))
    if not files:
        print(f"warning: no .pvgr files in {root}", file=sys.stderr)
        return 0
    failures = 0
    rows = []
    for f in files:
        expected_file = f.with_suffix(f.suffix + ".expected")
        if not expected_file.exists():
            rows.append((f.name, "skip", "no .expected sidecar"))
            continue
        want = expected_file.read_text(encoding="utf-8").strip()
        status, detail = _corpus_one(f, want)
        rows.append((f.name, status, detail))
        if status == "FAIL":
            failures += 1
    width = max(len(r[0]) for r in rows) + 2
    for name, status, detail in rows:
        print(f"{name:<{width}}{status:<6}{detail}")
    return 1 if failures else 0


def _corpus_one(path: Path, want: str) -> tuple[str, str]:
    try:
        prog = _load(str(path))
    except ParseError as e:
        return "FAIL", f"parse error: {e}"
    if want.startswith("type:"):
        expected_src = want[len("type:") :].strip()
        try:
            typing = _check_program(prog)
        except (TypecheckError, KindError) as e:
            return "FAIL", f"type error: {e}"
        if typing is None:
            return "FAIL", "expected a type but file is a configuration"
        expected = parse_type(expected_src, open_world=False)
        if conv(typing.ty, expected):
            return "ok", pretty(typing.ty)
        return "FAIL", f"type mismatch: got {pretty(typing.ty)}"
    if want.startswith("outcome:"):
        expected_outcome = want[len("outcome:") :].strip()
        try:
            _check_program(prog)
        except (TypecheckError, KindError) as e:
            return "FAIL", f"type error: {e}"
        cfg = prog.config if prog.config is not None else CProc(prog.expr)
        out = Machine(cfg, max_steps=DEFAULT_FUEL).run()
        got = {"final": "final", "deadlock": "deadlock", "out-of-fuel": "out-of-fuel"}[out.kind]
        if got == expected_outcome:
            return "ok", got
        return "FAIL", f"outcome mismatch: got {got}"
    return "FAIL", f"bad sidecar: {want[:40]!r}"


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="pvgr", description="pvgr checker and interpreter")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_check = sub.add_parser("check", help="type-check a .pvgr file")
    p_check.add_argument("file")
    p_check.add_argument("--format", choices=["pretty", "json"], default="pretty")
    p_check.set_defaults(fn=cmd_check)

    p_run = sub.add_parser("run", help="run a .pvgr file")
    p_run.add_argument("file")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--max-steps", type=int, default=None)
    p_run.add_argument("--trace", action="store_true")
    p_run.add_argument("--check", action="store_true", help="re-typecheck after every step")
    p_run.add_argument("--no-check", action="store_true", help="skip the initial type check")
    p_run.set_defaults(fn=cmd_run)

    p_corpus = sub.add_parser("corpus", help="verify a corpus directory against sidecars")
    p_corpus.add_argument("dir")
    p_corpus.set_defaults(fn=cmd_corpus)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
