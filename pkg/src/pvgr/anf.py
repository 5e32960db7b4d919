"""Strict A-normal form: every let body is another let or a value.

The parser may emit nested let headers (and `v [T] [T']` chains desugar
into lets), so the checker runs anf_transform first. flatten_lets is the
binder-free part, used by the interpreter to keep strict form closed
under case-branch substitution.
"""

from __future__ import annotations

from .ast import (
    ECase,
    ELet,
    EVal,
    Expr,
    VAbs,
    VPair,
    VTAbs,
    Value,
    fresh_name,
    VVar,
)
import dataclasses


def is_strict_anf(e: Expr) -> bool:
    """Spec predicate: let bodies are lets or values; headers are not lets."""

    def chain(e: Expr) -> bool:
        if isinstance(e, ELet):
            return not isinstance(e.head, ELet) and header(e.head) and body_ok(e.body)
        return header(e)

    def body_ok(e: Expr) -> bool:
        if isinstance(e, ELet):
            return chain(e)
        return isinstance(e, EVal) and value_ok(e.value)

    def header(e: Expr) -> bool:
        if isinstance(e, ELet):
            return False
        if isinstance(e, ECase):
            return chain(e.left) and chain(e.right) and value_ok(e.value)
        return all(
            value_ok(v) for v in _value_fields(e)
        )

    def value_ok(v: Value) -> bool:
        match v:
            case VAbs(_, _, _, body):
                return chain(body)
            case VTAbs(_, _, _, body):
                return value_ok(body)
            case VPair(l, r):
                return value_ok(l) and value_ok(r)
            case _:
                return True

    return chain(e)


def _value_fields(e: Expr) -> list[Value]:
    return [v for f in dataclasses.fields(e) if isinstance(v := getattr(e, f.name), Value)]


def flatten_lets(e: Expr) -> Expr:
    """Reassociate let x = (let y = h in b) in e2 into let y = h in let x = b in e2.

    Pure reassociation: preserves evaluation order and introduces no names.
    """
    if isinstance(e, ELet):
        head = flatten_lets(e.head)
        body = flatten_lets(e.body)
        if isinstance(head, ELet):
            inner = flatten_lets(ELet(e.binder, head.body, body, exnames=e.exnames))
            return ELet(head.binder, head.head, inner, exnames=head.exnames)
        return ELet(e.binder, head, body, exnames=e.exnames)
    return e


def anf_transform(e: Expr) -> Expr:
    """Strict-ANF form of e, preserving left-to-right evaluation order."""

    def chainify(e: Expr) -> Expr:
        e = go(e)
        e = flatten_lets(e)
        # make every let body end in a let or a value
        if isinstance(e, ELet):
            body = chainify(e.body)
            if not isinstance(body, (ELet, EVal)):
                t = fresh_name("_a")
                body = ELet(t, body, EVal(VVar(t)))
            return ELet(e.binder, e.head, body, exnames=e.exnames, span=e.span)
        return e

    def go(e: Expr) -> Expr:
        match e:
            case ELet(binder, head, body, exnames):
                return ELet(binder, chainify_header(head), chainify(body), exnames=exnames, span=e.span)
            case ECase(v, l, r):
                return ECase(go_value(v), chainify(l), chainify(r), span=e.span)
            case EVal(v):
                return EVal(go_value(v), span=e.span)
            case _:
                changes = {}
                for f in dataclasses.fields(e):
                    x = getattr(e, f.name)
                    if isinstance(x, Value):
                        changes[f.name] = go_value(x)
                return dataclasses.replace(e, **changes) if changes else e

    def chainify_header(h: Expr) -> Expr:
        # headers must not be lets themselves; flatten_lets at the outer
        # level lifts them, so here we only transform subparts
        return go(h)

    def go_value(v: Value) -> Value:
        match v:
            case VAbs(pre, binder, argty, body):
                return VAbs(pre, binder, argty, chainify(body), span=v.span)
            case VTAbs(binder, kind, cstr, body):
                return VTAbs(binder, kind, cstr, go_value(body), span=v.span)
            case VPair(l, r):
                return VPair(go_value(l), go_value(r), span=v.span)
            case _:
                return v

    return chainify(e)
