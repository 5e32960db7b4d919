"""Abstract syntax for the pvgr calculus.

A single Type tree covers expression types, session types, shapes, domains
and states; kinding is what tells the categories apart. Binders carry
globally unique names (the hygiene invariant), established by the parser
and re-established by substitution, so scope handling never needs capture
checks.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Union


# ---------------------------------------------------------------------------
# names, spans
# ---------------------------------------------------------------------------

_uid_counter = itertools.count(1)


@dataclass(frozen=True)
class Name:
    """Identifier with a globally unique id; `text` is for printing only."""

    text: str
    uid: int

    def __repr__(self) -> str:
        return f"{self.text}#{self.uid}"


def fresh_name(text: str) -> Name:
    return Name(text, next(_uid_counter))


@dataclass(frozen=True)
class Span:
    file: str
    start: int
    end: int
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


@dataclass(frozen=True)
class Node:
    span: Span | None = field(default=None, compare=False, repr=False, kw_only=True)


class Label(IntEnum):
    L1 = 1
    L2 = 2

    def other(self) -> "Label":
        return Label.L2 if self is Label.L1 else Label.L1


# ---------------------------------------------------------------------------
# kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kind(Node):
    pass


@dataclass(frozen=True)
class KType(Kind):
    pass


@dataclass(frozen=True)
class KSession(Kind):
    pass


@dataclass(frozen=True)
class KState(Kind):
    pass


@dataclass(frozen=True)
class KShape(Kind):
    pass


@dataclass(frozen=True)
class KDom(Kind):
    """Domain kind indexed by a shape (a Type of kind Shape)."""

    shape: "Type"


@dataclass(frozen=True)
class KArrow(Kind):
    src: Kind
    dst: Kind


# ---------------------------------------------------------------------------
# types (one tree for T / S / shapes / domains / states)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Type(Node):
    pass


@dataclass(frozen=True)
class TVar(Type):
    name: Name


@dataclass(frozen=True)
class TApp(Type):
    fn: Type
    arg: Type


@dataclass(frozen=True)
class TLam(Type):
    """Type-level function over a domain: \\a:shape. body."""

    binder: Name
    shape: Type
    body: Type


@dataclass(frozen=True)
class TAll(Type):
    """Constrained universal: forall a:kind[cstr]. body."""

    binder: Name
    kind: Kind
    cstr: tuple["BDisjoint", ...]
    body: Type


@dataclass(frozen=True)
class TArr(Type):
    """Function type [pre; arg -> ex exctx. post; res]."""

    pre: Type
    arg: Type
    exctx: tuple["Binding", ...]
    post: Type
    res: Type


@dataclass(frozen=True)
class TChan(Type):
    dom: Type


@dataclass(frozen=True)
class TAccess(Type):
    """Access point type AP(S)."""

    ses: Type


@dataclass(frozen=True)
class TUnit(Type):
    pass


@dataclass(frozen=True)
class TPair(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class TSend(Type):
    """Session !{binder:Dom(shape)}(state; payload).cont.

    binder scopes over state and payload, not over cont.
    """

    binder: Name
    shape: Type
    state: Type
    payload: Type
    cont: Type


@dataclass(frozen=True)
class TRecv(Type):
    binder: Name
    shape: Type
    state: Type
    payload: Type
    cont: Type


@dataclass(frozen=True)
class TChoice(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class TBranch(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class TEnd(Type):
    pass


@dataclass(frozen=True)
class TDual(Type):
    ses: Type


@dataclass(frozen=True)
class ShZero(Type):
    pass


@dataclass(frozen=True)
class ShOne(Type):
    pass


@dataclass(frozen=True)
class ShPair(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class DomZero(Type):
    pass


@dataclass(frozen=True)
class DomMerge(Type):
    left: Type
    right: Type


@dataclass(frozen=True)
class DomProj(Type):
    label: Label
    dom: Type


@dataclass(frozen=True)
class StEmpty(Type):
    pass


@dataclass(frozen=True)
class StBind(Type):
    dom: Type
    ses: Type


@dataclass(frozen=True)
class StMerge(Type):
    left: Type
    right: Type


# ---------------------------------------------------------------------------
# environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Binding(Node):
    pass


@dataclass(frozen=True)
class BTVar(Binding):
    name: Name
    kind: Kind


@dataclass(frozen=True)
class BVal(Binding):
    name: Name
    type: Type


@dataclass(frozen=True)
class BDisjoint(Binding):
    left: Type
    right: Type


Ctx = tuple[Binding, ...]
ConstraintSet = tuple[BDisjoint, ...]


# ---------------------------------------------------------------------------
# expressions and values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr(Node):
    pass


@dataclass(frozen=True)
class Value(Node):
    pass


@dataclass(frozen=True)
class EVal(Expr):
    value: Value


@dataclass(frozen=True)
class ELet(Expr):
    """let [exnames] binder = head in body; exnames (optional sugar) name
    the leading existential binders of the header's typing package so the
    body can mention them in type applications."""

    binder: Name
    head: Expr
    body: Expr
    exnames: tuple[Name, ...] = ()


@dataclass(frozen=True)
class EApp(Expr):
    fn: Value
    arg: Value


@dataclass(frozen=True)
class EProj(Expr):
    label: Label
    value: Value


@dataclass(frozen=True)
class ETApp(Expr):
    value: Value
    type: Type


@dataclass(frozen=True)
class EFork(Expr):
    value: Value


@dataclass(frozen=True)
class ENew(Expr):
    ses: Type


@dataclass(frozen=True)
class EAccept(Expr):
    value: Value


@dataclass(frozen=True)
class ERequest(Expr):
    value: Value


@dataclass(frozen=True)
class ESend(Expr):
    payload: Value
    chan: Value


@dataclass(frozen=True)
class ERecv(Expr):
    value: Value


@dataclass(frozen=True)
class ESelect(Expr):
    label: Label
    value: Value


@dataclass(frozen=True)
class ECase(Expr):
    value: Value
    left: Expr
    right: Expr


@dataclass(frozen=True)
class EClose(Expr):
    value: Value


@dataclass(frozen=True)
class VVar(Value):
    name: Name


@dataclass(frozen=True)
class VChan(Value):
    dom: Type


@dataclass(frozen=True)
class VUnit(Value):
    pass


@dataclass(frozen=True)
class VPair(Value):
    left: Value
    right: Value


@dataclass(frozen=True)
class VAbs(Value):
    """\\[pre](binder:argty). body"""

    pre: Type
    binder: Name
    argty: Type
    body: Expr


@dataclass(frozen=True)
class VTAbs(Value):
    """/\\binder:kind[cstr]. body (body restricted to a syntactic value)."""

    binder: Name
    kind: Kind
    cstr: tuple[BDisjoint, ...]
    body: Value


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Config(Node):
    pass


@dataclass(frozen=True)
class CProc(Config):
    expr: Expr


@dataclass(frozen=True)
class CPar(Config):
    left: Config
    right: Config


@dataclass(frozen=True)
class CNuChan(Config):
    """Channel binder over both ends; end1 carries `ses`, end2 its dual.

    `closed` marks a channel whose close rendezvous already happened: the
    binder stays (dead references may remain) but no longer contributes
    state.
    """

    end1: Name
    end2: Name
    ses: Type
    body: Config
    closed: bool = False


@dataclass(frozen=True)
class CNuAccess(Config):
    binder: Name
    ses: Type
    body: Config


Tree = Union[Kind, Type, Binding, Expr, Value, Config]
Subst = dict[int, Union[Type, Value]]


# ---------------------------------------------------------------------------
# generic traversal helpers
# ---------------------------------------------------------------------------


def _node_fields(t: Tree) -> list[tuple[str, object]]:
    return [(f.name, getattr(t, f.name)) for f in dataclasses.fields(t) if f.name != "span"]


def children(t: Tree) -> Iterator[Tree]:
    """All direct subtrees, including bindings inside tuples."""
    for _, v in _node_fields(t):
        if isinstance(v, Node):
            yield v
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, Node):
                    yield x


def size(t: Tree) -> int:
    return 1 + sum(size(c) for c in children(t))


def _rebuild(t: Tree, go) -> Tree:
    changes = {}
    for name, v in _node_fields(t):
        if isinstance(v, Node):
            w = go(v)
            if w is not v:
                changes[name] = w
        elif isinstance(v, tuple) and any(isinstance(x, Node) for x in v):
            w = tuple(go(x) if isinstance(x, Node) else x for x in v)
            if w != v:
                changes[name] = w
    return dataclasses.replace(t, **changes) if changes else t


# ---------------------------------------------------------------------------
# free variables
# ---------------------------------------------------------------------------


def free_vars(t: Tree) -> set[Name]:
    """Identifiers with no enclosing binder in t (type and value vars alike)."""
    out: set[Name] = set()

    def go(t: Tree, bound: frozenset[int]) -> None:
        match t:
            case TVar(name) | VVar(name):
                if name.uid not in bound:
                    out.add(name)
            case TLam(binder, shape, body):
                go(shape, bound)
                go(body, bound | {binder.uid})
            case TAll(binder, kind, cstr, body):
                go(kind, bound)
                inner = bound | {binder.uid}
                for c in cstr:
                    go(c, inner)
                go(body, inner)
            case TArr(pre, arg, exctx, post, res):
                go(pre, bound)
                go(arg, bound)
                inner = bound
                for b in exctx:
                    go(b, inner)
                    if isinstance(b, (BTVar, BVal)):
                        inner = inner | {b.name.uid}
                go(post, inner)
                go(res, inner)
            case TSend(binder, shape, state, payload, cont) | TRecv(
                binder, shape, state, payload, cont
            ):
                go(shape, bound)
                inner = bound | {binder.uid}
                go(state, inner)
                go(payload, inner)
                go(cont, bound)
            case ELet(binder, head, body, exnames):
                go(head, bound)
                go(body, bound | {binder.uid} | {n.uid for n in exnames})
            case VAbs(pre, binder, argty, body):
                go(pre, bound)
                go(argty, bound)
                go(body, bound | {binder.uid})
            case VTAbs(binder, kind, cstr, body):
                go(kind, bound)
                inner = bound | {binder.uid}
                for c in cstr:
                    go(c, inner)
                go(body, inner)
            case CNuChan(end1, end2, ses, body):
                go(ses, bound)
                go(body, bound | {end1.uid, end2.uid})
            case CNuAccess(binder, ses, body):
                go(ses, bound)
                go(body, bound | {binder.uid})
            case BTVar(name, kind):
                go(kind, bound)
            case BVal(name, type_):
                go(type_, bound)
            case _:
                for c in children(t):
                    go(c, bound)

    go(t, frozenset())
    return out


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------


def subst(s: Subst, t: Tree) -> Tree:
    """Simultaneous capture-avoiding substitution.

    Every binder along the way is freshened, and so are binders inside
    substituted payloads, which re-establishes the hygiene invariant even
    when one payload is inserted at several sites.
    """

    def payload(v: Union[Type, Value]) -> Union[Type, Value]:
        # freshen the payload's own binders per insertion site
        return subst({}, v) if _has_binders(v) else v

    def go(t: Tree, s: Subst) -> Tree:
        match t:
            case TVar(name):
                if name.uid in s:
                    return payload(s[name.uid])
                return t
            case VVar(name):
                if name.uid in s:
                    return payload(s[name.uid])
                return t
            case TLam(binder, shape, body):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: TVar(b2)}
                return TLam(b2, go(shape, s), go(body, s2), span=t.span)
            case TAll(binder, kind, cstr, body):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: TVar(b2)}
                return TAll(
                    b2,
                    go(kind, s),
                    tuple(go(c, s2) for c in cstr),
                    go(body, s2),
                    span=t.span,
                )
            case TArr(pre, arg, exctx, post, res):
                s2 = dict(s)
                ex2 = []
                for b in exctx:
                    if isinstance(b, BTVar):
                        nb = fresh_name(b.name.text)
                        ex2.append(BTVar(nb, go(b.kind, s2)))
                        s2[b.name.uid] = TVar(nb)
                    elif isinstance(b, BVal):
                        nb = fresh_name(b.name.text)
                        ex2.append(BVal(nb, go(b.type, s2)))
                        s2[b.name.uid] = VVar(nb)
                    else:
                        ex2.append(go(b, s2))
                return TArr(
                    go(pre, s), go(arg, s), tuple(ex2), go(post, s2), go(res, s2), span=t.span
                )
            case TSend(binder, shape, state, pay, cont):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: TVar(b2)}
                return TSend(b2, go(shape, s), go(state, s2), go(pay, s2), go(cont, s), span=t.span)
            case TRecv(binder, shape, state, pay, cont):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: TVar(b2)}
                return TRecv(b2, go(shape, s), go(state, s2), go(pay, s2), go(cont, s), span=t.span)
            case ELet(binder, head, body, exnames):
                b2 = fresh_name(binder.text)
                ex2 = tuple(fresh_name(n.text) for n in exnames)
                s2 = {**s, binder.uid: VVar(b2)}
                for old, new in zip(exnames, ex2):
                    s2[old.uid] = TVar(new)
                return ELet(b2, go(head, s), go(body, s2), exnames=ex2, span=t.span)
            case VAbs(pre, binder, argty, body):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: VVar(b2)}
                return VAbs(go(pre, s), b2, go(argty, s), go(body, s2), span=t.span)
            case VTAbs(binder, kind, cstr, body):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: TVar(b2)}
                return VTAbs(
                    b2, go(kind, s), tuple(go(c, s2) for c in cstr), go(body, s2), span=t.span
                )
            case CNuChan(end1, end2, ses, body, closed):
                e1, e2 = fresh_name(end1.text), fresh_name(end2.text)
                s2 = {**s, end1.uid: TVar(e1), end2.uid: TVar(e2)}
                return CNuChan(e1, e2, go(ses, s), go(body, s2), closed, span=t.span)
            case CNuAccess(binder, ses, body):
                b2 = fresh_name(binder.text)
                s2 = {**s, binder.uid: VVar(b2)}
                return CNuAccess(b2, go(ses, s), go(body, s2), span=t.span)
            case _:
                return _rebuild(t, lambda c: go(c, s))

    return go(t, s)


_BINDER_NODES = (TLam, TAll, TArr, TSend, TRecv, ELet, VAbs, VTAbs, CNuChan, CNuAccess)


def _has_binders(t: Tree) -> bool:
    if isinstance(t, TArr):
        return True
    if isinstance(t, _BINDER_NODES):
        return True
    return any(_has_binders(c) for c in children(t))


def subst1(name: Name, replacement: Union[Type, Value], t: Tree) -> Tree:
    return subst({name.uid: replacement}, t)


def rename_binders(t: Tree) -> Tree:
    """Freshen every binder in t (used when duplicating subterms)."""
    return subst({}, t)


# ---------------------------------------------------------------------------
# canonical alpha-renaming
# ---------------------------------------------------------------------------


def canonicalize(t: Tree) -> Tree:
    """Renumber binders in deterministic traversal order.

    Alpha-equivalent trees become structurally identical; free names are
    left untouched. Canonical names live in a negative uid space so they
    cannot collide with fresh ones.
    """
    counter = itertools.count()

    def cname() -> Name:
        i = next(counter)
        return Name(f"?{i}", -1 - i)

    def go(t: Tree, env: dict[int, Name]) -> Tree:
        match t:
            case TVar(name):
                return TVar(env.get(name.uid, name), span=t.span)
            case VVar(name):
                return VVar(env.get(name.uid, name), span=t.span)
            case TLam(binder, shape, body):
                shape2 = go(shape, env)
                b2 = cname()
                return TLam(b2, shape2, go(body, {**env, binder.uid: b2}), span=t.span)
            case TAll(binder, kind, cstr, body):
                kind2 = go(kind, env)
                b2 = cname()
                env2 = {**env, binder.uid: b2}
                return TAll(
                    b2, kind2, tuple(go(c, env2) for c in cstr), go(body, env2), span=t.span
                )
            case TArr(pre, arg, exctx, post, res):
                pre2, arg2 = go(pre, env), go(arg, env)
                env2 = dict(env)
                ex2 = []
                for b in exctx:
                    if isinstance(b, (BTVar, BVal)):
                        nb = cname()
                        if isinstance(b, BTVar):
                            ex2.append(BTVar(nb, go(b.kind, env2)))
                        else:
                            ex2.append(BVal(nb, go(b.type, env2)))
                        env2[b.name.uid] = nb
                    else:
                        ex2.append(go(b, env2))
                return TArr(pre2, arg2, tuple(ex2), go(post, env2), go(res, env2), span=t.span)
            case TSend(binder, shape, state, payload, cont):
                shape2 = go(shape, env)
                b2 = cname()
                env2 = {**env, binder.uid: b2}
                return TSend(b2, shape2, go(state, env2), go(payload, env2), go(cont, env), span=t.span)
            case TRecv(binder, shape, state, payload, cont):
                shape2 = go(shape, env)
                b2 = cname()
                env2 = {**env, binder.uid: b2}
                return TRecv(b2, shape2, go(state, env2), go(payload, env2), go(cont, env), span=t.span)
            case ELet(binder, head, body, exnames):
                head2 = go(head, env)
                b2 = cname()
                ex2 = tuple(cname() for _ in exnames)
                env2 = {**env, binder.uid: b2}
                for old, new in zip(exnames, ex2):
                    env2[old.uid] = new
                return ELet(b2, head2, go(body, env2), exnames=ex2, span=t.span)
            case VAbs(pre, binder, argty, body):
                pre2, argty2 = go(pre, env), go(argty, env)
                b2 = cname()
                return VAbs(pre2, b2, argty2, go(body, {**env, binder.uid: b2}), span=t.span)
            case VTAbs(binder, kind, cstr, body):
                kind2 = go(kind, env)
                b2 = cname()
                env2 = {**env, binder.uid: b2}
                return VTAbs(b2, kind2, tuple(go(c, env2) for c in cstr), go(body, env2), span=t.span)
            case CNuChan(end1, end2, ses, body, closed):
                ses2 = go(ses, env)
                e1, e2 = cname(), cname()
                env2 = {**env, end1.uid: e1, end2.uid: e2}
                return CNuChan(e1, e2, ses2, go(body, env2), closed, span=t.span)
            case CNuAccess(binder, ses, body):
                ses2 = go(ses, env)
                b2 = cname()
                return CNuAccess(b2, ses2, go(body, {**env, binder.uid: b2}), span=t.span)
            case _:
                return _rebuild(t, lambda c: go(c, env))

    return go(t, {})


def alpha_equiv_tree(a: Tree, b: Tree) -> bool:
    """Structural equality up to renaming of bound names."""
    return canonicalize(a) == canonicalize(b)


# states as lists of atoms ---------------------------------------------------


def state_atoms(st: Type) -> list[Type]:
    """Flatten a state into bindings / opaque atoms (vars, stuck applications)."""
    match st:
        case StEmpty():
            return []
        case StMerge(l, r):
            return state_atoms(l) + state_atoms(r)
        case _:
            return [st]


def state_of_atoms(atoms: list[Type]) -> Type:
    out: Type = StEmpty()
    for a in atoms:
        out = a if isinstance(out, StEmpty) else StMerge(out, a)
    return out
