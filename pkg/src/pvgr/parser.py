"""Concrete ASCII syntax for pvgr programs and types.

The grammar is documented in docs/syntax.md. Binders receive globally
unique names at parse time; the parser accepts non-strict let nesting
(anf.anf_transform restores strict form before checking).
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    BDisjoint,
    Binding,
    BTVar,
    Config,
    CNuAccess,
    CNuChan,
    CPar,
    CProc,
    DomMerge,
    DomProj,
    DomZero,
    EAccept,
    EApp,
    ECase,
    EClose,
    EFork,
    ELet,
    ENew,
    EProj,
    ERecv,
    ERequest,
    ESelect,
    ESend,
    ETApp,
    EVal,
    Expr,
    KArrow,
    KDom,
    KSession,
    KShape,
    KState,
    KType,
    Kind,
    Label,
    Name,
    ShOne,
    ShZero,
    Span,
    StBind,
    StEmpty,
    StMerge,
    TAccess,
    TAll,
    TApp,
    TArr,
    TBranch,
    TChan,
    TChoice,
    TDual,
    TEnd,
    TLam,
    TPair,
    TRecv,
    TSend,
    TUnit,
    TVar,
    Type,
    VAbs,
    VChan,
    VPair,
    VTAbs,
    VUnit,
    VVar,
    Value,
    fresh_name,
)

KEYWORDS = {
    "let", "in", "fork", "new", "accept", "request", "send", "recv", "select",
    "case", "close", "proj1", "proj2", "chan", "dual", "End", "Unit", "Int",
    "Type", "Session", "State", "Shape", "Dom", "AP", "forall", "ex", "nu",
    "nuap", "pi1", "pi2", "Chan",
}

PUNCT = [
    "->", "/\\", "+c", "+b", "(", ")", "[", "]", "{", "}", "<", ">", ".", ",",
    ";", ":", "#", "*", "|", "=", "\\", "!", "?",
]


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: tuple[str, ...] = ()):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span
        self.expected = expected


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'num' | punct text | 'eof'
    text: str
    span: Span


def tokenize(src: str, filename: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)

    def span(start: int, end: int, sl: int, sc: int) -> Span:
        return Span(filename, start, end, sl, sc)

    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            text = src[i:j]
            kind = text if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, span(i, j, line, col)))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("num", src[i:j], span(i, j, line, col)))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if src.startswith(p, i):
                toks.append(Token(p, p, span(i, i + len(p), line, col)))
                col += len(p)
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", span(i, i + 1, line, col))
    toks.append(Token("eof", "", span(n, n, line, col)))
    return toks


@dataclass(frozen=True)
class Program:
    """Parsed top level: either a configuration or a single expression."""

    config: Config | None
    expr: Expr | None
    filename: str

    @property
    def is_config(self) -> bool:
        return self.config is not None


class _Scope:
    """Lexical scope mapping surface names to hygienic Names."""

    def __init__(self, open_world: bool):
        self.stack: list[dict[str, Name]] = [{}]
        self.free: dict[str, Name] = {}
        self.open_world = open_world

    def push(self) -> None:
        self.stack.append({})

    def pop(self) -> None:
        self.stack.pop()

    def bind(self, text: str) -> Name:
        nm = fresh_name(text)
        self.stack[-1][text] = nm
        return nm

    def lookup(self, text: str) -> Name | None:
        for frame in reversed(self.stack):
            if text in frame:
                return frame[text]
        if self.open_world:
            if text not in self.free:
                self.free[text] = fresh_name(text)
            return self.free[text]
        return None


class Parser:
    def __init__(self, src: str, filename: str = "<input>", open_world: bool = False):
        self.toks = tokenize(src, filename)
        self.pos = 0
        self.scope = _Scope(open_world)

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def eat(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(
                f"expected {kind!r}, found {t.text or 'end of input'!r}",
                t.span,
                expected=(kind,),
            )
        return self.next()

    def fail(self, msg: str, expected: tuple[str, ...] = ()) -> ParseError:
        t = self.peek()
        return ParseError(f"{msg}, found {t.text or 'end of input'!r}", t.span, expected)

    def ident(self) -> str:
        return self.eat("ident").text

    def name_use(self) -> Name:
        t = self.eat("ident")
        nm = self.scope.lookup(t.text)
        if nm is None:
            raise ParseError(f"unbound identifier {t.text!r}", t.span)
        return nm

    # -- kinds --------------------------------------------------------------

    def kind(self) -> Kind:
        k = self.kind_atom()
        if self.at("->"):
            self.next()
            return KArrow(k, self.kind())
        return k

    def kind_atom(self) -> Kind:
        t = self.peek()
        if t.kind == "Type":
            self.next()
            return KType()
        if t.kind == "Session":
            self.next()
            return KSession()
        if t.kind == "State":
            self.next()
            return KState()
        if t.kind == "Shape":
            self.next()
            return KShape()
        if t.kind == "Dom":
            self.next()
            self.eat("(")
            sh = self.type_()
            self.eat(")")
            return KDom(sh)
        if t.kind == "(":
            self.next()
            k = self.kind()
            self.eat(")")
            return k
        raise self.fail("expected a kind")

    def dom_kind_shape(self) -> Type:
        k = self.kind()
        if not isinstance(k, KDom):
            raise self.fail("session binder must have a Dom(..) kind")
        return k.shape

    # -- types ----------------------------------------------------------------

    def type_(self) -> Type:
        left = self.type_app()
        if self.at("+c"):
            self.next()
            return TChoice(left, self.type_app())
        if self.at("+b"):
            self.next()
            return TBranch(left, self.type_app())
        return left

    def type_app(self) -> Type:
        t = self.type_atom()
        # only domain-shaped atoms can follow by juxtaposition
        while self.peek().kind in {"ident", "(", "{", "pi1", "pi2"}:
            t = TApp(t, self.type_atom())
        return t

    def type_atom(self) -> Type:
        t = self.peek()
        sp = t.span
        match t.kind:
            case "End":
                self.next()
                return TEnd(span=sp)
            case "Unit" | "Int":
                self.next()
                return TUnit(span=sp)
            case "num":
                self.next()
                if t.text == "0":
                    return ShZero(span=sp)
                if t.text == "1":
                    return ShOne(span=sp)
                raise ParseError(f"unexpected number {t.text!r} in type", sp)
            case "dual":
                self.next()
                return TDual(self.type_atom(), span=sp)
            case "Chan":
                self.next()
                return TChan(self.type_atom(), span=sp)
            case "AP":
                self.next()
                self.eat("(")
                s = self.type_()
                self.eat(")")
                return TAccess(s, span=sp)
            case "pi1" | "pi2":
                self.next()
                lab = Label.L1 if t.kind == "pi1" else Label.L2
                return DomProj(lab, self.type_atom(), span=sp)
            case "forall":
                self.next()
                txt = self.ident()
                self.eat(":")
                k = self.kind()
                self.scope.push()
                binder = self.scope.bind(txt)
                cs = self.constraints()
                self.eat(".")
                body = self.type_()
                self.scope.pop()
                return TAll(binder, k, cs, body, span=sp)
            case "\\":
                self.next()
                txt = self.ident()
                self.eat(":")
                shape = self.type_()
                self.scope.push()
                binder = self.scope.bind(txt)
                self.eat(".")
                body = self.type_()
                self.scope.pop()
                return TLam(binder, shape, body, span=sp)
            case "!" | "?":
                return self.session_comm()
            case ".":
                self.next()
                return StEmpty(span=sp)
            case "{":
                return self.braces_type()
            case "[":
                return self.arr_type()
            case "(":
                self.next()
                inner = self.type_()
                if self.at(","):
                    self.next()
                    right = self.type_()
                    self.eat(")")
                    return DomMerge(inner, right, span=sp)
                if self.at("*"):
                    self.next()
                    right = self.type_()
                    self.eat(")")
                    # pair of types and pair of shapes share one surface form;
                    # kinding tells them apart, normalize folds ShPair into TPair
                    return TPair(inner, right, span=sp)
                self.eat(")")
                return inner
            case "ident":
                return TVar(self.name_use(), span=sp)
        raise self.fail("expected a type")

    def session_comm(self) -> Type:
        t = self.next()  # '!' or '?'
        sp = t.span
        cls = TSend if t.kind == "!" else TRecv
        if self.at("{"):
            self.next()
            txt = self.ident()
            self.eat(":")
            shape = self.dom_kind_shape()
            self.eat("}")
            self.scope.push()
            binder = self.scope.bind(txt)
            self.eat("(")
            st = self.state()
            self.eat(";")
            payload = self.type_()
            self.eat(")")
            self.scope.pop()
            self.eat(".")
            cont = self.type_atom()
            return cls(binder, shape, st, payload, cont, span=sp)
        # sugar: !T.S == !{_:Dom(0)}(.;T).S for channel-free payloads
        payload = self.type_atom()
        self.eat(".")
        cont = self.type_atom()
        return cls(fresh_name("_z"), ShZero(), StEmpty(), payload, cont, span=sp)

    def braces_type(self) -> Type:
        sp = self.eat("{").span
        if self.at("}"):
            self.next()
            return DomZero(span=sp)
        binds = [self.state_binding()]
        while self.at(","):
            self.next()
            binds.append(self.state_binding())
        self.eat("}")
        out: Type = binds[0]
        for b in binds[1:]:
            out = StMerge(out, b)
        return out

    def state_binding(self) -> Type:
        dom = self.type_app()
        self.eat(":")
        ses = self.type_()
        return StBind(dom, ses)

    def state(self) -> Type:
        atoms = [self.state_atom()]
        while self.at(","):
            self.next()
            atoms.append(self.state_atom())
        out = atoms[0]
        for a in atoms[1:]:
            out = StMerge(out, a)
        return out

    def state_atom(self) -> Type:
        if self.at("."):
            sp = self.next().span
            return StEmpty(span=sp)
        if self.at("{"):
            return self.braces_type()
        return self.type_app()  # state variable or application

    def arr_type(self) -> Type:
        sp = self.eat("[").span
        pre = self.state()
        self.eat(";")
        arg = self.type_()
        self.eat("->")
        self.eat("ex")
        self.scope.push()
        ex = self.ex_bindings()
        self.eat(".")
        post = self.state()
        self.eat(";")
        res = self.type_()
        self.scope.pop()
        self.eat("]")
        return TArr(pre, arg, ex, post, res, span=sp)

    def ex_bindings(self) -> tuple[Binding, ...]:
        out: list[Binding] = []
        if self.at("."):
            return ()
        while True:
            if self.at("ident") and self.peek(1).kind == ":":
                txt = self.ident()
                self.eat(":")
                k = self.kind()
                out.append(BTVar(self.scope.bind(txt), k))
            else:
                left = self.type_app()
                self.eat("#")
                right = self.type_app()
                out.append(BDisjoint(left, right))
            if self.at(","):
                self.next()
                continue
            return tuple(out)

    def constraints(self) -> tuple[BDisjoint, ...]:
        self.eat("[")
        out: list[BDisjoint] = []
        if not self.at("]"):
            while True:
                left = self.type_app()
                self.eat("#")
                right = self.type_app()
                out.append(BDisjoint(left, right))
                if self.at(","):
                    self.next()
                    continue
                break
        self.eat("]")
        return tuple(out)

    # -- values and expressions ---------------------------------------------

    def value(self) -> Value:
        t = self.peek()
        sp = t.span
        match t.kind:
            case "\\":
                self.next()
                self.eat("[")
                pre = self.state()
                self.eat("]")
                self.eat("(")
                txt = self.ident()
                self.eat(":")
                argty = self.type_()
                self.eat(")")
                self.eat(".")
                self.scope.push()
                binder = self.scope.bind(txt)
                body = self.expr()
                self.scope.pop()
                return VAbs(pre, binder, argty, body, span=sp)
            case "/\\":
                self.next()
                txt = self.ident()
                self.eat(":")
                k = self.kind()
                self.scope.push()
                binder = self.scope.bind(txt)
                cs = self.constraints()
                self.eat(".")
                body = self.value()
                self.scope.pop()
                return VTAbs(binder, k, cs, body, span=sp)
            case "chan":
                self.next()
                return VChan(self.type_atom(), span=sp)
            case "(":
                self.next()
                if self.at(")"):
                    self.next()
                    return VUnit(span=sp)
                v = self.value()
                if self.at(","):
                    self.next()
                    w = self.value()
                    self.eat(")")
                    return VPair(v, w, span=sp)
                self.eat(")")
                return v
            case "ident":
                return VVar(self.name_use(), span=sp)
        raise self.fail("expected a value")

    def value_starts(self) -> bool:
        return self.peek().kind in {"\\", "/\\", "chan", "(", "ident"}

    _EXPR_KEYWORDS = {
        "let", "fork", "new", "accept", "request", "send", "recv", "select",
        "case", "close", "proj1", "proj2",
    }

    def expr(self) -> Expr:
        t = self.peek()
        sp = t.span
        if t.kind == "(" and self.peek(1).kind in self._EXPR_KEYWORDS:
            self.next()
            e = self.expr()
            self.eat(")")
            return e
        match t.kind:
            case "let":
                self.next()
                exnames_txt: list[str] = []
                if self.at("["):
                    self.next()
                    exnames_txt.append(self.ident())
                    while self.at(","):
                        self.next()
                        exnames_txt.append(self.ident())
                    self.eat("]")
                txt = self.ident()
                self.eat("=")
                head = self.expr()
                self.eat("in")
                self.scope.push()
                exnames = tuple(self.scope.bind(t) for t in exnames_txt)
                binder = self.scope.bind(txt)
                body = self.expr()
                self.scope.pop()
                return ELet(binder, head, body, exnames=exnames, span=sp)
            case "fork":
                self.next()
                return EFork(self.value(), span=sp)
            case "new":
                self.next()
                return ENew(self.type_atom(), span=sp)
            case "accept":
                self.next()
                return EAccept(self.value(), span=sp)
            case "request":
                self.next()
                return ERequest(self.value(), span=sp)
            case "send":
                self.next()
                payload = self.value()
                return ESend(payload, self.value(), span=sp)
            case "recv":
                self.next()
                return ERecv(self.value(), span=sp)
            case "select":
                self.next()
                lab = self.label()
                return ESelect(lab, self.value(), span=sp)
            case "case":
                self.next()
                v = self.value()
                self.eat("{")
                left = self.expr()
                self.eat(";")
                right = self.expr()
                self.eat("}")
                return ECase(v, left, right, span=sp)
            case "close":
                self.next()
                return EClose(self.value(), span=sp)
            case "proj1" | "proj2":
                self.next()
                lab = Label.L1 if t.kind == "proj1" else Label.L2
                return EProj(lab, self.value(), span=sp)
            case _:
                return self.app_chain()

    def label(self) -> Label:
        t = self.eat("num")
        if t.text == "1":
            return Label.L1
        if t.text == "2":
            return Label.L2
        raise ParseError(f"expected label 1 or 2, found {t.text!r}", t.span)

    def app_chain(self) -> Expr:
        """value (value | '[' type ']')*; chains of length > 1 desugar into lets."""
        sp = self.peek().span
        v = self.value()
        if not (self.value_starts() or self.at("[")):
            return EVal(v, span=sp)
        cur = self._apply(v, sp)
        while self.value_starts() or self.at("["):
            tmp = fresh_name("_t")
            cur = ELet(tmp, cur, self._apply(VVar(tmp), sp), span=sp)
        return cur

    def _apply(self, fn: Value, sp: Span) -> Expr:
        if self.at("["):
            self.next()
            ty = self.type_()
            self.eat("]")
            return ETApp(fn, ty, span=sp)
        return EApp(fn, self.value(), span=sp)

    # -- configurations -------------------------------------------------------

    def config(self) -> Config:
        c = self.config_atom()
        while self.at("|"):
            self.next()
            c = CPar(c, self.config_atom())
        return c

    def config_atom(self) -> Config:
        t = self.peek()
        sp = t.span
        match t.kind:
            case "<":
                self.next()
                e = self.expr()
                self.eat(">")
                return CProc(e, span=sp)
            case "nu":
                self.next()
                t1 = self.ident()
                t2 = self.ident()
                self.eat(":")
                ses = self.type_()
                self.eat(".")
                self.scope.push()
                n1 = self.scope.bind(t1)
                n2 = self.scope.bind(t2)
                body = self.config()
                self.scope.pop()
                return CNuChan(n1, n2, ses, body, span=sp)
            case "nuap":
                self.next()
                txt = self.ident()
                self.eat(":")
                ses = self.type_()
                self.eat(".")
                self.scope.push()
                binder = self.scope.bind(txt)
                body = self.config()
                self.scope.pop()
                return CNuAccess(binder, ses, body, span=sp)
            case "(":
                self.next()
                c = self.config()
                self.eat(")")
                return c
        raise self.fail("expected a configuration")

    def config_starts(self) -> bool:
        return self.peek().kind in {"<", "nu", "nuap"}


def parse_program(src: str, filename: str = "<input>") -> Program:
    p = Parser(src, filename, open_world=False)
    if p.at("eof"):
        raise ParseError("empty program", p.peek().span)
    if p.config_starts():
        c = p.config()
        p.eat("eof")
        return Program(config=c, expr=None, filename=filename)
    e = p.expr()
    p.eat("eof")
    return Program(config=None, expr=e, filename=filename)


def parse_expr(src: str, filename: str = "<input>", open_world: bool = True) -> Expr:
    p = Parser(src, filename, open_world=open_world)
    e = p.expr()
    p.eat("eof")
    return e


def parse_type(src: str, filename: str = "<input>", open_world: bool = True) -> Type:
    p = Parser(src, filename, open_world=open_world)
    t = p.type_()
    p.eat("eof")
    return t


def parse_kind(src: str, filename: str = "<input>") -> Kind:
    p = Parser(src, filename, open_world=True)
    k = p.kind()
    p.eat("eof")
    return k
