"""Context formation, kind formation, kinding, context restriction, and
disjoint context extension."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    BDisjoint,
    BTVar,
    BVal,
    Ctx,
    DomMerge,
    DomProj,
    DomZero,
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
    ShPair,
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
    state_atoms,
)
from .normalize import conv, normalize
from .pretty import pretty


@dataclass
class KindError(Exception):
    """Kinding failure; `rule` is the failing rule label, `trail` the rule
    labels unwound while propagating (deepest first)."""

    rule: str
    message: str
    subtree: object = None
    span: Span | None = None
    expected: str | None = None
    found: str | None = None
    trail: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        loc = f"{self.span}: " if self.span else ""
        extra = ""
        if self.expected is not None or self.found is not None:
            extra = f" (expected {self.expected}, found {self.found})"
        return f"{loc}[{self.rule}] {self.message}{extra}"


# -- context helpers ---------------------------------------------------------


def lookup_tvar(g: Ctx, name: Name) -> Kind | None:
    for b in reversed(g):
        if isinstance(b, BTVar) and b.name.uid == name.uid:
            return b.kind
    return None


def lookup_val(g: Ctx, name: Name) -> Type | None:
    for b in reversed(g):
        if isinstance(b, BVal) and b.name.uid == name.uid:
            return b.type
    return None


def ctx_names(g: Ctx) -> set[int]:
    return {b.name.uid for b in g if isinstance(b, (BTVar, BVal))}


def kind_equiv(k1: Kind, k2: Kind) -> bool:
    """Kind equality; shapes inside Dom are compared up to conversion."""
    match (k1, k2):
        case (KDom(s1), KDom(s2)):
            return conv(s1, s2)
        case (KArrow(a1, b1), KArrow(a2, b2)):
            return kind_equiv(a1, a2) and kind_equiv(b1, b2)
        case _:
            return type(k1) is type(k2)


def is_dom_kind(k: Kind) -> bool:
    return isinstance(k, KDom)


# -- context restriction (keep only type variables of channel-free kinds) ----


def _keeps_non_dom(k: Kind) -> bool:
    if isinstance(k, (KShape, KSession)):
        return True
    if isinstance(k, KArrow) and isinstance(k.src, KDom) and isinstance(k.dst, (KType, KState)):
        return True
    return False


def restrict_non_dom(g: Ctx) -> Ctx:
    return tuple(b for b in g if isinstance(b, BTVar) and _keeps_non_dom(b.kind))


def restrict_only_dom(g: Ctx) -> Ctx:
    return tuple(b for b in g if isinstance(b, BTVar) and isinstance(b.kind, KDom))


# -- disjoint context extension ----------------------------------------------


def disjoint_append(g1: Ctx, g2: Ctx) -> Ctx:
    """g1, g2, C2, C12 with the constraints making g2's domains locally fresh."""
    if ctx_names(g1) & ctx_names(g2):
        raise KindError("CF-ConsKind", "disjoint extension requires fresh identifiers")
    d1 = [b.name for b in restrict_only_dom(g1)]
    d2 = [b.name for b in restrict_only_dom(g2)]
    c2 = tuple(
        BDisjoint(TVar(a), TVar(b)) for i, a in enumerate(d2) for b in d2[i + 1 :]
    )
    c12 = tuple(BDisjoint(TVar(a), TVar(b)) for a in d1 for b in d2)
    return g1 + g2 + c2 + c12


# -- context formation --------------------------------------------------------


def check_ctx(g: Ctx) -> None:
    """Derivability of context formation; raises KindError on the first bad binding."""
    check_ctx_suffix((), g)


def check_kind(g: Ctx, k: Kind) -> None:
    match k:
        case KType() | KSession() | KState() | KShape():
            return
        case KDom(shape):
            sk = infer_kind(g, shape)
            if not isinstance(sk, KShape):
                raise KindError(
                    "KF-Dom",
                    "domain kind index must be a shape",
                    k,
                    span=shape.span,
                    expected="Shape",
                    found=pretty(sk),
                )
        case KArrow(src, dst):
            check_kind(g, src)
            check_kind(g, dst)
        case _:
            raise KindError("KF-Arr", f"unknown kind {k!r}", k)


# -- kinding -------------------------------------------------------------------

_RULE_OF = {
    TVar: "K-Var",
    TApp: "K-App",
    TLam: "K-Lam",
    TAll: "K-All",
    TArr: "K-Arr",
    TChan: "K-Chan",
    TAccess: "K-AccessPoint",
    TUnit: "K-Unit",
    TPair: "K-Pair",
    TSend: "K-Send",
    TRecv: "K-Recv",
    TChoice: "K-Choice",
    TBranch: "K-Branch",
    TEnd: "K-End",
    TDual: "K-Dual",
    ShZero: "K-ShapeZero",
    ShOne: "K-ShapeOne",
    ShPair: "K-ShapePair",
    DomZero: "K-DomZero",
    DomMerge: "K-DomMerge",
    DomProj: "K-DomProj",
    StEmpty: "K-StEmpty",
    StBind: "K-StChan",
    StMerge: "K-StMerge",
}


def infer_kind(g: Ctx, t: Type) -> Kind:
    """The unique kind of t under g; raises KindError at the deepest failing
    premise, recording the rule trail on the way out."""
    try:
        return _infer(g, t)
    except KindError as e:
        rule = _RULE_OF.get(type(t))
        if rule and (not e.trail or e.trail[-1] != rule):
            e.trail.append(rule)
        raise


def _fail(rule: str, msg: str, t: Type, **kw) -> KindError:
    return KindError(rule, msg, t, span=t.span, **kw)


def _expect(g: Ctx, t: Type, want: Kind, rule: str) -> None:
    k = infer_kind(g, t)
    if not kind_equiv(k, want):
        raise _fail(rule, f"{pretty(t)} has the wrong kind", t, expected=pretty(want), found=pretty(k))


def _infer(g: Ctx, t: Type) -> Kind:
    match t:
        case TVar(nm):
            k = lookup_tvar(g, nm)
            if k is None:
                raise _fail("K-Var", f"unbound type variable {nm.text}", t)
            return k
        case TApp(fn, arg):
            kf = infer_kind(g, fn)
            if not isinstance(kf, KArrow):
                raise _fail("K-App", "application of a non-arrow type", t, found=pretty(kf))
            ka = infer_kind(g, arg)
            if not kind_equiv(ka, kf.src):
                raise _fail(
                    "K-App", "argument kind mismatch", t, expected=pretty(kf.src), found=pretty(ka)
                )
            return kf.dst
        case TLam(binder, shape, body):
            _expect(g, shape, KShape(), "K-Lam")
            inner = restrict_non_dom(g) + (BTVar(binder, KDom(shape)),)
            kb = infer_kind(inner, body)
            if not isinstance(kb, (KType, KState)):
                raise _fail(
                    "K-Lam",
                    "type function body must have kind Type or State",
                    t,
                    found=pretty(kb),
                )
            return KArrow(KDom(shape), kb)
        case TAll(binder, kind, cstr, body):
            check_kind(g, kind)
            g2 = g + (BTVar(binder, kind),) + cstr
            check_ctx_suffix(g, g2)
            kb = infer_kind(g2, body)
            if not isinstance(kb, KType):
                raise _fail("K-All", "quantified body must have kind Type", t, found=pretty(kb))
            return KType()
        case TArr(pre, arg, exctx, post, res):
            _expect(g, pre, KState(), "K-Arr")
            _expect(g, arg, KType(), "K-Arr")
            for b in exctx:
                if isinstance(b, BVal):
                    raise _fail("K-Arr", "existential context may not bind values", t)
                if isinstance(b, BTVar) and not isinstance(b.kind, KDom):
                    raise _fail(
                        "K-Arr",
                        "existential context may only bind domains",
                        t,
                        found=pretty(b.kind),
                    )
            gx = disjoint_append(g, exctx)
            check_ctx_suffix(g, gx)
            _expect(gx, post, KState(), "K-Arr")
            _expect(gx, res, KType(), "K-Arr")
            return KType()
        case TChan(dom):
            kd = infer_kind(g, dom)
            if not kind_equiv(kd, KDom(ShOne())):
                raise _fail(
                    "K-Chan",
                    "channel type needs a single-channel domain",
                    t,
                    expected="Dom(1)",
                    found=pretty(kd),
                )
            return KType()
        case TAccess(ses):
            _expect(g, ses, KSession(), "K-AccessPoint")
            return KType()
        case TUnit():
            return KType()
        case TPair(l, r):
            kl = infer_kind(g, l)
            if isinstance(kl, KShape):
                _expect(g, r, KShape(), "K-ShapePair")
                return KShape()
            if isinstance(kl, KType):
                _expect(g, r, KType(), "K-Pair")
                return KType()
            raise _fail("K-Pair", "pair component must be a type or a shape", t, found=pretty(kl))
        case TSend(binder, shape, state, payload, cont) | TRecv(binder, shape, state, payload, cont):
            rule = _RULE_OF[type(t)]
            _expect(g, shape, KShape(), rule)
            inner = restrict_non_dom(g) + (BTVar(binder, KDom(shape)),)
            _expect(inner, state, KState(), rule)
            _expect(inner, payload, KType(), rule)
            _expect(g, cont, KSession(), rule)
            return KSession()
        case TChoice(l, r) | TBranch(l, r):
            rule = _RULE_OF[type(t)]
            _expect(g, l, KSession(), rule)
            _expect(g, r, KSession(), rule)
            return KSession()
        case TEnd():
            return KSession()
        case TDual(s):
            _expect(g, s, KSession(), "K-Dual")
            return KSession()
        case ShZero() | ShOne():
            return KShape()
        case ShPair(l, r):
            _expect(g, l, KShape(), "K-ShapePair")
            _expect(g, r, KShape(), "K-ShapePair")
            return KShape()
        case DomZero():
            return KDom(ShZero())
        case DomMerge(l, r):
            kl, kr = infer_kind(g, l), infer_kind(g, r)
            if not (isinstance(kl, KDom) and isinstance(kr, KDom)):
                raise _fail("K-DomMerge", "merge of non-domains", t)
            _require_disjoint(g, l, r, "K-DomMerge", t)
            return KDom(ShPair(kl.shape, kr.shape))
        case DomProj(lab, dom):
            kd = infer_kind(g, dom)
            if not isinstance(kd, KDom):
                raise _fail("K-DomProj", "projection of a non-domain", t, found=pretty(kd))
            sh = normalize(kd.shape)
            if not isinstance(sh, (ShPair, TPair)):
                raise _fail(
                    "K-DomProj",
                    "projection needs a pair-shaped domain",
                    t,
                    found=pretty(sh),
                )
            return KDom(sh.left if lab is Label.L1 else sh.right)
        case StEmpty():
            return KState()
        case StBind(dom, ses):
            kd = infer_kind(g, dom)
            if not kind_equiv(kd, KDom(ShOne())):
                raise _fail(
                    "K-StChan",
                    "state binding needs a single-channel domain",
                    t,
                    expected="Dom(1)",
                    found=pretty(kd),
                )
            _expect(g, ses, KSession(), "K-StChan")
            return KState()
        case StMerge(l, r):
            _expect(g, l, KState(), "K-StMerge")
            _expect(g, r, KState(), "K-StMerge")
            la, ra = _state_doms(l), _state_doms(r)
            if la is None or ra is None:
                if (la is None and ra != []) or (ra is None and la != []):
                    raise _fail(
                        "K-StMerge",
                        "cannot establish disjointness of an opaque state",
                        t,
                    )
            else:
                for d1 in la:
                    for d2 in ra:
                        _require_disjoint(g, d1, d2, "K-StMerge", t)
            return KState()
    raise _fail("K-Var", f"not a type: {t!r}", t)


def _require_disjoint(g: Ctx, d1: Type, d2: Type, rule: str, at: Type) -> None:
    from .constraints import entails

    if not entails(g, (BDisjoint(d1, d2),)):
        raise _fail(
            rule,
            f"cannot prove disjointness {pretty(d1)} # {pretty(d2)}",
            at,
        )


def _state_doms(st: Type) -> list[Type] | None:
    """Domains governed by a state; None when they cannot be determined
    (opaque state variable). A stuck application f d covers at most d."""
    atoms = state_atoms(normalize(st))
    out: list[Type] = []
    for a in atoms:
        match a:
            case StBind(dom, _):
                out.append(dom)
            case TApp(_, arg):
                out.append(arg)
            case _:
                return None
    return out


def check_ctx_suffix(g_ok: Ctx, g: Ctx) -> None:
    """check_ctx for g, assuming the prefix g_ok was already checked."""
    seen = ctx_names(g_ok)
    for i in range(len(g_ok), len(g)):
        b = g[i]
        prefix = g[:i]
        match b:
            case BTVar(nm, kind):
                if nm.uid in seen:
                    raise KindError("CF-ConsKind", f"duplicate binding for {nm.text}", b)
                check_kind(prefix, kind)
                seen.add(nm.uid)
            case BVal(nm, ty):
                if nm.uid in seen:
                    raise KindError("CF-ConsType", f"duplicate binding for {nm.text}", b)
                k = infer_kind(prefix, ty)
                if not isinstance(k, KType):
                    raise KindError("CF-ConsType", "value binding must be Type-kinded", b)
                seen.add(nm.uid)
            case BDisjoint(l, r):
                for side in (l, r):
                    if not is_dom_kind(infer_kind(prefix, side)):
                        raise KindError("CF-ConsCstr", "constraint over a non-domain", b)
