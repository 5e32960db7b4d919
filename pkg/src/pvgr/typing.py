"""Algorithmic typing: value typing, expression typing with typestate
threading, existential-package matching, and configuration typing.

Instead of guessing state splits, each judgment threads the entire input
state: header rules consume exactly the bindings they need and leave the
rest. Existential binders created along the way (received channels, new
connections) are dropped from reported packages once neither the post
state nor the result type mentions them; such binders are checker-internal
and cannot be referenced by the program.
"""

from __future__ import annotations

from dataclasses import dataclass

from .anf import is_strict_anf
from .ast import (
    BDisjoint,
    Binding,
    BTVar,
    BVal,
    Ctx,
    DomMerge,
    DomProj,
    DomZero,
    ShPair,
    CNuAccess,
    CNuChan,
    CPar,
    CProc,
    Config,
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
    KDom,
    KSession,
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
    TAccess,
    TAll,
    TApp,
    TArr,
    TBranch,
    TChan,
    TChoice,
    TDual,
    TEnd,
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
    free_vars,
    fresh_name,
    state_of_atoms,
    subst,
)
from .constraints import entails
from .kinding import (
    KindError,
    check_ctx_suffix,
    check_kind,
    disjoint_append,
    infer_kind,
    kind_equiv,
    lookup_val,
)
from .normalize import conv, dual, normalize
from .pretty import pretty, pretty_ctx


@dataclass
class TypecheckError(Exception):
    rule: str
    message: str
    span: Span | None = None
    expected: str | None = None
    found: str | None = None
    state: str | None = None

    def __str__(self) -> str:
        loc = f"{self.span}: " if self.span else ""
        parts = [f"{loc}[{self.rule}] {self.message}"]
        if self.expected is not None:
            parts.append(f"  expected: {self.expected}")
        if self.found is not None:
            parts.append(f"  found:    {self.found}")
        if self.state is not None:
            parts.append(f"  state:    {self.state}")
        return "\n".join(parts)


@dataclass
class ExprTyping:
    """Right side of an expression typing: ex exctx. post; ty."""

    exctx: Ctx
    post: list[Type]  # state atoms
    ty: Type

    @property
    def post_state(self) -> Type:
        return normalize(state_of_atoms(self.post))

    def __str__(self) -> str:
        ex = pretty_ctx(self.exctx)
        prefix = f"ex {ex}. " if ex else "ex . "
        return f"{prefix}{pretty(self.post_state)}; {pretty(self.ty)}"


Renaming = dict[int, Type]


# ---------------------------------------------------------------------------
# state bags
# ---------------------------------------------------------------------------


def _atoms_of(state: Type) -> list[Type]:
    from .ast import state_atoms

    return state_atoms(normalize(state))


def _find_binding(atoms: list[Type], dom: Type) -> int | None:
    for i, a in enumerate(atoms):
        if isinstance(a, StBind) and conv(a.dom, dom):
            return i
    return None


def _take_atoms(atoms: list[Type], wanted: list[Type], rule: str, span: Span | None) -> list[Type]:
    """Remove wanted atoms (up to conv) from atoms; error when absent."""
    rest = list(atoms)
    for w in wanted:
        for i, a in enumerate(rest):
            if conv(a, w):
                del rest[i]
                break
        else:
            raise TypecheckError(
                rule,
                "state does not provide a required binding",
                span,
                expected=pretty(normalize(w)),
                state=pretty(normalize(state_of_atoms(atoms))),
            )
    return rest


# ---------------------------------------------------------------------------
# value typing
# ---------------------------------------------------------------------------


def type_value(g: Ctx, v: Value) -> Type:
    match v:
        case VVar(nm):
            ty = lookup_val(g, nm)
            if ty is None:
                raise TypecheckError("T-Var", f"unbound variable {nm.text}", v.span)
            return ty
        case VUnit():
            return TUnit()
        case VChan(dom):
            try:
                kd = infer_kind(g, dom)
            except KindError as e:
                raise TypecheckError("T-Chan", str(e), v.span) from e
            if not kind_equiv(kd, KDom(ShOne())):
                raise TypecheckError(
                    "T-Chan",
                    "channel value over a non single-channel domain",
                    v.span,
                    expected="Dom(1)",
                    found=pretty(kd),
                )
            return TChan(normalize(dom))
        case VPair(l, r):
            return TPair(type_value(g, l), type_value(g, r))
        case VAbs(pre, binder, argty, body):
            npre, nargty = normalize(pre), normalize(argty)
            _kind_check(g, npre, KState(), "T-Abs", v.span)
            _kind_check(g, nargty, KType(), "T-Abs", v.span)
            r = _type_expr(g + (BVal(binder, nargty),), _atoms_of(npre), body)
            arr = TArr(npre, nargty, r.exctx, r.post_state, r.ty)
            try:
                infer_kind(g, arr)
            except KindError as e:
                raise TypecheckError(
                    "T-Abs", f"function type is not wellformed: {e}", v.span, found=pretty(arr)
                ) from e
            return arr
        case VTAbs(binder, kind, cstr, body):
            try:
                check_kind(g, kind)
                g2 = g + (BTVar(binder, kind),) + cstr
                check_ctx_suffix(g, g2)
            except KindError as e:
                raise TypecheckError("T-TAbs", str(e), v.span) from e
            ty = type_value(g2, body)
            return TAll(binder, kind, cstr, ty)
    raise TypecheckError("T-Var", f"not a value: {v!r}", v.span)


def _kind_check(g: Ctx, t: Type, want: Kind, rule: str, span: Span | None) -> None:
    try:
        k = infer_kind(g, t)
    except KindError as e:
        raise TypecheckError(rule, str(e), span or t.span) from e
    if not kind_equiv(k, want):
        raise TypecheckError(
            rule, f"{pretty(t)} has kind {pretty(k)}", span or t.span, expected=pretty(want)
        )


# ---------------------------------------------------------------------------
# expression typing
# ---------------------------------------------------------------------------


def type_expr(g: Ctx, sigma: Type, e: Expr) -> ExprTyping:
    """Gamma; sigma |- e : ex Gamma'. Sigma'; T with left-first threading."""
    if not is_strict_anf(e):
        raise TypecheckError("T-Let", "expression is not in strict A-normal form", e.span)
    _kind_check(g, sigma, KState(), "T-Val", e.span)
    return _type_expr(g, _atoms_of(sigma), e)


def _type_expr(g: Ctx, atoms: list[Type], e: Expr) -> ExprTyping:
    match e:
        case EVal(v):
            return ExprTyping((), list(atoms), type_value(g, v))

        case ELet(binder, head, body, exnames):
            r1 = _type_expr(g, atoms, head)
            if exnames:
                r1 = _rename_exctx(r1, exnames, e.span)
            g2 = disjoint_append(g, r1.exctx) + (BVal(binder, normalize(r1.ty)),)
            r2 = _type_expr(g2, r1.post, body)
            merged = r1.exctx + r2.exctx
            return _gc_package(ExprTyping(merged, r2.post, r2.ty))

        case EApp(f, a):
            tf = normalize(type_value(g, f))
            if not isinstance(tf, TArr):
                raise TypecheckError(
                    "T-App", "application of a non-function", e.span, found=pretty(tf)
                )
            ta = type_value(g, a)
            if not conv(ta, tf.arg):
                raise TypecheckError(
                    "T-App",
                    "argument type mismatch",
                    e.span,
                    expected=pretty(normalize(tf.arg)),
                    found=pretty(normalize(ta)),
                )
            rest = _take_atoms(atoms, _atoms_of(tf.pre), "T-App", e.span)
            exctx, post, ty = _instantiate_arr(tf)
            return ExprTyping(exctx, rest + post, ty)

        case EProj(lab, v):
            tv = normalize(type_value(g, v))
            if not isinstance(tv, TPair):
                raise TypecheckError(
                    "T-Proj", "projection of a non-pair", e.span, found=pretty(tv)
                )
            return ExprTyping((), list(atoms), tv.left if lab is Label.L1 else tv.right)

        case ETApp(v, targ):
            tv = normalize(type_value(g, v))
            if not isinstance(tv, TAll):
                raise TypecheckError(
                    "T-TApp", "type application of a non-polymorphic value", e.span, found=pretty(tv)
                )
            try:
                ka = infer_kind(g, targ)
            except KindError as err:
                raise TypecheckError("T-TApp", str(err), e.span) from err
            if not kind_equiv(ka, tv.kind):
                raise TypecheckError(
                    "T-TApp",
                    "type argument kind mismatch",
                    e.span,
                    expected=pretty(tv.kind),
                    found=pretty(ka),
                )
            inst = {tv.binder.uid: normalize(targ)}
            cs = tuple(
                BDisjoint(subst(inst, c.left), subst(inst, c.right)) for c in tv.cstr
            )
            if not entails(g, cs):
                raise TypecheckError(
                    "T-TApp",
                    "instantiated constraints are not entailed",
                    e.span,
                    expected=", ".join(pretty(c) for c in cs) or "(empty)",
                    state=pretty_ctx(tuple(b for b in g if isinstance(b, BDisjoint))),
                )
            return ExprTyping((), list(atoms), normalize(subst(inst, tv.body)))

        case ENew(ses):
            _kind_check(g, ses, KSession(), "T-New", e.span)
            return ExprTyping((), list(atoms), TAccess(normalize(ses)))

        case EAccept(v) | ERequest(v):
            rule = "T-Accept" if isinstance(e, EAccept) else "T-Request"
            tv = normalize(type_value(g, v))
            if not isinstance(tv, TAccess):
                raise TypecheckError(
                    rule, "accept/request on a non access point", e.span, found=pretty(tv)
                )
            c = fresh_name("c")
            ses = tv.ses if isinstance(e, EAccept) else dual(tv.ses)
            return ExprTyping(
                (BTVar(c, KDom(ShOne())),),
                list(atoms) + [StBind(TVar(c), ses)],
                TChan(TVar(c)),
            )

        case ESend(payload, chanv):
            return _type_send(g, atoms, e, payload, chanv)

        case ERecv(v):
            dom = _chan_dom(g, v, "T-Recv", e.span)
            i, ses = _session_at(atoms, dom, "T-Recv", e.span)
            if not isinstance(ses, TRecv):
                raise TypecheckError(
                    "T-Recv",
                    "channel is not ready to receive",
                    e.span,
                    expected="?{..}(..).. session",
                    found=pretty(ses),
                )
            rest = atoms[:i] + atoms[i + 1 :]
            b2 = fresh_name(ses.binder.text or "d")
            inst = {ses.binder.uid: TVar(b2)}
            new_state = _atoms_of(subst(inst, ses.state))
            ty = normalize(subst(inst, ses.payload))
            return ExprTyping(
                (BTVar(b2, KDom(normalize(ses.shape))),),
                rest + new_state + [StBind(dom, normalize(ses.cont))],
                ty,
            )

        case ESelect(lab, v):
            dom = _chan_dom(g, v, "T-Select", e.span)
            i, ses = _session_at(atoms, dom, "T-Select", e.span)
            if not isinstance(ses, TChoice):
                raise TypecheckError(
                    "T-Select",
                    "channel does not offer a choice",
                    e.span,
                    expected="S +c S session",
                    found=pretty(ses),
                )
            chosen = ses.left if lab is Label.L1 else ses.right
            rest = atoms[:i] + atoms[i + 1 :]
            return ExprTyping((), rest + [StBind(dom, chosen)], TUnit())

        case ECase(v, left, right):
            return _type_case(g, atoms, e, v, left, right)

        case EClose(v):
            dom = _chan_dom(g, v, "T-Close", e.span)
            i, ses = _session_at(atoms, dom, "T-Close", e.span)
            if not isinstance(ses, TEnd):
                raise TypecheckError(
                    "T-Close",
                    "channel session has not ended",
                    e.span,
                    expected="End",
                    found=pretty(ses),
                )
            return ExprTyping((), atoms[:i] + atoms[i + 1 :], TUnit())

        case EFork(v):
            tv = normalize(type_value(g, v))
            if not (
                isinstance(tv, TArr)
                and conv(tv.arg, TUnit())
                and conv(tv.res, TUnit())
                and isinstance(normalize(tv.post), StEmpty)
                and not tv.exctx
            ):
                raise TypecheckError(
                    "T-Fork",
                    "fork needs a [S;Unit -> ex . .;Unit] function",
                    e.span,
                    found=pretty(tv),
                )
            rest = _take_atoms(atoms, _atoms_of(tv.pre), "T-Fork", e.span)
            return ExprTyping((), rest, TUnit())

    raise TypecheckError("T-Val", f"cannot type expression {e!r}", e.span)


def _chan_dom(g: Ctx, v: Value, rule: str, span: Span | None) -> Type:
    tv = normalize(type_value(g, v))
    if not isinstance(tv, TChan):
        raise TypecheckError(rule, "operation needs a channel", span, found=pretty(tv))
    return tv.dom


def _session_at(atoms: list[Type], dom: Type, rule: str, span: Span | None) -> tuple[int, Type]:
    i = _find_binding(atoms, dom)
    if i is None:
        raise TypecheckError(
            rule,
            f"channel {pretty(dom)} is not in the current state",
            span,
            state=pretty(normalize(state_of_atoms(atoms))),
        )
    return i, normalize(atoms[i].ses)  # type: ignore[union-attr]


def _instantiate_arr(tf: TArr) -> tuple[Ctx, list[Type], Type]:
    """Freshen the existential package of an arrow type."""
    ren: dict[int, Type] = {}
    exctx: list[Binding] = []
    for b in tf.exctx:
        match b:
            case BTVar(nm, kind):
                nb = fresh_name(nm.text)
                ren[nm.uid] = TVar(nb)
                exctx.append(BTVar(nb, kind))
            case BDisjoint(l, r):
                exctx.append(BDisjoint(subst(ren, l), subst(ren, r)))
            case BVal(nm, ty):
                raise TypecheckError("T-App", "existential context binds a value", tf.span)
    post = _atoms_of(subst(ren, tf.post))
    ty = normalize(subst(ren, tf.res))
    return tuple(exctx), post, ty


def _rename_exctx(r: ExprTyping, names: tuple[Name, ...], span: Span | None) -> ExprTyping:
    """Rename the leading existential binders of a package to user names."""
    binders = [b for b in r.exctx if isinstance(b, BTVar)]
    if len(names) > len(binders):
        raise TypecheckError(
            "T-Let",
            f"header creates {len(binders)} existential binder(s), "
            f"but {len(names)} name(s) given",
            span,
        )
    ren: dict[int, Type] = {b.name.uid: TVar(n) for b, n in zip(binders, names)}
    by_uid = {b.name.uid: n for b, n in zip(binders, names)}
    exctx: list[Binding] = []
    for b in r.exctx:
        match b:
            case BTVar(nm, kind):
                exctx.append(BTVar(by_uid.get(nm.uid, nm), kind))
            case BDisjoint(l, rr):
                exctx.append(BDisjoint(subst(ren, l), subst(ren, rr)))
            case _:
                exctx.append(b)
    post = [subst(ren, a) for a in r.post]
    return ExprTyping(tuple(exctx), post, subst(ren, r.ty))


def _gc_package(r: ExprTyping) -> ExprTyping:
    """Drop existential binders that neither the post state nor the result
    type mentions; they are checker-internal and unreachable."""
    used = {nm.uid for nm in free_vars(r.post_state)} | {nm.uid for nm in free_vars(r.ty)}
    kept_uids = {b.name.uid for b in r.exctx if isinstance(b, BTVar) and b.name.uid in used}
    dropped = {b.name.uid for b in r.exctx if isinstance(b, BTVar)} - kept_uids
    out: list[Binding] = []
    for b in r.exctx:
        if isinstance(b, BTVar):
            if b.name.uid in kept_uids:
                out.append(b)
        elif isinstance(b, BDisjoint):
            mentioned = {nm.uid for nm in free_vars(b.left)} | {nm.uid for nm in free_vars(b.right)}
            if not (mentioned & dropped):
                out.append(b)
    return ExprTyping(tuple(out), r.post, r.ty)


# -- send: existential-package matching ---------------------------------------


def _type_send(g: Ctx, atoms: list[Type], e: Expr, payload: Value, chanv: Value) -> ExprTyping:
    dom = _chan_dom(g, chanv, "T-Send", e.span)
    i, ses = _session_at(atoms, dom, "T-Send", e.span)
    if not isinstance(ses, TSend):
        raise TypecheckError(
            "T-Send",
            "channel is not ready to send",
            e.span,
            expected="!{..}(..).. session",
            found=pretty(ses),
        )
    rest = atoms[:i] + atoms[i + 1 :]
    tpay = normalize(type_value(g, payload))
    rho = match_existential(
        g,
        (BTVar(ses.binder, KDom(normalize(ses.shape))),),
        ses.state,
        ses.payload,
        rest,
        tpay,
        span=e.span,
    )
    guessed = rho.get(ses.binder.uid)
    if guessed is None:
        raise TypecheckError("T-Send", "could not determine the transferred domain", e.span)
    try:
        kd = infer_kind(g, guessed)
    except KindError as err:
        raise TypecheckError("T-Send", f"guessed domain is not wellformed: {err}", e.span) from err
    if not kind_equiv(kd, KDom(normalize(ses.shape))):
        raise TypecheckError(
            "T-Send",
            "transferred domain has the wrong shape",
            e.span,
            expected=pretty(KDom(normalize(ses.shape))),
            found=pretty(kd),
        )
    consumed = _atoms_of(subst(rho, ses.state))
    leftover = _take_atoms(rest, consumed, "T-Send", e.span)
    return ExprTyping((), leftover + [StBind(dom, normalize(ses.cont))], TUnit())


def match_existential(
    g: Ctx,
    bound: Ctx,
    pat_state: Type,
    pat_ty: Type,
    act_state: list[Type] | Type,
    act_ty: Type,
    span: Span | None = None,
) -> Renaming:
    """Compute rho with dom(rho) <= vars(bound) such that rho(pat_ty) ~ act_ty
    and rho(pat_state) is contained in the actual state atoms.

    First-order matching on the type determines most assignments; leftover
    pattern-state bindings are resolved against the actual state. Ambiguous
    matches (several non-equivalent solutions) are an error.
    """
    pvars = {b.name.uid: b for b in bound if isinstance(b, BTVar)}
    act_atoms = act_state if isinstance(act_state, list) else _atoms_of(act_state)

    parts: dict[tuple[int, tuple[int, ...]], Type] = {}
    if not _match(normalize(pat_ty), normalize(act_ty), set(pvars), {}, parts):
        raise TypecheckError(
            "existential-match",
            "payload type does not match the session's pattern",
            span,
            expected=pretty(normalize(pat_ty)),
            found=pretty(normalize(act_ty)),
        )

    solutions = _resolve_state(
        _atoms_of(pat_state), act_atoms, set(pvars), dict(parts)
    )
    assembled: list[Renaming] = []
    for sol in solutions:
        rho: Renaming = {}
        ok = True
        for uid, b in pvars.items():
            kind = b.kind
            shape = normalize(kind.shape) if isinstance(kind, KDom) else None
            d = _assemble(uid, (), shape, sol)
            if d is None:
                ok = False
                break
            rho[uid] = d
        if ok and _verify(rho, pat_state, pat_ty, act_atoms, act_ty):
            if not any(_same_renaming(rho, r) for r in assembled):
                assembled.append(rho)
    if not assembled:
        raise TypecheckError(
            "existential-match",
            "no instantiation of the existential package matches",
            span,
            expected=pretty(normalize(pat_state)) + "; " + pretty(normalize(pat_ty)),
            found=pretty(normalize(state_of_atoms(act_atoms))) + "; " + pretty(normalize(act_ty)),
        )
    if len(assembled) > 1:
        raise TypecheckError(
            "existential-match", "ambiguous existential match", span
        )
    return assembled[0]


def _same_renaming(a: Renaming, b: Renaming) -> bool:
    return a.keys() == b.keys() and all(conv(a[k], b[k]) for k in a)


def _match(pat: Type, act: Type, pvars: set[int], alpha: dict[int, int], parts) -> bool:
    """Structural first-order matching; pattern-variable projection chains
    are collected into `parts` keyed by (uid, path)."""
    chain = _pattern_chain(pat, pvars)
    if chain is not None:
        uid, path = chain
        prev = parts.get((uid, path))
        if prev is not None:
            return conv(prev, act)
        parts[(uid, path)] = act
        return True
    match (pat, act):
        case (TVar(a), TVar(b)):
            return alpha.get(a.uid, a.uid) == b.uid
        case (TApp(f1, a1), TApp(f2, a2)):
            return _match(f1, f2, pvars, alpha, parts) and _match(a1, a2, pvars, alpha, parts)
        case (TChan(d1), TChan(d2)):
            return _match(d1, d2, pvars, alpha, parts)
        case (TAccess(s1), TAccess(s2)):
            return _match(s1, s2, pvars, alpha, parts)
        case (TPair(l1, r1), TPair(l2, r2)):
            return _match(l1, l2, pvars, alpha, parts) and _match(r1, r2, pvars, alpha, parts)
        case (TDual(s1), TDual(s2)):
            return _match(s1, s2, pvars, alpha, parts)
        case (TUnit(), TUnit()) | (TEnd(), TEnd()):
            return True
        case (DomMerge(l1, r1), DomMerge(l2, r2)):
            return _match(l1, l2, pvars, alpha, parts) and _match(r1, r2, pvars, alpha, parts)
        case (TChoice(l1, r1), TChoice(l2, r2)) | (TBranch(l1, r1), TBranch(l2, r2)):
            return _match(l1, l2, pvars, alpha, parts) and _match(r1, r2, pvars, alpha, parts)
        case (TSend(b1, sh1, st1, p1, c1), TSend(b2, sh2, st2, p2, c2)) | (
            TRecv(b1, sh1, st1, p1, c1),
            TRecv(b2, sh2, st2, p2, c2),
        ):
            if type(pat) is not type(act):
                return False
            alpha2 = {**alpha, b1.uid: b2.uid}
            return (
                _match(sh1, sh2, pvars, alpha, parts)
                and _match(st1, st2, pvars, alpha2, parts)
                and _match(p1, p2, pvars, alpha2, parts)
                and _match(c1, c2, pvars, alpha, parts)
            )
        case _:
            # remaining constructors must agree up to conversion without
            # touching pattern variables
            if {n.uid for n in free_vars(pat)} & pvars:
                return False
            return conv(pat, act)


def _pattern_chain(t: Type, pvars: set[int]) -> tuple[int, tuple[int, ...]] | None:
    path: list[int] = []
    cur = t
    while isinstance(cur, DomProj):
        path.insert(0, int(cur.label))
        cur = cur.dom
    if isinstance(cur, TVar) and cur.name.uid in pvars:
        return (cur.name.uid, tuple(path))
    return None


def _resolve_state(
    pat_atoms: list[Type],
    act_atoms: list[Type],
    pvars: set[int],
    parts: dict,
) -> list[dict]:
    """All part-assignments that place every pattern state binding on some
    actual atom (each actual atom used at most once)."""
    out: list[dict] = []

    def go(i: int, used: set[int], parts: dict) -> None:
        if i == len(pat_atoms):
            out.append(dict(parts))
            return
        pa = pat_atoms[i]
        for j, aa in enumerate(act_atoms):
            if j in used:
                continue
            trial = dict(parts)
            if _match_atom(pa, aa, pvars, trial):
                go(i + 1, used | {j}, trial)

    go(0, set(), parts)
    return out


def _match_atom(pat: Type, act: Type, pvars: set[int], parts: dict) -> bool:
    match (pat, act):
        case (StBind(d1, s1), StBind(d2, s2)):
            return _match(d1, d2, pvars, {}, parts) and _match(s1, s2, pvars, {}, parts)
        case _:
            return _match(pat, act, pvars, {}, parts)


def _assemble(uid: int, path: tuple[int, ...], shape: Type | None, parts: dict) -> Type | None:
    whole = parts.get((uid, path))
    if whole is not None:
        return whole
    if shape is not None:
        if isinstance(shape, (TPair, ShPair)):
            l = _assemble(uid, path + (1,), shape.left, parts)
            r = _assemble(uid, path + (2,), shape.right, parts)
            if l is not None and r is not None:
                return DomMerge(l, r)
            return None
        if isinstance(shape, ShZero):
            return DomZero()
    return None


def _verify(rho: Renaming, pat_state: Type, pat_ty: Type, act_atoms: list[Type], act_ty: Type) -> bool:
    if not conv(subst(dict(rho), pat_ty), act_ty):
        return False
    wanted = _atoms_of(subst(dict(rho), pat_state))
    rest = list(act_atoms)
    for w in wanted:
        for i, a in enumerate(rest):
            if conv(a, w):
                del rest[i]
                break
        else:
            return False
    return True


# -- case: branch package equality ---------------------------------------------


def _type_case(g: Ctx, atoms: list[Type], e: Expr, v: Value, left: Expr, right: Expr) -> ExprTyping:
    dom = _chan_dom(g, v, "T-Case", e.span)
    i, ses = _session_at(atoms, dom, "T-Case", e.span)
    if not isinstance(ses, TBranch):
        raise TypecheckError(
            "T-Case",
            "channel does not offer a branch",
            e.span,
            expected="S +b S session",
            found=pretty(ses),
        )
    rest = atoms[:i] + atoms[i + 1 :]
    r1 = _gc_package(_type_expr(g, rest + [StBind(dom, ses.left)], left))
    r2 = _gc_package(_type_expr(g, rest + [StBind(dom, ses.right)], right))
    _require_equal_packages(g, r1, r2, e.span)
    return r1


def _require_equal_packages(g: Ctx, r1: ExprTyping, r2: ExprTyping, span: Span | None) -> None:
    b1 = [b for b in r1.exctx if isinstance(b, BTVar)]
    b2 = [b for b in r2.exctx if isinstance(b, BTVar)]
    if len(r1.post) != len(r2.post):
        raise TypecheckError(
            "T-Case", "branches end in different states", span,
            expected=pretty(r1.post_state), found=pretty(r2.post_state),
        )
    if len(b1) != len(b2):
        raise TypecheckError(
            "T-Case",
            "branches create different existential packages",
            span,
            expected=str(r1),
            found=str(r2),
        )
    if not b1:
        if conv(r1.post_state, r2.post_state) and conv(r1.ty, r2.ty):
            return
        raise TypecheckError(
            "T-Case", "branch typings differ", span, expected=str(r1), found=str(r2)
        )
    rho = match_existential(
        g,
        tuple(b1),
        r1.post_state,
        r1.ty,
        r2.post,
        r2.ty,
        span=span,
    )
    uids2 = {b.name.uid for b in b2}
    targets = set()
    kinds2 = {b.name.uid: b.kind for b in b2}
    kinds1 = {b.name.uid: b.kind for b in b1}
    for uid, t in rho.items():
        if not (isinstance(t, TVar) and t.name.uid in uids2):
            raise TypecheckError(
                "T-Case", "branch packages differ beyond renaming", span,
                expected=str(r1), found=str(r2),
            )
        if not kind_equiv(kinds1[uid], kinds2[t.name.uid]):
            raise TypecheckError("T-Case", "branch existentials have different kinds", span)
        targets.add(t.name.uid)
    if targets != uids2:
        raise TypecheckError(
            "T-Case", "branch packages bind different variables", span,
            expected=str(r1), found=str(r2),
        )


# ---------------------------------------------------------------------------
# configuration typing
# ---------------------------------------------------------------------------


@dataclass
class ProcTyping:
    """Captured typing of one expression process, in traversal order."""

    ctx: Ctx
    atoms_in: list[Type]
    typing: ExprTyping


def type_config(
    g: Ctx,
    sigma: Type,
    cfg: Config,
    collect: list[ProcTyping] | None = None,
) -> None:
    """Gamma; sigma |- cfg; raises TypecheckError when not derivable."""
    _kind_check(g, sigma, KState(), "T-Exp", cfg.span)
    leftover = _type_config(g, _atoms_of(sigma), cfg, collect)
    if leftover:
        raise TypecheckError(
            "T-Par",
            "configuration does not consume its state",
            cfg.span,
            state=pretty(normalize(state_of_atoms(leftover))),
        )


def _type_config(
    g: Ctx, atoms: list[Type], cfg: Config, collect: list[ProcTyping] | None
) -> list[Type]:
    match cfg:
        case CProc(e):
            r = _type_expr(g, atoms, e)
            if collect is not None:
                collect.append(ProcTyping(g, list(atoms), r))
            # leftovers must be untouched bindings of the incoming state:
            # anything modified or created belongs to this process and must
            # have been consumed (T-Exp ends in the empty state)
            leftovers = r.post
            remaining = list(atoms)
            for a in leftovers:
                for i, b in enumerate(remaining):
                    if conv(a, b):
                        del remaining[i]
                        break
                else:
                    raise TypecheckError(
                        "T-Exp",
                        "process ends with leftover state of its own",
                        cfg.span,
                        state=pretty(normalize(state_of_atoms(r.post))),
                    )
            return leftovers

        case CPar(l, r):
            mid = _type_config(g, atoms, l, collect)
            return _type_config(g, mid, r, collect)

        case CNuChan(end1, end2, ses, body, closed):
            _kind_check(g, ses, KSession(), "T-NuChan", cfg.span)
            nses = normalize(ses)
            g2 = disjoint_append(
                disjoint_append(g, (BTVar(end1, KDom(ShOne())),)),
                (BTVar(end2, KDom(ShOne())),),
            )
            if closed:
                return _type_config(g2, atoms, body, collect)
            extra = [StBind(TVar(end1), nses), StBind(TVar(end2), dual(nses))]
            leftover = _type_config(g2, atoms + extra, body, collect)
            untouched = []
            kept: list[Type] = []
            for a in leftover:
                if any(conv(a, x) for x in extra):
                    untouched.append(a)
                else:
                    kept.append(a)
            # either both ends were consumed (channel exercised and closed),
            # or neither was (the closed reading: no state contribution)
            if untouched and not (len(untouched) == 2 and isinstance(nses, TEnd)):
                raise TypecheckError(
                    "T-NuChan",
                    "channel binder requires both ends to be consumed",
                    cfg.span,
                    state=pretty(normalize(state_of_atoms(untouched))),
                )
            ends = {end1.uid, end2.uid}
            for a in kept:
                if {n.uid for n in free_vars(a)} & ends:
                    raise TypecheckError(
                        "T-NuChan",
                        "channel escapes its binder",
                        cfg.span,
                        state=pretty(normalize(a)),
                    )
            return kept

        case CNuAccess(binder, ses, body):
            _kind_check(g, ses, KSession(), "T-NuAccess", cfg.span)
            g2 = g + (BVal(binder, TAccess(normalize(ses))),)
            return _type_config(g2, atoms, body, collect)

    raise TypecheckError("T-Exp", f"cannot type configuration {cfg!r}", cfg.span)
