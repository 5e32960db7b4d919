"""Operational semantics: expression reduction, congruence-based redex
search over configurations, a deterministic scheduler, and the final /
deadlock classifiers.

The redex search flattens each binder scope into its parallel processes
(associativity/commutativity/unit of parallel composition), treats the two
channel ends symmetrically (channel-name swap), and inserts new binders
directly under the governing one (scope extrusion); this is exactly the
congruence closure the reduction rules assume.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .anf import flatten_lets
from .ast import (
    Config,
    CNuAccess,
    CNuChan,
    CPar,
    CProc,
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
    Label,
    Name,
    TEnd,
    TRecv,
    TSend,
    TChoice,
    TBranch,
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
    subst1,
)
from .normalize import conv, normalize
from .pretty import pretty

Path = tuple[str, ...]  # 'left' | 'right' | 'body' steps from the root


# ---------------------------------------------------------------------------
# expression reduction (single evaluation context: the let-header hole)
# ---------------------------------------------------------------------------


def _value_domains(v: Value) -> Type | None:
    """The domain aggregate a value's channels form, read off structurally."""
    match v:
        case VChan(d):
            return d
        case VUnit():
            from .ast import DomZero

            return DomZero()
        case VPair(l, r):
            dl, dr = _value_domains(l), _value_domains(r)
            if dl is not None and dr is not None:
                from .ast import DomMerge

                return DomMerge(dl, dr)
            return None
        case _:
            return None


def _resolve_exnames(e: ELet, value: Value) -> Expr:
    """Discharge `let [c] x = v in body` by instantiating the named
    existential with the value's concrete domain (single-name form only)."""
    if len(e.exnames) == 1:
        d = _value_domains(value)
        if d is not None:
            body = subst1(e.exnames[0], d, e.body)
            return ELet(e.binder, EVal(value), body, span=e.span)
    return e


def step_expr(e: Expr) -> Expr | None:
    """One expression-level step, or None when no redex exists."""
    match e:
        case ELet(binder, EVal(v), body):
            if e.exnames:
                resolved = _resolve_exnames(e, v)
                if resolved is not e:
                    return flatten_lets(
                        subst1(resolved.binder, v, resolved.body)
                    )
            return flatten_lets(subst1(binder, v, body))
        case ELet(binder, head, body):
            h = step_expr(head)
            if h is None:
                return None
            return flatten_lets(ELet(binder, h, body, exnames=e.exnames))
        case EApp(VAbs(_, binder, _, fbody), arg):
            return flatten_lets(subst1(binder, arg, fbody))
        case EProj(lab, VPair(l, r)):
            return EVal(l if lab is Label.L1 else r)
        case ETApp(VTAbs(binder, _, _, vbody), ty):
            return EVal(subst1(binder, ty, vbody))
        case _:
            return None


def classify_expr(e: Expr) -> str:
    """'value' | 'comm' | 'reducible' (total; unspecified on ill-typed input)."""
    if isinstance(e, EVal):
        return "value"
    if _is_comm(e):
        return "comm"
    return "reducible"


def _is_comm(e: Expr) -> bool:
    match e:
        case EFork(VAbs()):
            return True
        case ENew(_) | EAccept(_) | ERequest(_):
            return True
        case ESend(_, VChan(_)) | ERecv(VChan(_)) | ESelect(_, VChan(_)) | EClose(VChan(_)):
            return True
        case ECase(VChan(_), _, _):
            return True
        case ELet(_, head, _):
            return _is_comm(head)
        case _:
            return False


def split_eval(e: Expr) -> tuple[Expr, Callable[[Expr], Expr]] | None:
    """The header redex position of e and its plug function; None for values."""
    match e:
        case EVal(_):
            return None
        case ELet(binder, head, body):

            def plug(h: Expr, e=e) -> Expr:
                if e.exnames and isinstance(h, EVal):
                    resolved = _resolve_exnames(
                        ELet(e.binder, h, e.body, exnames=e.exnames, span=e.span), h.value
                    )
                    if resolved.exnames == ():
                        return flatten_lets(resolved)
                return flatten_lets(
                    ELet(e.binder, h, e.body, exnames=e.exnames, span=e.span)
                )

            return head, plug
        case _:
            return e, lambda h: flatten_lets(h)


# ---------------------------------------------------------------------------
# configuration traversal
# ---------------------------------------------------------------------------


def iter_procs(cfg: Config, path: Path = ()) -> Iterator[tuple[Path, Expr]]:
    match cfg:
        case CProc(e):
            yield path, e
        case CPar(l, r):
            yield from iter_procs(l, path + ("left",))
            yield from iter_procs(r, path + ("right",))
        case CNuChan(_, _, _, body, _):
            yield from iter_procs(body, path + ("body",))
        case CNuAccess(_, _, body):
            yield from iter_procs(body, path + ("body",))


def iter_binders(cfg: Config, path: Path = ()) -> Iterator[tuple[Path, Config]]:
    match cfg:
        case CNuChan(_, _, _, body, _) | CNuAccess(_, _, body):
            yield path, cfg
            yield from iter_binders(body, path + ("body",))
        case CPar(l, r):
            yield from iter_binders(l, path + ("left",))
            yield from iter_binders(r, path + ("right",))
        case _:
            return


def get_at(cfg: Config, path: Path) -> Config:
    for step in path:
        cfg = getattr(cfg, step if step != "body" else "body")
    return cfg


def replace_at(cfg: Config, path: Path, new: Config) -> Config:
    if not path:
        return new
    step = path[0]
    return dataclasses.replace(cfg, **{step: replace_at(getattr(cfg, step), path[1:], new)})


def replace_proc(cfg: Config, path: Path, new_expr: Expr) -> Config:
    return replace_at(cfg, path, CProc(new_expr))


# ---------------------------------------------------------------------------
# redexes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    rule: str
    priority: int
    describe: str
    apply: Callable[[Config], Config] = field(compare=False)


_PRIORITY = {
    "CR-Expr": 0,
    "CR-Fork": 1,
    "CR-New": 2,
    "CR-RequestAccept": 3,
    "CR-SendRecv": 4,
    "CR-SelectCase": 5,
    "CR-Close": 6,
}


def _is_end(dom: Type, end: Name) -> bool:
    return conv(dom, TVar(end))


def find_candidates(cfg: Config) -> list[Candidate]:
    out: list[Candidate] = []
    procs = list(iter_procs(cfg))

    # CR-Expr / CR-Fork / CR-New per process
    for path, e in procs:
        stepped = step_expr(e)
        if stepped is not None:
            out.append(
                Candidate(
                    "CR-Expr",
                    _PRIORITY["CR-Expr"],
                    pretty(split_eval(e)[0]) if split_eval(e) else pretty(e),
                    lambda c, p=path, s=stepped: replace_proc(c, p, s),
                )
            )
        hole = split_eval(e)
        if hole is None:
            continue
        op, plug = hole
        match op:
            case EFork(v):
                def apply_fork(c: Config, p=path, plug=plug, v=v) -> Config:
                    cont = CProc(plug(EVal(VUnit())))
                    child = CProc(EApp(v, VUnit()))
                    return replace_at(c, p, CPar(cont, child))

                out.append(Candidate("CR-Fork", _PRIORITY["CR-Fork"], pretty(op), apply_fork))
            case ENew(ses):
                def apply_new(c: Config, p=path, plug=plug, ses=ses) -> Config:
                    ap = fresh_name("p")
                    return replace_at(c, p, CNuAccess(ap, ses, CProc(plug(EVal(VVar(ap))))))

                out.append(Candidate("CR-New", _PRIORITY["CR-New"], pretty(op), apply_new))

    # communication rules per governing binder
    for bpath, binder in iter_binders(cfg):
        inner = [
            (path, e, split_eval(e))
            for path, e in iter_procs(get_at(cfg, bpath + ("body",)) if False else binder.body, bpath + ("body",))
        ]
        holes = [(p, e, h[0], h[1]) for p, e, h in inner if h is not None]
        if isinstance(binder, CNuAccess):
            x = binder.binder
            reqs = [
                (p, op, plug)
                for p, e, op, plug in holes
                if isinstance(op, ERequest) and isinstance(op.value, VVar) and op.value.name.uid == x.uid
            ]
            accs = [
                (p, op, plug)
                for p, e, op, plug in holes
                if isinstance(op, EAccept) and isinstance(op.value, VVar) and op.value.name.uid == x.uid
            ]
            for rp, rop, rplug in reqs:
                for ap_, aop, aplug in accs:
                    if rp == ap_:
                        continue

                    def apply_ra(
                        c: Config, bp=bpath, rp=rp, ap=ap_, rplug=rplug, aplug=aplug
                    ) -> Config:
                        nacc = get_at(c, bp)
                        c1 = fresh_name("c")
                        c2 = fresh_name("c")
                        rel_r, rel_a = rp[len(bp) + 1 :], ap[len(bp) + 1 :]
                        body = nacc.body
                        body = replace_proc(body, rel_a, aplug(EVal(VChan(TVar(c1)))))
                        body = replace_proc(body, rel_r, rplug(EVal(VChan(TVar(c2)))))
                        wrapped = CNuChan(c1, c2, nacc.ses, body)
                        return replace_at(c, bp, dataclasses.replace(nacc, body=wrapped))

                    out.append(
                        Candidate(
                            "CR-RequestAccept",
                            _PRIORITY["CR-RequestAccept"],
                            f"request {x.text} | accept {x.text}",
                            apply_ra,
                        )
                    )
        elif isinstance(binder, CNuChan) and not binder.closed:
            e1, e2 = binder.end1, binder.end2
            ends = (e1, e2)

            def end_of(dom: Type) -> Name | None:
                for end in ends:
                    if _is_end(dom, end):
                        return end
                return None

            sends, recvs, selects, cases, closes = [], [], [], [], []
            for p, e, op, plug in holes:
                match op:
                    case ESend(payload, VChan(dom)) if end_of(dom) is not None:
                        sends.append((p, end_of(dom), payload, plug, op))
                    case ERecv(VChan(dom)) if end_of(dom) is not None:
                        recvs.append((p, end_of(dom), plug, op))
                    case ESelect(lab, VChan(dom)) if end_of(dom) is not None:
                        selects.append((p, end_of(dom), lab, plug, op))
                    case ECase(VChan(dom), bl, br) if end_of(dom) is not None:
                        cases.append((p, end_of(dom), bl, br, plug, op))
                    case EClose(VChan(dom)) if end_of(dom) is not None:
                        closes.append((p, end_of(dom), plug, op))

            def advance(ses: Type) -> Type:
                h = normalize(ses)
                if isinstance(h, (TSend, TRecv)):
                    return h.cont
                return ses

            def pick(ses: Type, lab: Label) -> Type:
                h = normalize(ses)
                if isinstance(h, (TChoice, TBranch)):
                    return h.left if lab is Label.L1 else h.right
                return ses

            for sp_, send_end, payload, splug, sop in sends:
                for rp_, recv_end, rplug, rop in recvs:
                    if send_end.uid == recv_end.uid or sp_ == rp_:
                        continue

                    def apply_sr(
                        c: Config, bp=bpath, sp=sp_, rp=rp_, splug=splug, rplug=rplug, payload=payload
                    ) -> Config:
                        nu = get_at(c, bp)
                        body = nu.body
                        body = replace_proc(body, sp[len(bp) + 1 :], splug(EVal(VUnit())))
                        body = replace_proc(body, rp[len(bp) + 1 :], rplug(EVal(payload)))
                        return replace_at(
                            c, bp, dataclasses.replace(nu, ses=advance(nu.ses), body=body)
                        )

                    out.append(
                        Candidate(
                            "CR-SendRecv",
                            _PRIORITY["CR-SendRecv"],
                            f"{pretty(sop)} | {pretty(rop)}",
                            apply_sr,
                        )
                    )
            for sp_, sel_end, lab, splug, sop in selects:
                for cp_, case_end, bl, br, cplug, cop in cases:
                    if sel_end.uid == case_end.uid or sp_ == cp_:
                        continue

                    def apply_sc(
                        c: Config, bp=bpath, sp=sp_, cp=cp_, splug=splug, cplug=cplug, lab=lab, bl=bl, br=br
                    ) -> Config:
                        nu = get_at(c, bp)
                        body = nu.body
                        chosen = bl if lab is Label.L1 else br
                        body = replace_proc(body, sp[len(bp) + 1 :], splug(EVal(VUnit())))
                        body = replace_proc(body, cp[len(bp) + 1 :], cplug(chosen))
                        return replace_at(
                            c, bp, dataclasses.replace(nu, ses=pick(nu.ses, lab), body=body)
                        )

                    out.append(
                        Candidate(
                            "CR-SelectCase",
                            _PRIORITY["CR-SelectCase"],
                            f"{pretty(sop)} | {pretty(cop)}",
                            apply_sc,
                        )
                    )
            for i, (p1, end_a, plug_a, op_a) in enumerate(closes):
                for p2, end_b, plug_b, op_b in closes[i + 1 :]:
                    if end_a.uid == end_b.uid or p1 == p2:
                        continue

                    def apply_close(
                        c: Config, bp=bpath, p1=p1, p2=p2, plug_a=plug_a, plug_b=plug_b
                    ) -> Config:
                        nu = get_at(c, bp)
                        body = nu.body
                        body = replace_proc(body, p1[len(bp) + 1 :], plug_a(EVal(VUnit())))
                        body = replace_proc(body, p2[len(bp) + 1 :], plug_b(EVal(VUnit())))
                        return replace_at(c, bp, dataclasses.replace(nu, closed=True, body=body))

                    out.append(
                        Candidate(
                            "CR-Close",
                            _PRIORITY["CR-Close"],
                            f"{pretty(op_a)} | {pretty(op_b)}",
                            apply_close,
                        )
                    )

    out.sort(key=lambda c: c.priority)
    return out


# ---------------------------------------------------------------------------
# classification (final / deadlock / reducible)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockedSite:
    path: Path
    operation: str
    subject: str  # pretty channel end or access point

    def __str__(self) -> str:
        return f"{self.operation} on {self.subject}"


@dataclass(frozen=True)
class DeadlockReport:
    blocked: tuple[BlockedSite, ...]

    def __str__(self) -> str:
        return "; ".join(str(b) for b in self.blocked)


def is_final(cfg: Config) -> bool:
    match cfg:
        case CProc(e):
            return isinstance(e, EVal)
        case CPar(l, r):
            return is_final(l) and is_final(r)
        case CNuAccess(_, _, body):
            return is_final(body)
        case CNuChan(_, _, ses, body, closed):
            return (closed or isinstance(normalize(ses), TEnd)) and is_final(body)
    return False


def _blocked_site(path: Path, e: Expr) -> BlockedSite | None:
    hole = split_eval(e)
    if hole is None:
        return None
    op, _ = hole
    match op:
        case EAccept(v):
            return BlockedSite(path, "accept", pretty(v))
        case ERequest(v):
            return BlockedSite(path, "request", pretty(v))
        case ESend(_, VChan(d)):
            return BlockedSite(path, "send", pretty(d))
        case ERecv(VChan(d)):
            return BlockedSite(path, "recv", pretty(d))
        case ESelect(_, VChan(d)):
            return BlockedSite(path, "select", pretty(d))
        case ECase(VChan(d), _, _):
            return BlockedSite(path, "case", pretty(d))
        case EClose(VChan(d)):
            return BlockedSite(path, "close", pretty(d))
    return None


def classify_config(cfg: Config):
    """'final' | ('deadlock', DeadlockReport) | 'reducible', per the paper's
    predicates: deadlocked iff every process is a value or blocked on a
    communication (not fork/new) and no matchable pair exists."""
    if is_final(cfg):
        return "final"
    blocked: list[BlockedSite] = []
    for path, e in iter_procs(cfg):
        cls = classify_expr(e)
        if cls == "value":
            continue
        if cls != "comm":
            return "reducible"
        hole = split_eval(e)
        op = hole[0] if hole else None
        if isinstance(op, (EFork, ENew)):
            return "reducible"
        site = _blocked_site(path, e)
        if site is not None:
            blocked.append(site)
    if any(c.rule != "CR-Expr" for c in find_candidates(cfg)):
        return "reducible"
    return ("deadlock", DeadlockReport(tuple(blocked)))


# ---------------------------------------------------------------------------
# the machine
# ---------------------------------------------------------------------------


@dataclass
class StepOutcome:
    kind: str  # 'stepped' | 'final' | 'deadlock' | 'out-of-fuel'
    config: Config
    rule: str | None = None
    report: DeadlockReport | None = None


@dataclass
class Machine:
    config: Config
    max_steps: int = 100_000
    seed: int = 0
    steps: int = 0
    trace: list[str] = field(default_factory=list)
    _rng: random.Random | None = None

    def __post_init__(self) -> None:
        self._rng = random.Random(self.seed)

    def step(self) -> StepOutcome:
        cls = classify_config(self.config)
        if cls == "final":
            return StepOutcome("final", self.config)
        if isinstance(cls, tuple):
            return StepOutcome("deadlock", self.config, report=cls[1])
        if self.steps >= self.max_steps:
            return StepOutcome("out-of-fuel", self.config)
        cands = find_candidates(self.config)
        if not cands:
            # stuck without being a paper deadlock: only reachable off the
            # well-typed fragment; report as deadlock with no sites
            return StepOutcome("deadlock", self.config, report=DeadlockReport(()))
        idx = 0 if self.seed == 0 else self._rng.randrange(len(cands))
        chosen = cands[idx]
        self.config = chosen.apply(self.config)
        self.trace.append(f"{self.steps}\t{chosen.rule}\t{chosen.describe}")
        self.steps += 1
        return StepOutcome("stepped", self.config, rule=chosen.rule)

    def run(self) -> StepOutcome:
        while True:
            out = self.step()
            if out.kind != "stepped":
                return out


def run_expr(e: Expr, max_steps: int = 100_000, seed: int = 0) -> StepOutcome:
    return Machine(CProc(e), max_steps=max_steps, seed=seed).run()
