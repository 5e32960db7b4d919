from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from pvgr.ast import Name, Tree, TVar, VVar, free_vars
from pvgr.parser import Parser

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def corpus_files() -> list[Path]:
    return sorted(CORPUS.glob("*.pvgr"))


def rename_free(t: Tree, mapping: dict[int, Name]) -> Tree:
    """Rename free variable occurrences by uid, preserving their category."""
    import dataclasses

    from pvgr.ast import Node

    if isinstance(t, TVar) and t.name.uid in mapping:
        return TVar(mapping[t.name.uid], span=t.span)
    if isinstance(t, VVar) and t.name.uid in mapping:
        return VVar(mapping[t.name.uid], span=t.span)
    changes = {}
    for f in dataclasses.fields(t):
        if f.name == "span":
            continue
        v = getattr(t, f.name)
        if isinstance(v, Node):
            changes[f.name] = rename_free(v, mapping)
        elif isinstance(v, tuple) and any(isinstance(x, Node) for x in v):
            changes[f.name] = tuple(
                rename_free(x, mapping) if isinstance(x, Node) else x for x in v
            )
    return dataclasses.replace(t, **changes) if changes else t


def parse_with(kind: str, src: str, free: dict[str, Name]):
    """Parse an open term and identify its free names with the given ones
    (so terms parsed separately can share free variables)."""
    p = Parser(src, open_world=True)
    if kind == "type":
        t = p.type_()
    elif kind == "expr":
        t = p.expr()
    else:
        raise ValueError(kind)
    p.eat("eof")
    mapping = {nm.uid: free[nm.text] for nm in free_vars(t) if nm.text in free}
    return rename_free(t, mapping)


@pytest.fixture
def rng():
    import random

    return random.Random(12345)
