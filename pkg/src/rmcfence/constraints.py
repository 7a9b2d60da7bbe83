"""Constraint-edge resolution and transitive closure.

Tags expand to Cartesian products of their action sets; pre/post become
boundary constraints on a single action's CFG neighborhood. Closure
composes edges through no-op actions (strength join pu > vo > xo) and
drops every edge with a no-op endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Diagnostic, RESERVED_TAGS

STRENGTH = {"xo": 0, "vo": 1, "pu": 2}


class ConstraintError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class ConstraintEdge:
    kind: str  # vo | xo | pu
    src: str  # action id
    dst: str  # action id
    bind: "str | None" = None  # binding block id, None when unscoped
    origin: str = "declared"  # declared | derived
    chain: tuple = ()  # derived: the declared (kind, src, dst) steps

    def key(self):
        return (self.kind, self.src, self.dst, self.bind)


@dataclass(frozen=True)
class BoundaryConstraint:
    kind: str  # vo | xo
    direction: str  # "pre": everything before must order against `action`;
    #                 "post": `action` orders against everything after
    action: str


def tag_actions(func):
    out = {}
    for blk in func.blocks.values():
        for ins in blk.instrs:
            labels = getattr(ins, "labels", ())
            for t in labels:
                out.setdefault(t, []).append(ins.id)
    return out


def resolve(func, cfg):
    """Expand declarations into concrete edges and boundary constraints."""
    tags = tag_actions(func)
    edges, boundaries, diags = [], [], []
    seen = set()
    for decl in func.decls:
        if decl.src == "pre" or decl.dst == "post":
            if decl.kind == "pu":
                diags.append(
                    Diagnostic(0, 0, f"{func.name}: pu edges do not support pre/post")
                )
                continue
            tag = decl.dst if decl.src == "pre" else decl.src
            direction = "pre" if decl.src == "pre" else "post"
            for a in tags.get(tag, []):
                boundaries.append(BoundaryConstraint(decl.kind, direction, a))
            continue
        bind_block = cfg.bind_block[decl.bind] if decl.bind else None
        for s in tags.get(decl.src, []):
            for t in tags.get(decl.dst, []):
                e = ConstraintEdge(decl.kind, s, t, bind_block)
                if e.key() not in seen:
                    seen.add(e.key())
                    edges.append(e)
    if diags:
        raise ConstraintError(diags)
    return edges, boundaries


def close(edges, actions):
    """Transitive closure with no-op elimination.

    Composition requires equal binding blocks (or both unscoped) and joins
    kinds to the stronger (pu > vo > xo). Retained: input edges between
    non-noop actions, plus derived edges between non-noop actions whose
    every known justification passes through at least one noop (noop-free
    derivations make an edge redundant).
    """
    is_noop = lambda a: actions[a].kind == "noop"

    # key -> record {input, plain (noop-free derivation), noop, chain}
    recs = {}

    def add(key, *, inp=False, plain=False, noop=False, chain=()):
        r = recs.get(key)
        if r is None:
            r = {"input": False, "plain": False, "noop": False, "chain": chain}
            recs[key] = r
        changed = False
        for name, v in (("input", inp), ("plain", plain), ("noop", noop)):
            if v and not r[name]:
                r[name] = True
                changed = True
        if noop and not r["chain"]:
            r["chain"] = chain
        return changed

    for e in edges:
        base_chain = e.chain or ((e.kind, e.src, e.dst),)
        add(e.key(), inp=True, chain=base_chain)
        recs[e.key()]["chain"] = base_chain
        recs[e.key()]["origin_edge"] = e

    changed = True
    while changed:
        changed = False
        keys = list(recs)
        by_src = {}
        for k in keys:
            by_src.setdefault(k[1], []).append(k)
        for k1 in keys:
            kind1, s, m, b1 = k1
            for k2 in by_src.get(m, []):
                kind2, _, t, b2 = k2
                if b1 != b2:
                    continue
                kind = kind1 if STRENGTH[kind1] >= STRENGTH[kind2] else kind2
                r1, r2 = recs[k1], recs[k2]
                via_noop = is_noop(m) or r1["noop"] or r2["noop"]
                # Compose along justifications that themselves survive.
                plain = not via_noop
                chain = r1["chain"] + r2["chain"]
                if add((kind, s, t, b1), plain=plain, noop=via_noop, chain=chain):
                    changed = True

    # Input edges first, in input order, so declaration order survives closure.
    out = [e for e in edges if not (is_noop(e.src) or is_noop(e.dst))]
    derived = []
    for key, r in recs.items():
        kind, s, t, b = key
        if r["input"] or is_noop(s) or is_noop(t):
            continue
        if r["noop"] and not r["plain"]:
            derived.append(
                ConstraintEdge(kind, s, t, b, origin="derived", chain=tuple(r["chain"]))
            )
    derived.sort(key=lambda e: (e.src, e.dst, -STRENGTH[e.kind], e.bind or ""))
    return out + derived
