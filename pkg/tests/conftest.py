import pathlib
import random
from types import SimpleNamespace

import pytest

from rmcfence import arch, constraints, encode, ir
from rmcfence.deps import DepAnalysis

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"
ARCHES = ("x86", "armv7", "armv8", "power")
CORPUS_NAMES = sorted(p.stem for p in CORPUS.glob("*.rmcir"))


def corpus_path(name):
    return CORPUS / f"{name}.rmcir"


def load_corpus(name):
    return corpus_path(name).read_text()


def parse_valid(text):
    funcs = ir.parse(text)
    for f in funcs:
        diags = ir.validate(f)
        assert not diags, diags
    return funcs


def analyze(func, arch_name="armv7", costs_text=None, **opt_kw):
    """Full front-half pipeline for one function."""
    cfg = ir.normalize(func)
    edges, boundaries = constraints.resolve(func, cfg)
    closed = constraints.close(edges, cfg.actions)
    profile = arch.builtin_profile(arch_name)
    costs, _ = arch.load_costs(profile, text=costs_text)
    options = encode.EncodeOptions(**opt_kw)
    problem = encode.build(cfg, closed, boundaries, DepAnalysis(cfg), profile, costs, options)
    return SimpleNamespace(
        func=func,
        cfg=cfg,
        closed=closed,
        boundaries=boundaries,
        profile=profile,
        costs=costs,
        options=options,
        problem=problem,
    )


def analyze_corpus(name, arch_name="armv7", **opt_kw):
    return [analyze(f, arch_name, **opt_kw) for f in parse_valid(load_corpus(name))]


def random_problem(rng, max_vars=14):
    """Synthetic monotone minimization problem (always satisfiable: the
    all-true assignment meets every clause)."""
    n = rng.randint(3, max_vars)
    outputs = sorted(
        encode.OutputVar("barrier", (f"k{i:02}", f"b{i:02}", f"c{i:02}")) for i in range(n)
    )
    defs = {}
    asserts = []
    for j in range(rng.randint(1, 8)):
        picks = rng.sample(outputs, rng.randint(1, min(4, n)))
        clause = ("or", tuple(("out", v) for v in picks))
        if rng.random() < 0.3:
            name = f"d{j}"
            defs[name] = clause
            clause = ("def", name)
        asserts.append((f"c{j}", clause))
    cost_terms = []
    i = 0
    while i < n:
        if rng.random() < 0.2 and i + 1 < n:
            cost_terms.append((rng.randint(1, 50), frozenset(outputs[i : i + 2])))
            i += 2
        else:
            cost_terms.append((rng.randint(1, 50), frozenset([outputs[i]])))
            i += 1
    return encode.Problem(
        function="synthetic",
        arch="none",
        outputs=outputs,
        defs=defs,
        asserts=asserts,
        cost_terms=cost_terms,
        paths={},
    )
