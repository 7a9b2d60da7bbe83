import random

import pytest

from rmcfence import encode, solver
from conftest import ARCHES, CORPUS_NAMES, analyze_corpus


def _all_problems(arch_name):
    for name in CORPUS_NAMES:
        for a in analyze_corpus(name, arch_name):
            yield name, a


@pytest.mark.parametrize("arch_name", ARCHES)
def test_all_devices_always_suffice(arch_name):
    """The formula is satisfiable by construction: turning every output
    on must satisfy every assertion on every program."""
    for name, a in _all_problems(arch_name):
        trues = frozenset(a.problem.outputs)
        assert encode.satisfies(a.problem, trues), (name, a.func.name)


@pytest.mark.parametrize("arch_name", ("armv7", "armv8", "power"))
def test_monotone_in_outputs(arch_name):
    rng = random.Random(11)
    for name, a in _all_problems(arch_name):
        outputs = a.problem.outputs
        for _ in range(10):
            small = frozenset(v for v in outputs if rng.random() < 0.5)
            big = small | frozenset(v for v in outputs if rng.random() < 0.5)
            if encode.satisfies(a.problem, small):
                assert encode.satisfies(a.problem, big), (name, a.func.name)


def test_x86_produces_no_variables_without_pushes():
    for name, a in _all_problems("x86"):
        if name == "sb_push":
            assert a.problem.outputs
            assert all(v.detail[0] == "mfence" for v in a.problem.outputs)
        else:
            assert a.problem.outputs == []
            assert encode.satisfies(a.problem, frozenset())


def test_objective_costs_positive_and_grouped():
    for name, a in _all_problems("armv8"):
        covered = set()
        for w, group in a.problem.cost_terms:
            assert w >= 1
            assert group
            assert not (group & covered), "each output is charged exactly once"
            covered |= group
        assert covered == set(a.problem.outputs)


def test_data_uses_share_one_cost_term():
    (a,) = [x for n, x in _all_problems("armv7") if x.func.name == "use_widget" and n == "widget"]
    groups = [g for _w, g in a.problem.cost_terms if any(v.kind == "use_data" for v in g)]
    # one group per (scope, source, target) pair, charged once regardless of paths
    assert len(groups) == 2
    for w, g in a.problem.cost_terms:
        if any(v.kind == "use_data" for v in g):
            assert w == a.costs.dep("data_existing")


def test_disabling_dependencies_never_cheapens():
    for name in ("widget", "ringbuf", "selfdep", "mp"):
        for arch_name in ("armv7", "armv8"):
            base = analyze_corpus(name, arch_name)
            nodata = analyze_corpus(name, arch_name, data_deps=False)
            noctrl = analyze_corpus(name, arch_name, ctrl_deps=False)
            for b, nd, nc in zip(base, nodata, noctrl):
                c0 = solver.solve_min(b.problem).cost
                assert solver.solve_min(nd.problem).cost >= c0
                assert solver.solve_min(nc.problem).cost >= c0


def test_cyclic_definitions_take_greatest_fixpoint():
    v = encode.OutputVar("barrier", ("k", "a", "b"))
    problem = encode.Problem(
        function="t",
        arch="none",
        outputs=[v],
        defs={"x": ("or", (("out", v), ("def", "y"))), "y": ("def", "x")},
        asserts=[("cycle", ("def", "x"))],
        cost_terms=[(1, frozenset([v]))],
        paths={},
    )
    # A cycle with no grounded support still self-justifies under the
    # greatest fixpoint — the coinductive reading the rules rely on.
    assert encode.satisfies(problem, frozenset())


def test_acyclic_definitions_stay_grounded():
    v = encode.OutputVar("barrier", ("k", "a", "b"))
    problem = encode.Problem(
        function="t",
        arch="none",
        outputs=[v],
        defs={"x": ("or", (("out", v),))},
        asserts=[("need", ("def", "x"))],
        cost_terms=[(1, frozenset([v]))],
        paths={},
    )
    assert not encode.satisfies(problem, frozenset())
    assert encode.satisfies(problem, frozenset([v]))


def test_self_cycles_force_extra_cuts_when_unscoped():
    scoped = analyze_corpus("widget", "armv7")
    unscoped = analyze_corpus("widget_unscoped", "armv7")
    s = next(a for a in scoped if a.func.name == "use_widget")
    u = next(a for a in unscoped if a.func.name == "use_widget")
    assert solver.solve_min(s.problem).cost < solver.solve_min(u.problem).cost


def test_output_order_is_canonical():
    for name, a in _all_problems("armv8"):
        assert a.problem.outputs == sorted(a.problem.outputs)


def test_overlap_armv7_outputs_are_the_interior_edges():
    # Straight-line code with four writes: three interior edges between
    # the ordered actions, one barrier kind, no usable dependencies.
    (a,) = analyze_corpus("overlap", "armv7")
    outs = a.problem.outputs
    assert len(outs) == 3
    assert all(v.kind == "barrier" and v.detail[0] == "dmb" for v in outs)
