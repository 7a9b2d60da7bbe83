import dataclasses
import random

import pytest

from rmcfence import emit, solver, verify
from conftest import ARCHES, CORPUS_NAMES, analyze_corpus, random_problem


def _solved(name, arch_name):
    for a in analyze_corpus(name, arch_name):
        asg = solver.solve_min(a.problem)
        yield a, emit.to_plan(a.problem, a.cfg, asg)


def _check(a, plan):
    return verify.check_plan(a.cfg, a.closed, a.boundaries, a.profile, plan)


def test_solver_plans_pass_the_checker():
    for name in CORPUS_NAMES:
        for arch_name in ARCHES:
            for a, plan in _solved(name, arch_name):
                assert _check(a, plan) == [], (name, a.func.name, arch_name)


def test_greedy_plans_pass_the_checker():
    for name in CORPUS_NAMES:
        for arch_name in ARCHES:
            for a in analyze_corpus(name, arch_name):
                plan = verify.greedy(a.cfg, a.closed, a.boundaries, a.profile, a.costs)
                assert _check(a, plan) == [], (name, a.func.name, arch_name)


def test_empty_plan_rejected_when_work_is_needed():
    for a in analyze_corpus("mp", "armv7"):
        empty = emit.PlacementPlan(a.func.name, "armv7", 0)
        violations = _check(a, empty)
        assert violations
        assert all(v.startswith("UNCUT") for v in violations)


def test_violations_name_the_edge_and_path():
    (a,) = analyze_corpus("overlap", "armv7")
    empty = emit.PlacementPlan("overlap", "armv7", 0)
    violations = _check(a, empty)
    assert any("vo" in v and "->" in v and "via [" in v for v in violations)


def test_mutations_are_caught():
    for name in ("mp", "overlap", "widget", "spinlock"):
        for arch_name in ("armv7", "armv8"):
            for a, plan in _solved(name, arch_name):
                for field in ("barriers", "ctrl_uses", "data_uses", "modes"):
                    items = getattr(plan, field)
                    for i in range(len(items)):
                        mutated = dataclasses.replace(plan)
                        setattr(mutated, field, items[:i] + items[i + 1 :])
                        assert _check(a, mutated), (name, a.func.name, arch_name, field)


def test_misplaced_barrier_rejected():
    (a,) = analyze_corpus("overlap", "armv7")
    # a dmb after the second ordered write cuts neither constraint
    wd_block = a.cfg.action_block[a.closed[1].dst]
    (out_edge,) = [(s, d) for s, d, _ in a.cfg.out_edges(wd_block)]
    plan = emit.PlacementPlan("overlap", "armv7", 65)
    plan.barriers.append(
        emit.BarrierPlacement("dmb", out_edge[0], out_edge[1], out_edge[0], "end")
    )
    assert _check(a, plan)


def test_greedy_is_order_sensitive_on_overlap():
    (a,) = analyze_corpus("overlap", "armv7")
    fwd = verify.greedy(a.cfg, a.closed, a.boundaries, a.profile, a.costs)
    rev = verify.greedy(a.cfg, list(reversed(a.closed)), a.boundaries, a.profile, a.costs)
    assert fwd.cost < rev.cost
    assert _check(a, rev) == []  # wasteful but still sound


def test_greedy_never_beats_the_solver():
    for name in CORPUS_NAMES:
        for arch_name in ARCHES:
            for a, plan in _solved(name, arch_name):
                gp = verify.greedy(a.cfg, a.closed, a.boundaries, a.profile, a.costs)
                assert gp.cost >= plan.cost


def test_brute_min_cap():
    rng = random.Random(0)
    p = random_problem(rng, max_vars=14)
    with pytest.raises(verify.CapExceeded):
        verify.brute_min(p, cap=2)
