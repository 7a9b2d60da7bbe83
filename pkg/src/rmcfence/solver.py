"""Exact minimization over the placement formula.

Branch-and-bound DFS over output variables in canonical order, trying
False before True. The formula is monotone in the outputs, which gives
two strong moves: if the current partial assignment already satisfies
everything with the rest False, that completion is the subtree's best;
if even setting the rest True fails, the subtree is dead. With
strict >=-pruning the first optimum found is the lexicographically
smallest one, so results are deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from . import encode


class Unsatisfiable(Exception):
    """Even the all-devices assignment fails: the encoding is broken."""


class BudgetExceeded(Exception):
    def __init__(self, incumbent):
        self.incumbent = incumbent
        super().__init__("solve budget exhausted")


@dataclass(frozen=True)
class Assignment:
    true_vars: frozenset
    cost: int
    optimal: bool = True
    decisions: int = 0


def solve_min(problem, budget_ms=None):
    """Cheapest satisfying assignment of the output variables.

    Raises Unsatisfiable if no assignment works (a bug upstream) and
    BudgetExceeded (carrying the best incumbent, possibly None) when
    budget_ms runs out.
    """
    outputs = problem.outputs
    all_vars = frozenset(outputs)
    if not encode.satisfies(problem, all_vars):
        raise Unsatisfiable(
            f"{problem.function}/{problem.arch}: constraints uncuttable with every device placed"
        )
    deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0

    best = None  # Assignment
    decisions = 0

    def search(i, trues):
        nonlocal best, decisions
        decisions += 1
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded(best)
        cost = problem.objective(trues)
        if best is not None and cost >= best.cost:
            return
        if encode.satisfies(problem, trues):
            best = Assignment(frozenset(trues), cost)
            return
        if i == len(outputs):
            return
        rest = trues | frozenset(outputs[i:])
        if not encode.satisfies(problem, rest):
            return
        search(i + 1, trues)
        search(i + 1, trues | {outputs[i]})

    try:
        search(0, frozenset())
    except BudgetExceeded as exc:
        if exc.incumbent is not None:
            raise BudgetExceeded(replace(exc.incumbent, decisions=decisions)) from None
        raise
    assert best is not None  # all-true satisfied, so something must
    return replace(best, decisions=decisions)
