"""Independent validation of placement plans, plus reference baselines.

check_plan re-derives everything from scratch — its own path walk, its
own dependence walk, direct evaluation of the cut rules — so it shares
no conclusions with the encoder beyond the input structures. brute_min
is the exhaustive optimization oracle for small problems; greedy is the
deliberately simple baseline the optimizer is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import graph
from .arch import CostTable
from .emit import BarrierPlacement, PlacementPlan, edge_anchor
from .ir import Action, Branch, Phi, PureOp


class CapExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# Plan checking


class PlanChecker:
    def __init__(self, cfg, profile, plan, path_cap=graph.DEFAULT_MAX_PATHS):
        self.cfg = cfg
        self.profile = profile
        self.cap = path_cap
        self.barriers = {}  # (src, dst) -> set of kind ids
        for b in plan.barriers:
            self.barriers.setdefault((b.src, b.dst), set()).add(b.kind)
        self.ctrl_uses = {(u.source, u.src, u.dst) for u in plan.ctrl_uses}
        self.data_uses = {(u.bind, u.source, u.target) for u in plan.data_uses}
        self.modes = {(m.mode, m.action) for m in plan.modes}
        self.defs = {}
        for blk in cfg.blocks.values():
            for ins in blk.instrs:
                if getattr(ins, "defines", None):
                    self.defs[ins.defines] = ins
        self._succ = cfg.succ_all()
        self._succ_real = cfg.real_succ()
        self._pred_real = cfg.real_pred()
        self._self_memo = {}

    # -- independent path walk (recursive; cycles when a == b) --

    def paths(self, a, b, excluded=None):
        if a == excluded or b == excluded:
            return []
        found = []

        def go(here, trail):
            for nxt in self._succ[here]:
                if nxt == excluded:
                    continue
                if nxt == b:
                    found.append(trail + (nxt,))
                    if len(found) > self.cap:
                        raise graph.PathExplosion(a, b, self.cap)
                elif nxt not in trail:
                    go(nxt, trail + (nxt,))

        go(a, (a,))
        return found

    # -- independent dependence walk (coinductive: on-stack counts as yes) --

    def depends(self, src_action, operand, region, stack=frozenset()):
        if not isinstance(operand, str):
            return False
        ins = self.defs.get(operand)
        if ins is None:
            return False
        if isinstance(ins, Action):
            return ins is src_action
        if operand in stack:
            return True
        st = stack | {operand}
        if isinstance(ins, PureOp):
            return any(self.depends(src_action, a, region, st) for a in ins.args)
        if isinstance(ins, Phi):
            arms = [o for p, o in ins.arms if p in region]
            return bool(arms) and all(self.depends(src_action, o, region, st) for o in arms)
        return False

    def region_of(self, path, bind):
        grow = lambda start, nbr: self._grow(start, nbr, bind)
        fwd = grow(path[0], self._succ_real)
        bwd = grow(path[-1], self._pred_real)
        return (fwd & bwd) | set(path)

    def _grow(self, start, nbr, avoid):
        out, todo = set(), [start]
        while todo:
            x = todo.pop()
            if x in out or x == avoid:
                continue
            out.add(x)
            todo.extend(nbr[x])
        return out

    # -- direct rule evaluation --

    def _edge_kinds(self, e):
        return self.barriers.get(e, set())

    def _has(self, e, pred):
        return any(pred(self.profile.kind(k)) for k in self._edge_kinds(e))

    def vo_path_cut(self, path, t_action):
        if self.profile.vis_exec_free:
            return True
        for e in zip(path, path[1:]):
            if self._has(e, lambda k: k.cuts_vis):
                return True
        return t_action.is_write and ("release", t_action.id) in self.modes

    def pu_path_cut(self, path):
        return any(
            self._has(e, lambda k: k.cuts_push) for e in zip(path, path[1:])
        )

    def xo_path_cut(self, bind, s_action, t_action, path, assume_self=False):
        if self.profile.vis_exec_free:
            return True
        if self.vo_path_cut(path, t_action):
            return True
        reads = s_action.reads_value
        for e in zip(path, path[1:]):
            if self._has(e, lambda k: k.cuts_exec_any or (reads and k.cuts_exec_from_read)):
                return True
        if reads and ("acquire", s_action.id) in self.modes:
            return True
        if not reads:
            return False
        if t_action.is_write:
            for e in zip(path, path[1:]):
                if (s_action.id, e[0], e[1]) in self.ctrl_uses and self._branch_dep(
                    s_action, e[0]
                ):
                    if assume_self or self._self_ordered(bind, s_action, allow_ctrl=True):
                        return True
        key = (bind if bind is not None else "-", s_action.id, t_action.id)
        if key in self.data_uses and self._data_dep(bind, s_action, t_action, path):
            if assume_self or self._self_ordered(bind, s_action, allow_ctrl=False):
                return True
        return False

    def _branch_dep(self, s_action, block):
        term = self.cfg.blocks[block].term
        return isinstance(term, Branch) and self.depends(
            s_action, term.cond, set(self.cfg.blocks)
        )

    def _data_dep(self, bind, s_action, t_action, path):
        region = self.region_of(path, bind)
        targets = []
        if t_action.address_operand is not None:
            targets.append(t_action.address_operand)
        if t_action.kind in ("write", "rmw"):
            targets.append(t_action.data)
        return any(self.depends(s_action, o, region) for o in targets)

    def _self_ordered(self, bind, s_action, allow_ctrl):
        """xcut(b,s,s) — or, for the ctrl route, ctrl(b,s,s) as well.

        Coinductive: a cycle may justify its own ordering, so evaluate the
        cycle paths assuming the answer is yes and accept if that holds.
        """
        sblk = self.cfg.action_block[s_action.id]
        key = (bind, s_action.id, allow_ctrl)
        hit = self._self_memo.get(key)
        if hit is not None:
            return hit
        cycles = self.paths(sblk, sblk, excluded=bind)
        if allow_ctrl:
            ctrl_ok = all(
                any(
                    (s_action.id, e[0], e[1]) in self.ctrl_uses and self._branch_dep(s_action, e[0])
                    for e in zip(p, p[1:])
                )
                for p in cycles
            )
            if ctrl_ok:
                self._self_memo[key] = True
                return True
        ok = all(
            self.xo_path_cut(bind, s_action, s_action, p, assume_self=True) for p in cycles
        )
        self._self_memo[key] = ok
        return ok


def _fmt_path(path):
    return "[" + ",".join(path) + "]"


def check_plan(cfg, edges, boundaries, profile, plan, path_cap=graph.DEFAULT_MAX_PATHS):
    """Violation strings for every constraint the plan fails to enforce."""
    ck = PlanChecker(cfg, profile, plan, path_cap)
    out = []
    for edge in edges:
        s_action = cfg.actions[edge.src]
        t_action = cfg.actions[edge.dst]
        sblk = cfg.action_block[edge.src]
        tblk = cfg.action_block[edge.dst]
        for path in ck.paths(sblk, tblk, excluded=edge.bind):
            if edge.kind == "pu":
                ok = ck.pu_path_cut(path)
            elif edge.kind == "vo":
                ok = ck.vo_path_cut(path, t_action)
            else:
                ok = ck.xo_path_cut(edge.bind, s_action, t_action, path)
            if not ok:
                out.append(f"UNCUT {edge.kind} {edge.src}->{edge.dst} via {_fmt_path(path)}")
    for bc in boundaries:
        action = cfg.actions[bc.action]
        blk = cfg.action_block[bc.action]
        if profile.vis_exec_free:
            continue
        sides = cfg.in_edges(blk) if bc.direction == "pre" else cfg.out_edges(blk)
        for s, d, _ in sides:
            e = (s, d)
            if bc.kind == "vo":
                ok = ck._has(e, lambda k: k.cuts_vis) or (
                    bc.direction == "pre"
                    and action.is_write
                    and ("release", action.id) in ck.modes
                )
            else:
                reads = action.reads_value and bc.direction == "post"
                ok = ck._has(
                    e, lambda k: k.cuts_exec_any or (reads and k.cuts_exec_from_read)
                ) or (reads and ("acquire", action.id) in ck.modes)
            if not ok:
                out.append(f"UNCUT {bc.direction}({bc.kind}) {bc.action} at {s}->{d}")
    return out


# ---------------------------------------------------------------------------
# Exhaustive oracle


def brute_min(problem, cap=16):
    """Cheapest satisfying assignment by trying every subset. Small inputs only."""
    from . import encode
    from .solver import Assignment

    outputs = problem.outputs
    if len(outputs) > cap:
        raise CapExceeded(f"{len(outputs)} output variables exceeds brute-force cap {cap}")
    best = None
    for mask in range(1 << len(outputs)):
        trues = frozenset(v for i, v in enumerate(outputs) if mask >> i & 1)
        cost = problem.objective(trues)
        if best is not None and cost >= best.cost:
            continue
        if encode.satisfies(problem, trues):
            best = Assignment(trues, cost)
    return best


# ---------------------------------------------------------------------------
# Greedy baseline


def greedy(cfg, edges, boundaries, profile, costs):
    """Barrier-only baseline: walk constraints in order, and when one is
    not yet enforced by barriers already placed, drop the cheapest
    sufficient barrier kind on every in-edge of the destination block
    (in-/out-edges of the action block for boundaries). Never uses
    dependencies or modes."""
    weights = graph.edge_weights(cfg, costs.loop_factor)
    placed = {}  # (src, dst) -> set of kinds

    def capability(kind, s_action):
        if kind == "pu":
            return "cuts_push"
        if kind == "vo":
            return "cuts_vis"
        return "cuts_exec_from_read" if s_action.reads_value else "cuts_exec_any"

    def cheapest(cap_name):
        kinds = profile.kinds_cutting(cap_name)
        if not kinds:
            return None
        return min(kinds, key=lambda k: (costs.kind(k.id), k.id)).id

    def cut(path, cap_name):
        return any(
            any(getattr(profile.kind(k), cap_name) for k in placed.get(e, ()))
            for e in zip(path, path[1:])
        )

    def place(e, kind_id):
        placed.setdefault(e, set()).add(kind_id)

    for edge in edges:
        s_action = cfg.actions[edge.src]
        if profile.vis_exec_free and edge.kind != "pu":
            continue
        cap_name = capability(edge.kind, s_action)
        sblk = cfg.action_block[edge.src]
        tblk = cfg.action_block[edge.dst]
        paths = graph.simple_paths(cfg, sblk, tblk, excluded=edge.bind)
        if all(cut(p, cap_name) for p in paths):
            continue
        kind_id = cheapest(cap_name)
        for s, d, _ in cfg.in_edges(tblk):
            place((s, d), kind_id)
    for bc in boundaries:
        if profile.vis_exec_free:
            continue
        action = cfg.actions[bc.action]
        blk = cfg.action_block[bc.action]
        cap_name = "cuts_vis" if bc.kind == "vo" else (
            "cuts_exec_from_read"
            if bc.direction == "post" and action.reads_value
            else "cuts_exec_any"
        )
        sides = cfg.in_edges(blk) if bc.direction == "pre" else cfg.out_edges(blk)
        for s, d, _ in sides:
            if not any(getattr(profile.kind(k), cap_name) for k in placed.get((s, d), ())):
                place((s, d), cheapest(cap_name))

    plan = PlacementPlan(cfg.func.name, profile.name, 0)
    cost = 0
    for (s, d), kinds in sorted(placed.items()):
        for k in sorted(kinds):
            anchor, pos = edge_anchor(cfg, s, d)
            plan.barriers.append(BarrierPlacement(k, s, d, anchor, pos))
            cost += weights[(s, d)] * costs.kind(k)
    plan.cost = cost
    return plan
