"""Control- and data-dependence facts feeding the encoder.

can_data is path-sensitive: the use-def chain must survive every
execution that follows the path while detouring inside the admissible
region. The region is a reachability over-approximation of those
detours, computed over real edges (a detour through function exit ends
the invocation and cannot carry an SSA value).
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Action, Deref, Phi, PureOp, compute_dominators, successors


@dataclass(frozen=True)
class AdmissibleRegion:
    path: tuple
    bind: "str | None"
    blocks: frozenset


class DepAnalysis:
    def __init__(self, cfg):
        self.cfg = cfg
        self.defs = {}  # value id -> defining instruction
        self.def_block = {}
        for bid, blk in cfg.blocks.items():
            for ins in blk.instrs:
                d = getattr(ins, "defines", None)
                if d:
                    self.defs[d] = ins
                    self.def_block[d] = bid
        self._succ_real = cfg.real_succ()
        self._pred_real = cfg.real_pred()
        self._dom = None
        self._region_memo = {}
        self._depends_memo = {}
        self._ctrl_memo = {}
        self._data_memo = {}

    # -- regions ------------------------------------------------------------

    def admissible_region(self, path, bind=None):
        key = (path, bind)
        region = self._region_memo.get(key)
        if region is None:
            head, tail = path[0], path[-1]
            fwd = self._reach_from(head, bind)
            bwd = self._reach_to(tail, bind)
            region = AdmissibleRegion(path, bind, frozenset((fwd & bwd) | set(path)))
            self._region_memo[key] = region
        return region

    def _reach_from(self, start, avoid):
        out, stack = set(), [start]
        while stack:
            b = stack.pop()
            if b in out or b == avoid:
                continue
            out.add(b)
            stack.extend(self._succ_real[b])
        return out

    def _reach_to(self, goal, avoid):
        out, stack = set(), [goal]
        while stack:
            b = stack.pop()
            if b in out or b == avoid:
                continue
            out.add(b)
            stack.extend(self._pred_real[b])
        return out

    # -- value dependence ---------------------------------------------------

    def value_depends(self, src_action, operand, region):
        """Does `operand` carry src_action's loaded value on every admissible
        execution? Greatest fixpoint, so loop-carried chains count."""
        if not isinstance(operand, str):
            return False
        key = (src_action.id, region.blocks)
        dep = self._depends_memo.get(key)
        if dep is None:
            dep = {v: True for v in self.defs}
            changed = True
            while changed:
                changed = False
                for v, ins in self.defs.items():
                    new = self._dep_step(src_action, ins, dep, region.blocks)
                    if new != dep[v]:
                        dep[v] = new
                        changed = True
            self._depends_memo[key] = dep
        return dep.get(operand, False)

    def _dep_step(self, src_action, ins, dep, region):
        arm = lambda o: isinstance(o, str) and dep[o]
        if isinstance(ins, Action):
            return ins is src_action
        if isinstance(ins, PureOp):
            return any(arm(a) for a in ins.args)
        if isinstance(ins, Phi):
            arms = [o for p, o in ins.arms if p in region]
            return bool(arms) and all(arm(o) for o in arms)
        return False

    # -- facts --------------------------------------------------------------

    def can_data(self, bind, src_action, dst_action, path):
        """True iff a dependence from src's loaded value reaches dst's
        address (reads) or address/data (writes, rmws) along `path`."""
        if not src_action.reads_value:
            return False
        key = (bind, src_action.id, dst_action.id, path)
        hit = self._data_memo.get(key)
        if hit is not None:
            return hit
        region = self.admissible_region(path, bind)
        operands = []
        addr = dst_action.address_operand
        if addr is not None:
            operands.append(addr)
        if dst_action.kind in ("write", "rmw"):
            operands.append(dst_action.data)
        result = any(self.value_depends(src_action, o, region) for o in operands)
        self._data_memo[key] = result
        return result

    def can_ctrl(self, src_action, edge, synth=False):
        """Existing: edge source ends in a branch conditioned on src's value.
        Synth: additionally any edge whose source is strictly dominated by
        src's block (a bogus branch could be inserted there)."""
        if not src_action.reads_value:
            return False
        key = (src_action.id, edge, synth)
        hit = self._ctrl_memo.get(key)
        if hit is not None:
            return hit
        result = self._can_ctrl_existing(src_action, edge)
        if not result and synth:
            result = self._strictly_dominated(edge[0], self.cfg.action_block[src_action.id])
        self._ctrl_memo[key] = result
        return result

    def _can_ctrl_existing(self, src_action, edge):
        from .ir import Branch

        term = self.cfg.blocks[edge[0]].term
        if not isinstance(term, Branch):
            return False
        whole = AdmissibleRegion((), None, frozenset(self.cfg.blocks))
        return self.value_depends(src_action, term.cond, whole)

    def _strictly_dominated(self, block, by):
        if self._dom is None:
            self._dom = compute_dominators(
                list(self.cfg.blocks), self.cfg.entry, lambda b: self._succ_real[b]
            )
        return block != by and by in self._dom[block]
