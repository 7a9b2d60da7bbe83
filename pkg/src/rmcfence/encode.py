"""Boolean formula and cost objective for barrier/dependency placement.

Every constraint edge becomes a root assertion over defined variables
(vcut/pcut/xcut/ctrl and their per-path forms); output variables are the
insertable devices (barriers per CFG edge, dependency uses, per-action
acquire/release modes). The formula is positive in all output variables,
and the self-ordering requirement for dependency use makes the xcut
definitions (benignly) cyclic; evaluation takes the greatest fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import graph

TRUE = ("const", True)
FALSE = ("const", False)


@dataclass(frozen=True, order=True)
class OutputVar:
    kind: str  # barrier | use_ctrl | use_data | acquire | release
    detail: tuple

    def __str__(self):
        if self.kind == "barrier":
            k, s, d = self.detail
            return f"barrier[{k} @ {s}->{d}]"
        if self.kind == "use_ctrl":
            s, es, ed, mode = self.detail
            return f"use_ctrl[{s} @ {es}->{ed} {mode}]"
        if self.kind == "use_data":
            b, s, t, pid = self.detail
            return f"use_data[{b} {s}->{t} {pid}]"
        return f"{self.kind}[{self.detail[0]}]"


@dataclass
class EncodeOptions:
    data_deps: bool = True
    ctrl_deps: bool = True
    synth_deps: bool = False
    self_condition: bool = True  # test hook; disabling it is unsound
    max_paths: int = graph.DEFAULT_MAX_PATHS
    max_weight: int = graph.DEFAULT_MAX_WEIGHT


@dataclass
class Problem:
    function: str
    arch: str
    outputs: list  # sorted OutputVars
    defs: dict  # name -> expr
    asserts: list  # (label, expr)
    cost_terms: list  # (weight, frozenset of OutputVars)
    paths: dict  # "pN" -> block tuple
    weights: dict = field(default_factory=dict)  # (src, dst) -> w(e)
    _eval_order: "list | None" = None

    def objective(self, true_vars):
        return sum(w for w, group in self.cost_terms if group & true_vars)

    def max_cost(self):
        return sum(w for w, _ in self.cost_terms)


def _or(parts):
    flat = []
    for p in parts:
        if p == TRUE:
            return TRUE
        if p == FALSE:
            continue
        if p[0] == "or":
            flat.extend(p[1])
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return ("or", tuple(flat))


def _and(parts):
    flat = []
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE:
            continue
        if p[0] == "and":
            flat.extend(p[1])
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return ("and", tuple(flat))


class Encoder:
    def __init__(self, cfg, edges, boundaries, deps, profile, costs, options=None):
        self.cfg = cfg
        self.edges = edges
        self.boundaries = boundaries
        self.deps = deps
        self.profile = profile
        self.costs = costs
        self.opt = options or EncodeOptions()
        self.weights = graph.edge_weights(cfg, costs.loop_factor, self.opt.max_weight)
        self.defs = {}
        self.asserts = []
        self.vars = set()
        self.paths = {}
        self._path_ids = {}
        self._building = set()
        self._paths_memo = {}

    # -- small helpers ------------------------------------------------------

    def _bstr(self, bind):
        return bind if bind is not None else "-"

    def _pid(self, path):
        pid = self._path_ids.get(path)
        if pid is None:
            pid = f"p{len(self._path_ids)}"
            self._path_ids[path] = pid
            self.paths[pid] = path
        return pid

    def _paths_between(self, bind, s, t):
        sblk = self.cfg.action_block[s]
        tblk = self.cfg.action_block[t]
        key = (bind, sblk, tblk)
        got = self._paths_memo.get(key)
        if got is None:
            got = graph.simple_paths(self.cfg, sblk, tblk, excluded=bind, cap=self.opt.max_paths)
            self._paths_memo[key] = got
        return got

    def _barrier(self, kind_id, edge):
        v = OutputVar("barrier", (kind_id, edge[0], edge[1]))
        self.vars.add(v)
        return ("out", v)

    def _mode_var(self, mode, action_id):
        v = OutputVar(mode, (action_id,))
        self.vars.add(v)
        return ("out", v)

    def _acquire_term(self, action):
        if "acquire" in self.profile.modes and action.reads_value:
            return self._mode_var("acquire", action.id)
        return FALSE

    def _release_term(self, action):
        if "release" in self.profile.modes and action.is_write:
            return self._mode_var("release", action.id)
        return FALSE

    def _barriers_on(self, path_edges, kinds):
        return _or([self._barrier(k.id, e) for e in path_edges for k in kinds])

    def _define(self, name, expr):
        self.defs[name] = expr
        return ("def", name)

    # -- per-kind encodings -------------------------------------------------

    def _vcut_path(self, path, t_action):
        if self.profile.vis_exec_free:
            return TRUE
        name = f"vcut_path({self._pid(path)},{t_action.id})"
        if name not in self.defs:
            edges_ = list(zip(path, path[1:]))
            body = _or(
                [
                    self._barriers_on(edges_, self.profile.kinds_cutting("cuts_vis")),
                    self._release_term(t_action),
                ]
            )
            self._define(name, body)
        return ("def", name)

    def _pcut(self, edge):
        name = f"pcut({self._bstr(edge.bind)},{edge.src},{edge.dst})"
        if name not in self.defs:
            conj = []
            for path in self._paths_between(edge.bind, edge.src, edge.dst):
                pname = f"pcut_path({self._pid(path)})"
                if pname not in self.defs:
                    edges_ = list(zip(path, path[1:]))
                    self._define(
                        pname,
                        self._barriers_on(edges_, self.profile.kinds_cutting("cuts_push")),
                    )
                conj.append(("def", pname))
            self._define(name, _and(conj))
        return ("def", name)

    def _vcut(self, edge):
        name = f"vcut({self._bstr(edge.bind)},{edge.src},{edge.dst})"
        if name not in self.defs:
            t_action = self.cfg.actions[edge.dst]
            conj = [
                self._vcut_path(p, t_action)
                for p in self._paths_between(edge.bind, edge.src, edge.dst)
            ]
            self._define(name, _and(conj))
        return ("def", name)

    def _ctrl_path(self, s_action, path):
        name = f"ctrl_path({s_action.id},{self._pid(path)})"
        if name not in self.defs:
            terms = []
            for e in zip(path, path[1:]):
                if self.deps.can_ctrl(s_action, e, synth=False):
                    v = OutputVar("use_ctrl", (s_action.id, e[0], e[1], "existing"))
                    self.vars.add(v)
                    terms.append(("out", v))
                elif self.opt.synth_deps and self.deps.can_ctrl(s_action, e, synth=True):
                    v = OutputVar("use_ctrl", (s_action.id, e[0], e[1], "synth"))
                    self.vars.add(v)
                    terms.append(("out", v))
            self._define(name, _or(terms))
        return ("def", name)

    def _ctrl_self(self, bind, s_action):
        name = f"ctrl({self._bstr(bind)},{s_action.id},{s_action.id})"
        if name not in self.defs:
            conj = [
                self._ctrl_path(s_action, p)
                for p in self._paths_between(bind, s_action.id, s_action.id)
            ]
            self._define(name, _and(conj))
        return ("def", name)

    def _xcut(self, bind, s, t):
        name = f"xcut({self._bstr(bind)},{s},{t})"
        if name in self.defs or name in self._building:
            return ("def", name)
        self._building.add(name)
        s_action = self.cfg.actions[s]
        t_action = self.cfg.actions[t]
        conj = []
        for path in self._paths_between(bind, s, t):
            conj.append(self._xcut_path(bind, s_action, t_action, path))
        self._define(name, _and(conj))
        self._building.discard(name)
        return ("def", name)

    def _xcut_path(self, bind, s_action, t_action, path):
        name = f"xcut_path({self._bstr(bind)},{s_action.id},{t_action.id},{self._pid(path)})"
        if name in self.defs:
            return ("def", name)
        if self.profile.vis_exec_free:
            return self._define(name, TRUE)
        edges_ = list(zip(path, path[1:]))
        exec_kinds = list(self.profile.kinds_cutting("cuts_exec_any"))
        if s_action.reads_value:
            exec_kinds += [
                k
                for k in self.profile.kinds_cutting("cuts_exec_from_read")
                if not k.cuts_exec_any
            ]
        disj = [
            self._vcut_path(path, t_action),
            self._barriers_on(edges_, exec_kinds),
            self._acquire_term(s_action),
        ]
        self_ref = lambda: self._xcut(bind, s_action.id, s_action.id)
        if self.opt.ctrl_deps and t_action.is_write and s_action.reads_value:
            cp = self._ctrl_path(s_action, path)
            if self.defs[cp[1]] != FALSE:
                if self.opt.self_condition:
                    side = _or([self._ctrl_self(bind, s_action), self_ref()])
                    disj.append(_and([cp, side]))
                else:
                    disj.append(cp)
        if (
            self.opt.data_deps
            and s_action.reads_value
            and self.deps.can_data(bind, s_action, t_action, path)
        ):
            v = OutputVar(
                "use_data", (self._bstr(bind), s_action.id, t_action.id, self._pid(path))
            )
            self.vars.add(v)
            term = ("out", v)
            if self.opt.self_condition:
                term = _and([term, self_ref()])
            disj.append(term)
        return self._define(name, _or(disj))

    # -- boundaries ---------------------------------------------------------

    def _boundary_expr(self, bc):
        action = self.cfg.actions[bc.action]
        blk = self.cfg.action_block[bc.action]
        if self.profile.vis_exec_free:
            return TRUE
        if bc.direction == "pre":
            edges_ = [(s, d) for s, d, _ in self.cfg.in_edges(blk)]
        else:
            edges_ = [(s, d) for s, d, _ in self.cfg.out_edges(blk)]
        conj = []
        for e in edges_:
            if bc.kind == "vo":
                kinds = self.profile.kinds_cutting("cuts_vis")
                extra = self._release_term(action) if bc.direction == "pre" else FALSE
            else:
                kinds = list(self.profile.kinds_cutting("cuts_exec_any"))
                extra = FALSE
                if bc.direction == "post" and action.reads_value:
                    kinds += [
                        k
                        for k in self.profile.kinds_cutting("cuts_exec_from_read")
                        if not k.cuts_exec_any
                    ]
                    extra = self._acquire_term(action)
            conj.append(_or([self._barriers_on([e], kinds), extra]))
        return _and(conj)

    # -- driver -------------------------------------------------------------

    def build(self):
        for edge in self.edges:
            label = f"{edge.kind} {edge.src}->{edge.dst}" + (
                f" @{edge.bind}" if edge.bind else ""
            )
            if edge.kind == "pu":
                self.asserts.append((label, self._pcut(edge)))
            elif edge.kind == "vo":
                self.asserts.append((label, self._vcut(edge)))
            else:
                self.asserts.append((label, self._xcut(edge.bind, edge.src, edge.dst)))
        for bc in self.boundaries:
            label = f"{bc.direction}({bc.kind}) {bc.action}"
            self.asserts.append((label, self._boundary_expr(bc)))
        return Problem(
            function=self.cfg.func.name,
            arch=self.profile.name,
            outputs=sorted(self.vars),
            defs=self.defs,
            asserts=self.asserts,
            cost_terms=self._cost_terms(),
            paths=dict(self.paths),
            weights=dict(self.weights),
        )

    def _cost_terms(self):
        terms = []
        in_w = {}
        for s, d, _ in self.cfg.edges:
            in_w[d] = max(in_w.get(d, 0), self.weights[(s, d)])
        data_groups = {}
        for v in sorted(self.vars):
            if v.kind == "barrier":
                k, s, d = v.detail
                terms.append((self.weights[(s, d)] * self.costs.kind(k), frozenset([v])))
            elif v.kind == "use_ctrl":
                _, s, d, mode = v.detail
                cost = self.costs.dep("ctrl_existing" if mode == "existing" else "ctrl_synth")
                terms.append((self.weights[(s, d)] * cost, frozenset([v])))
            elif v.kind == "use_data":
                b, s, t, _pid = v.detail
                data_groups.setdefault((b, s, t), []).append(v)
            else:  # acquire / release
                blk = self.cfg.action_block[v.detail[0]]
                w = in_w.get(blk, 1)
                terms.append((w * self.costs.mode(v.kind), frozenset([v])))
        for key in sorted(data_groups):
            terms.append((self.costs.dep("data_existing"), frozenset(data_groups[key])))
        return terms


def build(cfg, edges, boundaries, deps, profile, costs, options=None):
    return Encoder(cfg, edges, boundaries, deps, profile, costs, options).build()


# ---------------------------------------------------------------------------
# Evaluation (greatest fixpoint over the defined-variable equations)


def _def_refs(expr, acc):
    tag = expr[0]
    if tag == "def":
        acc.add(expr[1])
    elif tag in ("or", "and"):
        for p in expr[1]:
            _def_refs(p, acc)


def _eval_order(problem):
    """Topological order of def names, or None if the def graph is cyclic."""
    deps_of = {}
    for name, expr in problem.defs.items():
        acc = set()
        _def_refs(expr, acc)
        deps_of[name] = acc
    order, state = [], {}

    def visit(n):
        stack = [(n, iter(deps_of.get(n, ())))]
        state[n] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for m in it:
                if state.get(m) == 1:
                    return False
                if m not in state:
                    state[m] = 1
                    stack.append((m, iter(deps_of.get(m, ()))))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                order.append(node)
                stack.pop()
        return True

    for name in problem.defs:
        if name not in state:
            if not visit(name):
                return None
    return order


def _eval_expr(expr, env, true_vars):
    tag = expr[0]
    if tag == "const":
        return expr[1]
    if tag == "out":
        return expr[1] in true_vars
    if tag == "def":
        return env[expr[1]]
    if tag == "or":
        return any(_eval_expr(p, env, true_vars) for p in expr[1])
    return all(_eval_expr(p, env, true_vars) for p in expr[1])


def def_values(problem, true_vars):
    """Values of all defined variables under an output assignment."""
    if problem._eval_order is None:
        problem._eval_order = (_eval_order(problem), )
    order = problem._eval_order[0]
    if order is not None:
        env = {}
        for name in order:
            env[name] = _eval_expr(problem.defs[name], env, true_vars)
        return env
    env = {name: True for name in problem.defs}
    changed = True
    while changed:
        changed = False
        for name, expr in problem.defs.items():
            v = _eval_expr(expr, env, true_vars)
            if v != env[name]:
                env[name] = v
                changed = True
    return env


def failed_assertions(problem, true_vars):
    env = def_values(problem, true_vars)
    return [label for label, expr in problem.asserts if not _eval_expr(expr, env, true_vars)]


def satisfies(problem, true_vars):
    return not failed_assertions(problem, true_vars)
