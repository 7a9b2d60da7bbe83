"""Architecture capability profiles and cost tables.

Barrier kinds are capability-tagged abstractions of the real
instructions (mfence, sync, lwsync, dmb, the dmb ld / dmb ld;dmb st
pair); costs are abstract weights, configurable per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class BarrierKind:
    id: str
    cuts_push: bool
    cuts_vis: bool
    cuts_exec_any: bool
    cuts_exec_from_read: bool

    def __post_init__(self):
        # capability hierarchy: push => vis => exec_any => exec_from_read
        chain = (self.cuts_push, self.cuts_vis, self.cuts_exec_any, self.cuts_exec_from_read)
        for a, b in zip(chain, chain[1:]):
            if a and not b:
                raise ValueError(f"barrier kind {self.id!r} violates capability hierarchy")


@dataclass(frozen=True)
class ArchProfile:
    name: str
    barriers: tuple  # of BarrierKind
    modes: tuple = ()  # subset of ("acquire", "release")
    vis_exec_free: bool = False

    def kind(self, kind_id):
        for k in self.barriers:
            if k.id == kind_id:
                return k
        raise KeyError(kind_id)

    def kinds_cutting(self, capability):
        return [k for k in self.barriers if getattr(k, capability)]


def _bk(id, level):
    # level: "push" > "vis" > "exec" > "exec_from_read"
    return BarrierKind(
        id,
        cuts_push=level == "push",
        cuts_vis=level in ("push", "vis"),
        cuts_exec_any=level in ("push", "vis", "exec"),
        cuts_exec_from_read=True,
    )


_PROFILES = {
    "x86": ArchProfile("x86", barriers=(_bk("mfence", "push"),), vis_exec_free=True),
    "armv7": ArchProfile("armv7", barriers=(_bk("dmb", "push"),)),
    "armv8": ArchProfile(
        "armv8",
        barriers=(_bk("dmb", "push"), _bk("dmb_ldst", "vis"), _bk("dmb_ld", "exec_from_read")),
        modes=("acquire", "release"),
    ),
    "power": ArchProfile("power", barriers=(_bk("sync", "push"), _bk("lwsync", "vis"))),
}

PROFILE_NAMES = tuple(_PROFILES)


def builtin_profile(name):
    try:
        return _PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown architecture profile {name!r}") from None


DEFAULT_KIND_COSTS = {
    "mfence": 40,
    "sync": 80,
    "lwsync": 45,
    "dmb": 65,
    "dmb_ldst": 50,
    "dmb_ld": 35,
}
DEFAULT_MODE_COSTS = {"acquire": 25, "release": 25}
DEFAULT_DEP_COSTS = {"data_existing": 1, "ctrl_existing": 2, "ctrl_synth": 8}
DEFAULT_LOOP_FACTOR = 4


@dataclass(frozen=True)
class CostTable:
    kind_costs: dict
    mode_costs: dict
    dep_costs: dict
    loop_factor: int = DEFAULT_LOOP_FACTOR

    def kind(self, kind_id):
        return self.kind_costs[kind_id]

    def mode(self, mode_id):
        return self.mode_costs[mode_id]

    def dep(self, dep_id):
        return self.dep_costs[dep_id]


class CostConfigError(Exception):
    pass


def load_costs(profile, path=None, text=None):
    """Defaults merged with `key = integer` overrides.

    Returns (CostTable, warnings). Warnings flag overrides that break the
    strength-cost ordering within the profile.
    """
    kinds = {k.id: DEFAULT_KIND_COSTS[k.id] for k in profile.barriers}
    modes = {m: DEFAULT_MODE_COSTS[m] for m in profile.modes}
    deps = dict(DEFAULT_DEP_COSTS)
    loop_factor = DEFAULT_LOOP_FACTOR

    if path is not None and text is None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    if text:
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CostConfigError(f"line {lineno}: expected 'key = integer'")
            key, _, val = line.partition("=")
            key = key.strip()
            try:
                num = int(val.strip())
            except ValueError:
                raise CostConfigError(f"line {lineno}: {val.strip()!r} is not an integer")
            if num < 1:
                raise CostConfigError(f"line {lineno}: cost for {key!r} must be >= 1")
            if key == "loop_factor":
                loop_factor = num
            elif key in kinds:
                kinds[key] = num
            elif key in modes:
                modes[key] = num
            elif key in deps:
                deps[key] = num
            elif key in DEFAULT_KIND_COSTS or key in DEFAULT_MODE_COSTS:
                pass  # cost for a kind this profile lacks: ignore
            else:
                raise CostConfigError(f"line {lineno}: unknown cost key {key!r}")

    table = CostTable(kinds, modes, deps, loop_factor)
    return table, _hierarchy_warnings(profile, table)


def _hierarchy_warnings(profile, table):
    """push-capable >= vis-capable >= exec-capable >= dependency costs."""
    warnings = []
    levels = {"cuts_push": [], "cuts_vis": [], "cuts_exec_any": []}
    for k in profile.barriers:
        if k.cuts_push:
            levels["cuts_push"].append(table.kind(k.id))
        elif k.cuts_vis:
            levels["cuts_vis"].append(table.kind(k.id))
        elif k.cuts_exec_any or k.cuts_exec_from_read:
            levels["cuts_exec_any"].append(table.kind(k.id))
    seq = []
    for cap in ("cuts_push", "cuts_vis", "cuts_exec_any"):
        if levels[cap]:
            seq.append((cap, min(levels[cap])))
    for (cap_a, a), (cap_b, b) in zip(seq, seq[1:]):
        if a < b:
            warnings.append(f"cost ordering violated: {cap_a} barrier cheaper than {cap_b}")
    if seq:
        dep_max = max(table.dep_costs.values())
        if seq[-1][1] < dep_max:
            warnings.append("cost ordering violated: a barrier is cheaper than a dependency use")
    return warnings
