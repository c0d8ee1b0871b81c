"""Static network data model for restoration planning.

Everything here is per-unit on a 1 MVA / 1 MWh base. A Grid is immutable
after construction and safe to share across solver workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

DEFAULT_V_MIN = 0.917
DEFAULT_V_MAX = 1.050

# Per-constraint-class big-M policy. "flow" gates line p/q when a line is
# de-energized, "volt" gates the voltage-drop equation, "link" couples a
# switch status to its squared current (computed from the demand floor when
# left at None), "load_margin" scales the demand-side disjunction constants.
DEFAULT_BIG_M_POLICY = {
    "flow": None,       # None -> 2 * total peak demand
    "volt": None,       # None -> v_max ** 2
    "link": None,       # None -> 2 / F_floor, capped at 1e7
    "load_margin": 1.05,
    "generic": 1.0e3,
}

NODE_KINDS = ("substation", "load", "junction")
SWITCH_KINDS = ("sectionalizing", "tie")
REGULATOR_KINDS = ("oltc", "svr", "cb")


class GridError(ValueError):
    """Malformed or inconsistent grid input."""


class GridSchemaError(GridError):
    """Structural problem in a grid document (missing/ill-typed field)."""


class GridInvariantError(GridError):
    """A parsed element violates a model invariant."""


@dataclass(frozen=True)
class Switch:
    kind: str                  # "sectionalizing" | "tie"
    remote: bool = False
    weight: float = 1.0
    normally_open: bool = False

    def validate(self, line_id: str) -> None:
        if self.kind not in SWITCH_KINDS:
            raise GridInvariantError(f"line {line_id}: unknown switch kind {self.kind!r}")
        if self.weight <= 0:
            raise GridInvariantError(f"line {line_id}: switch weight must be > 0")
        if (self.kind == "tie") != self.normally_open:
            raise GridInvariantError(
                f"line {line_id}: tie switches must be normally open and "
                f"sectionalizing switches normally closed"
            )


@dataclass(frozen=True)
class Node:
    id: str
    kind: str                  # "substation" | "load" | "junction"
    base_load_p: float = 0.0
    base_load_q: float = 0.0
    kp: float = 0.0
    kq: float = 0.0
    priority: float = 1.0      # load importance weight in the shed objective
    breaker_weight: float = 1.0
    profile: Optional[str] = None

    def validate(self) -> None:
        if self.kind not in NODE_KINDS:
            raise GridInvariantError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.priority <= 0:
            raise GridInvariantError(f"node {self.id}: priority must be > 0")
        if self.breaker_weight <= 0:
            raise GridInvariantError(f"node {self.id}: breaker_weight must be > 0")
        if self.kp < 0 or self.kq < 0:
            raise GridInvariantError(f"node {self.id}: kp/kq must be >= 0")
        if self.kp > 2 or self.kq > 2:
            # the linearized voltage-sensitive demand turns negative at V=0 beyond 2
            raise GridInvariantError(f"node {self.id}: kp/kq above 2 unsupported")
        if self.base_load_p < 0 or self.base_load_q < 0:
            raise GridInvariantError(f"node {self.id}: base loads must be >= 0")
        if self.kind == "substation" and (self.base_load_p or self.base_load_q):
            raise GridInvariantError(f"node {self.id}: substation nodes carry no load")


@dataclass(frozen=True)
class Line:
    id: str
    from_node: str
    to_node: str
    r: float
    x: float
    f_max: float               # ampacity, p.u. current magnitude
    f_thr: float               # deviation threshold, p.u. current magnitude
    switch: Optional[Switch] = None
    is_virtual_regulator_link: bool = False

    def validate(self) -> None:
        if self.from_node == self.to_node:
            raise GridInvariantError(f"line {self.id}: self-loop")
        if self.r < 0 or self.x < 0:
            raise GridInvariantError(f"line {self.id}: r/x must be >= 0")
        if not (0 < self.f_thr <= self.f_max):
            raise GridInvariantError(
                f"line {self.id}: requires 0 < f_thr <= f_max "
                f"(got f_thr={self.f_thr}, f_max={self.f_max})"
            )
        if self.is_virtual_regulator_link and (self.r != 0 or self.x != 0):
            raise GridInvariantError(f"line {self.id}: virtual regulator links need r = x = 0")
        if self.switch is not None:
            self.switch.validate(self.id)
            if self.is_virtual_regulator_link:
                raise GridInvariantError(f"line {self.id}: regulator links cannot be switched")
            if self.r == 0 and self.x == 0:
                # a switched zero-impedance cycle could carry unobservable
                # circulating flow and defeat the flow-link constraint
                raise GridInvariantError(f"line {self.id}: switched lines need r or x > 0")


@dataclass(frozen=True)
class Regulator:
    kind: str                  # "oltc" | "svr" | "cb"
    location: str              # node id (oltc, cb) or line id (svr)
    sigma: float = 0.0         # ratio change per tap step (oltc, svr)
    n_steps: int = 0
    initial: float = 0.0       # pre-fault ratio setting (oltc) or tap position (svr, cb)
    dq_step: float = 0.0       # reactive power per tap step (cb)
    zp: complex = 0j           # primary-side impedance (svr)
    zs: complex = 0j           # secondary-side impedance (svr)

    @property
    def id(self) -> str:
        return f"{self.kind}@{self.location}"

    def validate(self) -> None:
        if self.kind not in REGULATOR_KINDS:
            raise GridInvariantError(f"regulator at {self.location}: unknown kind {self.kind!r}")
        if self.n_steps < 1:
            raise GridInvariantError(f"{self.id}: n_steps must be >= 1")
        if self.kind in ("oltc", "svr") and self.sigma <= 0:
            raise GridInvariantError(f"{self.id}: sigma must be > 0")
        if self.kind == "oltc":
            if abs(self.initial) > self.n_steps * self.sigma + 1e-12:
                raise GridInvariantError(f"{self.id}: initial ratio outside tap range")
        elif self.kind == "svr":
            if abs(self.initial) > self.n_steps + 1e-9 or self.initial != int(self.initial):
                raise GridInvariantError(f"{self.id}: initial tap must be an integer in range")
        elif self.kind == "cb":
            if self.dq_step <= 0:
                raise GridInvariantError(f"{self.id}: dq_step must be > 0")
            if not (0 <= self.initial <= self.n_steps) or self.initial != int(self.initial):
                raise GridInvariantError(f"{self.id}: initial tap must be an integer in 0..n")


@dataclass(frozen=True)
class DG:
    node: str
    p_max: float
    q_min: float
    q_max: float
    s_max: float

    def validate(self) -> None:
        if not (0 <= self.p_max <= self.s_max):
            raise GridInvariantError(f"DG at {self.node}: requires 0 <= p_max <= s_max")
        if self.q_min > self.q_max:
            raise GridInvariantError(f"DG at {self.node}: q_min > q_max")


@dataclass(frozen=True)
class GridLimits:
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX
    big_m_policy: dict = field(default_factory=lambda: dict(DEFAULT_BIG_M_POLICY))
    sub_p_rating: Optional[float] = None   # substation transformer limits, default unbounded
    sub_q_rating: Optional[float] = None

    def validate(self) -> None:
        if not (0 < self.v_min < 1 < self.v_max):
            raise GridInvariantError(
                f"voltage limits must satisfy 0 < v_min < 1 < v_max "
                f"(got {self.v_min}, {self.v_max})"
            )


@dataclass(frozen=True)
class Grid:
    """Validated network. Node/line dicts preserve document order."""

    nodes: dict[str, Node]
    lines: dict[str, Line]
    regulators: tuple[Regulator, ...]
    dgs: tuple[DG, ...]
    limits: GridLimits
    profiles: dict[str, tuple[float, ...]]   # name -> 24 hourly multipliers

    @property
    def substations(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind == "substation"]

    def lines_at(self, node_id: str) -> list[Line]:
        return [l for l in self.lines.values() if node_id in (l.from_node, l.to_node)]

    def switched_lines(self) -> list[Line]:
        return [l for l in self.lines.values() if l.switch is not None]

    def tie_lines(self) -> list[Line]:
        return [l for l in self.lines.values() if l.switch and l.switch.kind == "tie"]

    def regulator(self, kind: str, location: str) -> Optional[Regulator]:
        for reg in self.regulators:
            if reg.kind == kind and reg.location == location:
                return reg
        return None

    def demand_at(self, node_id: str, hour: int) -> tuple[float, float]:
        """Nominal-voltage (P0, Q0) for one node at one hour."""
        node = self.nodes[node_id]
        mult = 1.0
        if node.profile is not None:
            mult = self.profiles[node.profile][hour % 24]
        return node.base_load_p * mult, node.base_load_q * mult

    def peak_demand_total(self) -> float:
        total = 0.0
        for node in self.nodes.values():
            if node.base_load_p or node.base_load_q:
                mult = 1.0
                if node.profile is not None:
                    mult = max(self.profiles[node.profile])
                total += (node.base_load_p + node.base_load_q) * mult
        return total

    def validate(self) -> None:
        ids = list(self.nodes) + list(self.lines)
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise GridInvariantError(f"duplicate ids: {sorted(dup)}")
        self.limits.validate()
        for node in self.nodes.values():
            node.validate()
            if node.profile is not None and node.profile not in self.profiles:
                raise GridInvariantError(f"node {node.id}: unknown profile {node.profile!r}")
        for line in self.lines.values():
            line.validate()
            for end in (line.from_node, line.to_node):
                if end not in self.nodes:
                    raise GridInvariantError(f"line {line.id}: unknown endpoint {end!r}")
        for name, series in self.profiles.items():
            if len(series) != 24:
                raise GridSchemaError(f"profile {name!r}: expected 24 hourly multipliers")
            if any(m < 0 for m in series):
                raise GridInvariantError(f"profile {name!r}: negative multiplier")
        for reg in self.regulators:
            reg.validate()
            if reg.kind in ("oltc", "cb"):
                if reg.location not in self.nodes:
                    raise GridInvariantError(f"{reg.id}: unknown node {reg.location!r}")
                if reg.kind == "oltc" and self.nodes[reg.location].kind != "substation":
                    raise GridInvariantError(f"{reg.id}: tap changers sit at substation nodes")
            else:
                if reg.location not in self.lines:
                    raise GridInvariantError(f"{reg.id}: unknown line {reg.location!r}")
        for dg in self.dgs:
            dg.validate()
            if dg.node not in self.nodes:
                raise GridInvariantError(f"DG at {dg.node}: unknown node")
        if not self.substations:
            raise GridInvariantError("grid has no substation node")
        self._check_connected_when_closed()
        self._check_tie_placement()

    def _check_connected_when_closed(self) -> None:
        if not self.nodes:
            raise GridInvariantError("grid has no nodes")
        adj: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for line in self.lines.values():
            adj[line.from_node].append(line.to_node)
            adj[line.to_node].append(line.from_node)
        seen = set()
        stack = [next(iter(self.nodes))]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(adj[nid])
        missing = set(self.nodes) - seen
        if missing:
            raise GridInvariantError(
                f"grid disconnected even with all switches closed; unreachable: {sorted(missing)}"
            )

    def _check_tie_placement(self) -> None:
        # a tie must link two distinct pre-fault trees or two branches of one;
        # either way its endpoints must already be connected without it
        closed_adj: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for line in self.lines.values():
            if line.switch and line.switch.normally_open:
                continue
            closed_adj[line.from_node].append(line.to_node)
            closed_adj[line.to_node].append(line.from_node)
        for line in self.tie_lines():
            if line.from_node == line.to_node:
                raise GridInvariantError(f"tie {line.id}: degenerate endpoints")


def closed_line_ids(grid: Grid) -> list[str]:
    """Lines carrying pre-fault flow: everything except normally-open ties."""
    return [
        l.id for l in grid.lines.values()
        if not (l.switch is not None and l.switch.normally_open)
    ]


def expand_svrs(grid: Grid) -> Grid:
    """Replace each SVR host line with impedance segments and an ideal-ratio link.

    The host line's own r/x fold into the primary-side segment. The returned
    grid's SVR regulators point at the ratio-link line ids.
    """
    svrs = {r.location: r for r in grid.regulators if r.kind == "svr"}
    if not svrs:
        return grid
    nodes = dict(grid.nodes)
    lines: dict[str, Line] = {}
    new_regs = [r for r in grid.regulators if r.kind != "svr"]
    for line in grid.lines.values():
        reg = svrs.get(line.id)
        if reg is None:
            lines[line.id] = line
            continue
        if line.switch is not None:
            raise GridInvariantError(f"line {line.id}: SVR host lines cannot be switched")
        a, b = f"{line.id}::a", f"{line.id}::b"
        for nid in (a, b):
            if nid in nodes:
                raise GridInvariantError(f"id {nid} collides with SVR expansion")
            nodes[nid] = Node(id=nid, kind="junction")
        zp = complex(reg.zp) + complex(line.r, line.x)
        zs = complex(reg.zs)
        lines[f"{line.id}::p"] = Line(
            id=f"{line.id}::p", from_node=line.from_node, to_node=a,
            r=zp.real, x=zp.imag, f_max=line.f_max, f_thr=line.f_thr)
        lines[f"{line.id}::ratio"] = Line(
            id=f"{line.id}::ratio", from_node=a, to_node=b,
            r=0.0, x=0.0, f_max=line.f_max, f_thr=line.f_thr,
            is_virtual_regulator_link=True)
        lines[f"{line.id}::s"] = Line(
            id=f"{line.id}::s", from_node=b, to_node=line.to_node,
            r=zs.real, x=zs.imag, f_max=line.f_max, f_thr=line.f_thr)
        new_regs.append(replace(reg, location=f"{line.id}::ratio"))
    return Grid(
        nodes=nodes, lines=lines, regulators=tuple(new_regs),
        dgs=grid.dgs, limits=grid.limits, profiles=grid.profiles)
