"""Grid / fault / config file parsing, serialization and base-topology checks.

Grid documents are JSON with top-level keys ``nodes``, ``lines``,
``regulators``, ``dgs``, ``limits`` and ``profiles``. Field names follow the
data model; line endpoints are spelled ``from`` / ``to`` in the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .model import (
    DEFAULT_BIG_M_POLICY,
    DG,
    Grid,
    GridError,
    GridInvariantError,
    GridLimits,
    GridSchemaError,
    Line,
    Node,
    Regulator,
    Switch,
    closed_line_ids,
    expand_svrs,
)

DEFAULT_HORIZON = (8, 22)   # hourly steps, inclusive


class FaultSpecError(ValueError):
    """Malformed fault specification document."""


def _require(mapping: dict, key: str, ctx: str):
    if key not in mapping:
        raise GridSchemaError(f"{ctx}: missing field {key!r}")
    return mapping[key]


def _number(value, key: str, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GridSchemaError(f"{ctx}: field {key!r} must be a number, got {value!r}")
    return float(value)


def _complex_pair(value, key: str, ctx: str) -> complex:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise GridSchemaError(f"{ctx}: field {key!r} must be [re, im]")
    return complex(_number(value[0], key, ctx), _number(value[1], key, ctx))


def _parse_switch(doc: dict, ctx: str) -> Switch:
    kind = _require(doc, "kind", ctx)
    return Switch(
        kind=kind,
        remote=bool(doc.get("remote", False)),
        weight=_number(doc.get("weight", 1.0), "weight", ctx),
        normally_open=bool(doc.get("normally_open", kind == "tie")),
    )


def parse_grid(document: Union[str, dict, Path]) -> Grid:
    """Parse and validate a grid document (JSON text, path or dict).

    SVRs are expanded into impedance segments plus an ideal-ratio link, so
    downstream modules see ordinary lines and ratio links only.
    """
    if isinstance(document, Path):
        document = document.read_text()
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise GridSchemaError(f"grid document is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise GridSchemaError("grid document must be a JSON object")

    nodes: dict[str, Node] = {}
    for nd in _require(document, "nodes", "grid"):
        nid = str(_require(nd, "id", "node"))
        ctx = f"node {nid}"
        if nid in nodes:
            raise GridInvariantError(f"duplicate node id {nid!r}")
        nodes[nid] = Node(
            id=nid,
            kind=_require(nd, "kind", ctx),
            base_load_p=_number(nd.get("base_load_p", 0.0), "base_load_p", ctx),
            base_load_q=_number(nd.get("base_load_q", 0.0), "base_load_q", ctx),
            kp=_number(nd.get("kp", 0.0), "kp", ctx),
            kq=_number(nd.get("kq", 0.0), "kq", ctx),
            priority=_number(nd.get("priority", 1.0), "priority", ctx),
            breaker_weight=_number(nd.get("breaker_weight", 1.0), "breaker_weight", ctx),
            profile=nd.get("profile"),
        )

    lines: dict[str, Line] = {}
    for ld in _require(document, "lines", "grid"):
        lid = str(_require(ld, "id", "line"))
        ctx = f"line {lid}"
        if lid in lines or lid in nodes:
            raise GridInvariantError(f"duplicate id {lid!r}")
        switch = None
        if ld.get("switch") is not None:
            switch = _parse_switch(ld["switch"], ctx)
        lines[lid] = Line(
            id=lid,
            from_node=str(_require(ld, "from", ctx)),
            to_node=str(_require(ld, "to", ctx)),
            r=_number(_require(ld, "r", ctx), "r", ctx),
            x=_number(_require(ld, "x", ctx), "x", ctx),
            f_max=_number(_require(ld, "f_max", ctx), "f_max", ctx),
            f_thr=_number(_require(ld, "f_thr", ctx), "f_thr", ctx),
            switch=switch,
            is_virtual_regulator_link=bool(ld.get("is_virtual_regulator_link", False)),
        )

    regulators = []
    for rd in document.get("regulators", []):
        ctx = f"regulator {rd.get('kind')}@{rd.get('location')}"
        regulators.append(Regulator(
            kind=str(_require(rd, "kind", ctx)).lower(),
            location=str(_require(rd, "location", ctx)),
            sigma=_number(rd.get("sigma", 0.0), "sigma", ctx),
            n_steps=int(rd.get("n_steps", 0)),
            initial=_number(rd.get("initial", 0.0), "initial", ctx),
            dq_step=_number(rd.get("dq_step", 0.0), "dq_step", ctx),
            zp=_complex_pair(rd.get("zp", [0.0, 0.0]), "zp", ctx),
            zs=_complex_pair(rd.get("zs", [0.0, 0.0]), "zs", ctx),
        ))

    dgs = []
    for dd in document.get("dgs", []):
        ctx = f"DG at {dd.get('node')}"
        dgs.append(DG(
            node=str(_require(dd, "node", ctx)),
            p_max=_number(_require(dd, "p_max", ctx), "p_max", ctx),
            q_min=_number(_require(dd, "q_min", ctx), "q_min", ctx),
            q_max=_number(_require(dd, "q_max", ctx), "q_max", ctx),
            s_max=_number(_require(dd, "s_max", ctx), "s_max", ctx),
        ))

    lim = document.get("limits", {})
    policy = dict(DEFAULT_BIG_M_POLICY)
    policy.update(lim.get("big_m_policy", {}))
    limits = GridLimits(
        v_min=_number(lim.get("v_min", 0.917), "v_min", "limits"),
        v_max=_number(lim.get("v_max", 1.050), "v_max", "limits"),
        big_m_policy=policy,
        sub_p_rating=lim.get("sub_p_rating"),
        sub_q_rating=lim.get("sub_q_rating"),
    )

    profiles = {
        str(name): tuple(float(v) for v in series)
        for name, series in document.get("profiles", {}).items()
    }

    grid = Grid(
        nodes=nodes, lines=lines, regulators=tuple(regulators),
        dgs=tuple(dgs), limits=limits, profiles=profiles)
    grid.validate()
    grid = expand_svrs(grid)
    grid.validate()
    return grid


def serialize_grid(grid: Grid) -> str:
    """Inverse of parse_grid up to SVR expansion (round-trips expanded grids)."""
    doc = {
        "nodes": [
            {
                "id": n.id, "kind": n.kind,
                "base_load_p": n.base_load_p, "base_load_q": n.base_load_q,
                "kp": n.kp, "kq": n.kq, "priority": n.priority,
                "breaker_weight": n.breaker_weight,
                **({"profile": n.profile} if n.profile else {}),
            }
            for n in grid.nodes.values()
        ],
        "lines": [
            {
                "id": l.id, "from": l.from_node, "to": l.to_node,
                "r": l.r, "x": l.x, "f_max": l.f_max, "f_thr": l.f_thr,
                **({"switch": {
                    "kind": l.switch.kind, "remote": l.switch.remote,
                    "weight": l.switch.weight, "normally_open": l.switch.normally_open,
                }} if l.switch else {}),
                **({"is_virtual_regulator_link": True} if l.is_virtual_regulator_link else {}),
            }
            for l in grid.lines.values()
        ],
        "regulators": [
            {
                "kind": r.kind, "location": r.location, "sigma": r.sigma,
                "n_steps": r.n_steps, "initial": r.initial, "dq_step": r.dq_step,
                "zp": [r.zp.real, r.zp.imag], "zs": [r.zs.real, r.zs.imag],
            }
            for r in grid.regulators
        ],
        "dgs": [
            {"node": d.node, "p_max": d.p_max, "q_min": d.q_min,
             "q_max": d.q_max, "s_max": d.s_max}
            for d in grid.dgs
        ],
        "limits": {
            "v_min": grid.limits.v_min, "v_max": grid.limits.v_max,
            "big_m_policy": grid.limits.big_m_policy,
            **({"sub_p_rating": grid.limits.sub_p_rating}
               if grid.limits.sub_p_rating is not None else {}),
            **({"sub_q_rating": grid.limits.sub_q_rating}
               if grid.limits.sub_q_rating is not None else {}),
        },
        "profiles": {name: list(series) for name, series in grid.profiles.items()},
    }
    return json.dumps(doc, indent=2)


@dataclass
class RadialBaseReport:
    ok: bool
    loops: list[list[str]] = field(default_factory=list)        # offending line ids
    unreachable: list[str] = field(default_factory=list)        # node ids
    multi_substation_components: list[list[str]] = field(default_factory=list)

    def __str__(self) -> str:
        if self.ok:
            return "radial base: ok"
        parts = []
        if self.loops:
            parts.append(f"loops via lines {self.loops}")
        if self.unreachable:
            parts.append(f"unreachable nodes {self.unreachable}")
        if self.multi_substation_components:
            parts.append(f"multiple substations in {self.multi_substation_components}")
        return "radial base: " + "; ".join(parts)


def validate_radial_base(grid: Grid) -> RadialBaseReport:
    """Check the pre-fault configuration (ties open, sectionalizers closed).

    It must be a spanning forest with exactly one substation per component.
    """
    closed = closed_line_ids(grid)
    parent: dict[str, str] = {nid: nid for nid in grid.nodes}

    def find(a: str) -> str:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    loops: list[list[str]] = []
    for lid in closed:
        line = grid.lines[lid]
        ra, rb = find(line.from_node), find(line.to_node)
        if ra == rb:
            loops.append([lid])
        else:
            parent[ra] = rb

    comp_nodes: dict[str, list[str]] = {}
    for nid in grid.nodes:
        comp_nodes.setdefault(find(nid), []).append(nid)

    unreachable: list[str] = []
    multi: list[list[str]] = []
    sub_set = set(grid.substations)
    for members in comp_nodes.values():
        subs = sorted(set(members) & sub_set)
        if not subs:
            unreachable.extend(sorted(members))
        elif len(subs) > 1:
            multi.append(subs)

    return RadialBaseReport(
        ok=not (loops or unreachable or multi),
        loops=loops, unreachable=sorted(unreachable),
        multi_substation_components=multi)


@dataclass(frozen=True)
class FaultSpec:
    faulted_line: str
    horizon: tuple[int, ...]   # hour indices, e.g. (8, 9, ..., 22)


def parse_fault(document: Union[str, dict, Path]) -> FaultSpec:
    """Parse ``{"faulted_line": ..., "horizon": [start_hour, end_hour]}``."""
    if isinstance(document, Path):
        document = document.read_text()
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FaultSpecError(f"fault spec is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise FaultSpecError("fault spec must be a JSON object")
    if "faulted_line" not in document:
        raise FaultSpecError("fault spec: missing field 'faulted_line'")
    span = document.get("horizon", list(DEFAULT_HORIZON))
    if (not isinstance(span, (list, tuple)) or len(span) != 2
            or not all(isinstance(h, int) and 0 <= h <= 23 for h in span)):
        raise FaultSpecError("fault spec: horizon must be [start_hour, end_hour] within 0..23")
    start, end = span
    if end < start:
        raise FaultSpecError("fault spec: horizon end before start")
    return FaultSpec(
        faulted_line=str(document["faulted_line"]),
        horizon=tuple(range(start, end + 1)),
    )
