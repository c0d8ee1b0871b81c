"""Zone partition and post-fault case derivation.

A zone is a feeder segment bounded by switches: a connected component of the
grid once every switched line is deleted. Fault isolation opens the nearest
enclosing switches (uncounted, pre-optimization) and derives the node/line
sets the optimization runs over.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .model import Grid, Line

logger = logging.getLogger(__name__)


class FaultError(ValueError):
    """Fault placement the model cannot handle (tie fault, lost substation)."""


@dataclass(frozen=True)
class Zone:
    id: str
    nodes: tuple[str, ...]
    lines: tuple[str, ...]   # fully-interior (unswitched) lines


@dataclass(frozen=True)
class ZonePartition:
    zones: tuple[Zone, ...]
    node_zone: dict[str, str]
    line_zone: dict[str, Optional[str]]   # None for switched lines spanning zones

    def zone_of(self, node_id: str) -> str:
        return self.node_zone[node_id]


def compute_zones(grid: Grid) -> ZonePartition:
    """Connected components after deleting all switched lines.

    Deterministic: zone ids follow the grid's node ordering and the result is
    independent of any internal iteration order.
    """
    adj: dict[str, list[tuple[str, str]]] = {nid: [] for nid in grid.nodes}
    for line in grid.lines.values():
        if line.switch is not None:
            continue
        adj[line.from_node].append((line.to_node, line.id))
        adj[line.to_node].append((line.from_node, line.id))

    node_zone: dict[str, str] = {}
    zones: list[Zone] = []
    for seed in grid.nodes:
        if seed in node_zone:
            continue
        zid = f"z{len(zones)}"
        members, interior = [], set()
        stack = [seed]
        node_zone[seed] = zid
        while stack:
            nid = stack.pop()
            members.append(nid)
            for other, lid in adj[nid]:
                interior.add(lid)
                if other not in node_zone:
                    node_zone[other] = zid
                    stack.append(other)
        zones.append(Zone(
            id=zid,
            nodes=tuple(sorted(members)),
            lines=tuple(sorted(interior))))

    line_zone: dict[str, Optional[str]] = {}
    for line in grid.lines.values():
        if line.switch is None:
            line_zone[line.id] = node_zone[line.from_node]
        else:
            line_zone[line.id] = None
    return ZonePartition(zones=tuple(zones), node_zone=node_zone, line_zone=line_zone)


def _components(node_ids, edges) -> list[set[str]]:
    adj: dict[str, list[str]] = {nid: [] for nid in node_ids}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen: set[str] = set()
    comps = []
    for seed in node_ids:
        if seed in seen:
            continue
        comp = set()
        stack = [seed]
        while stack:
            nid = stack.pop()
            if nid in comp:
                continue
            comp.add(nid)
            stack.extend(adj[nid])
        seen |= comp
        comps.append(comp)
    return comps


@dataclass(frozen=True)
class RestorationCase:
    """Everything the program builder needs about one fault."""

    grid: Grid
    faulted_line: str
    horizon: tuple[int, ...]
    zones: ZonePartition
    nodes: tuple[str, ...]            # healthy nodes of faulted + available feeders
    off_nodes: frozenset[str]         # off-outage area
    off_zones: tuple[str, ...]
    lines: tuple[str, ...]            # healthy lines of the involved feeders (incl. usable ties)
    w_ava: tuple[str, ...]            # available tie-switch lines
    w_int: tuple[str, ...]            # internal tie-switch lines
    w_sec: tuple[str, ...]            # internal sectionalizing-switch lines
    virtual_sources: tuple[str, ...]
    adjustable_oltc_nodes: tuple[str, ...]
    frozen_oltc_nodes: tuple[str, ...]
    svr_links: tuple[str, ...]
    cb_nodes: tuple[str, ...]
    dg_nodes: tuple[str, ...]
    removed_nodes: frozenset[str] = frozenset()   # faulted-zone nodes, unrestorable
    no_restoration_path: bool = False
    feeder_of: dict[str, str] = field(default_factory=dict)

    @property
    def switched(self) -> tuple[str, ...]:
        return self.w_ava + self.w_int + self.w_sec

    def line(self, lid: str) -> Line:
        return self.grid.lines[lid]

    def load_nodes(self) -> list[str]:
        return [
            nid for nid in self.nodes
            if self.grid.nodes[nid].base_load_p or self.grid.nodes[nid].base_load_q
        ]

    def off_load_nodes(self) -> list[str]:
        return [nid for nid in self.load_nodes() if nid in self.off_nodes]


def isolate_fault(grid: Grid, faulted_line: str, horizon) -> RestorationCase:
    """Derive the restoration case for a fault on one line.

    A fault on a switched line removes just that line; a fault inside a zone
    removes the whole zone (its bounding switches open before optimization and
    any reclose would re-energize the fault). Those openings are not counted
    as restoration actions.
    """
    horizon = tuple(horizon)
    if not horizon:
        raise FaultError("empty restorative horizon")
    if faulted_line not in grid.lines:
        raise FaultError(f"unknown faulted line {faulted_line!r}")
    fline = grid.lines[faulted_line]
    if fline.switch is not None and fline.switch.kind == "tie":
        raise FaultError(f"fault on tie line {faulted_line}: nothing to restore")

    zones = compute_zones(grid)
    substations = set(grid.substations)

    removed_lines = {faulted_line}
    removed_nodes: set[str] = set()
    if fline.switch is None:
        zid = zones.line_zone[faulted_line]
        zone = next(z for z in zones.zones if z.id == zid)
        removed_nodes = set(zone.nodes)
        removed_lines |= set(zone.lines)
        # bounding switches stay open for the repair period
        for line in grid.lines.values():
            if line.switch is not None and (
                    line.from_node in removed_nodes or line.to_node in removed_nodes):
                removed_lines.add(line.id)
        lost_subs = removed_nodes & substations
        if lost_subs:
            raise FaultError(
                f"fault on {faulted_line} de-energizes substation(s) {sorted(lost_subs)}; "
                f"no enclosing switches can isolate it")

    # pre-fault feeders: components over closed lines, no fault applied
    closed_edges = [
        (l.from_node, l.to_node) for l in grid.lines.values()
        if not (l.switch is not None and l.switch.normally_open)
    ]
    feeder_of: dict[str, str] = {}
    for comp in _components(list(grid.nodes), closed_edges):
        subs = sorted(comp & substations)
        root = subs[0] if subs else sorted(comp)[0]
        for nid in comp:
            feeder_of[nid] = root

    faulted_feeder = feeder_of[fline.from_node]

    # post-isolation reachability (ties still open)
    live_edges = [
        (l.from_node, l.to_node) for l in grid.lines.values()
        if l.id not in removed_lines
        and not (l.switch is not None and l.switch.normally_open)
        and l.from_node not in removed_nodes and l.to_node not in removed_nodes
    ]
    alive_nodes = [n for n in grid.nodes if n not in removed_nodes]
    energized: set[str] = set()
    for comp in _components(alive_nodes, live_edges):
        if comp & substations:
            energized |= comp
    off_nodes = frozenset(set(alive_nodes) - energized)

    # available feeders: energized regions reachable from the off-outage area
    # through one open tie (the tie's far endpoint becomes a virtual source)
    w_ava: list[str] = []
    virtual_sources: list[str] = []
    available_feeders: set[str] = set()
    w_int: list[str] = []
    for line in grid.lines.values():
        if line.id in removed_lines or line.switch is None or line.switch.kind != "tie":
            continue
        ends_off = [line.from_node in off_nodes, line.to_node in off_nodes]
        if all(ends_off):
            w_int.append(line.id)
        elif any(ends_off):
            outside = line.from_node if ends_off[1] else line.to_node
            if outside in energized:
                w_ava.append(line.id)
                virtual_sources.append(outside)
                available_feeders.add(feeder_of[outside])

    involved = {faulted_feeder} | available_feeders
    nodes = tuple(nid for nid in grid.nodes
                  if nid not in removed_nodes and feeder_of[nid] in involved)
    node_set = set(nodes)

    lines: list[str] = []
    w_sec: list[str] = []
    for line in grid.lines.values():
        if line.id in removed_lines:
            continue
        if line.from_node not in node_set or line.to_node not in node_set:
            continue
        is_tie = line.switch is not None and line.switch.kind == "tie"
        if is_tie:
            if line.id in w_ava or line.id in w_int:
                lines.append(line.id)
            continue   # ties not touching the off-outage area stay open
        lines.append(line.id)
        if (line.switch is not None
                and line.from_node in off_nodes and line.to_node in off_nodes):
            w_sec.append(line.id)

    off_zone_ids = tuple(sorted(
        {zones.node_zone[nid] for nid in off_nodes},
        key=lambda z: int(z[1:])))

    adjustable, frozen = [], []
    for reg in grid.regulators:
        if reg.kind != "oltc" or reg.location not in node_set:
            continue
        if feeder_of[reg.location] in available_feeders:
            adjustable.append(reg.location)
        else:
            frozen.append(reg.location)

    svr_links = tuple(r.location for r in grid.regulators
                      if r.kind == "svr" and r.location in {l for l in lines})
    cb_nodes = tuple(r.location for r in grid.regulators
                     if r.kind == "cb" and r.location in node_set)
    dg_nodes = tuple(d.node for d in grid.dgs if d.node in node_set)

    no_path = not w_ava
    if no_path and off_nodes:
        logger.warning("fault on %s: no available tie reaches the off-outage area",
                       faulted_line)
    if removed_nodes:
        logger.info("fault on %s: zone with nodes %s is unrestorable until repair",
                    faulted_line, sorted(removed_nodes))

    return RestorationCase(
        grid=grid, faulted_line=faulted_line, horizon=horizon, zones=zones,
        nodes=nodes, off_nodes=off_nodes, off_zones=off_zone_ids,
        lines=tuple(lines), w_ava=tuple(w_ava), w_int=tuple(w_int),
        w_sec=tuple(w_sec), virtual_sources=tuple(virtual_sources),
        adjustable_oltc_nodes=tuple(adjustable), frozen_oltc_nodes=tuple(frozen),
        svr_links=svr_links, cb_nodes=cb_nodes, dg_nodes=dg_nodes,
        removed_nodes=frozenset(removed_nodes),
        no_restoration_path=no_path, feeder_of=feeder_of)
