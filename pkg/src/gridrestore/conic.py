"""Solver-agnostic conic program container.

Holds variables (with integrality marks), sparse linear rows, second-order
cone rows ``||(e1..ek)||_2 <= e0``, SOS1 groups and a staged objective.
Programs are append-only during assembly and treated as immutable afterward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

LE = "<="
EQ = "=="


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = -math.inf
    ub: float = math.inf
    time: Optional[int] = None


@dataclass(frozen=True)
class LinExpr:
    """Sparse affine expression sum(coef * x[idx]) + const."""

    coeffs: tuple[tuple[int, float], ...] = ()
    const: float = 0.0

    def value(self, x) -> float:
        return self.const + sum(c * x[i] for i, c in self.coeffs)

    def shifted(self, delta: float) -> "LinExpr":
        return LinExpr(self.coeffs, self.const + delta)

    def scaled(self, s: float) -> "LinExpr":
        return LinExpr(tuple((i, c * s) for i, c in self.coeffs), self.const * s)


def expr(terms: Iterable[tuple[int, float]] = (), const: float = 0.0) -> LinExpr:
    acc: dict[int, float] = {}
    for idx, coef in terms:
        if coef:
            acc[idx] = acc.get(idx, 0.0) + coef
    return LinExpr(tuple(sorted(acc.items())), const)


@dataclass(frozen=True)
class LinearRow:
    """coeffs . x (sense) rhs"""

    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    tag: str = ""

    def violation(self, x) -> float:
        lhs = sum(c * x[i] for i, c in self.coeffs)
        if self.sense == EQ:
            return abs(lhs - self.rhs)
        return max(0.0, lhs - self.rhs)


@dataclass(frozen=True)
class ConeRow:
    """||(exprs[1..])||_2 <= exprs[0]"""

    exprs: tuple[LinExpr, ...]
    tag: str = ""

    def violation(self, x) -> float:
        e0 = self.exprs[0].value(x)
        norm = math.sqrt(sum(e.value(x) ** 2 for e in self.exprs[1:]))
        return max(0.0, norm - e0)


@dataclass(frozen=True)
class ObjectiveTerm:
    name: str
    expression: LinExpr
    normalizer: float
    stage: int
    weight: float = 1.0

    def scaled_value(self, x) -> float:
        return self.weight * self.expression.value(x) / self.normalizer

    def raw_value(self, x) -> float:
        return self.expression.value(x)


@dataclass
class ProgramStats:
    n_variables: int
    n_binary: int
    n_integer: int
    n_linear_rows: int
    n_cones: int
    n_sos1: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class ConicProgram:
    def __init__(self) -> None:
        self.variables: list[Variable] = []
        self.rows: list[LinearRow] = []
        self.cones: list[ConeRow] = []
        self.sos1_groups: list[tuple[int, ...]] = []
        self.objective: list[ObjectiveTerm] = []
        self.warnings: list[str] = []
        self._by_name: dict[str, int] = {}

    # -- construction ------------------------------------------------------

    def add_variable(self, name: str, kind: str = CONTINUOUS,
                     lb: float = -math.inf, ub: float = math.inf,
                     time: Optional[int] = None) -> int:
        if name in self._by_name:
            raise ProgramError(f"duplicate variable {name!r}")
        if lb > ub:
            raise ProgramError(f"variable {name!r}: lb > ub")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, lb, ub, time))
        self._by_name[name] = idx
        return idx

    def add_row(self, coeffs: Iterable[tuple[int, float]], sense: str,
                rhs: float, tag: str = "") -> None:
        e = expr(coeffs)
        for idx, _ in e.coeffs:
            if idx >= len(self.variables):
                raise ProgramError(f"row {tag!r} references unknown variable {idx}")
        self.rows.append(LinearRow(e.coeffs, sense, rhs, tag))

    def add_cone(self, exprs: Sequence[LinExpr], tag: str = "") -> None:
        if len(exprs) < 2:
            raise ProgramError(f"cone {tag!r} needs a bound and at least one member")
        for e in exprs:
            for idx, _ in e.coeffs:
                if idx >= len(self.variables):
                    raise ProgramError(f"cone {tag!r} references unknown variable {idx}")
        self.cones.append(ConeRow(tuple(exprs), tag))

    def add_sos1(self, members: Iterable[int]) -> None:
        members = tuple(members)
        for idx in members:
            if self.variables[idx].kind != BINARY:
                raise ProgramError(
                    f"SOS1 member {self.variables[idx].name} is not binary")
        self.sos1_groups.append(members)

    def add_objective_term(self, name: str, expression: LinExpr,
                           normalizer: float, stage: int, weight: float = 1.0) -> None:
        if normalizer <= 0:
            self.warnings.append(
                f"objective term {name!r}: empty normalizer, forced to 1")
            normalizer = 1.0
        self.objective.append(ObjectiveTerm(name, expression, normalizer, stage, weight))

    # -- queries -----------------------------------------------------------

    def index(self, name: str) -> int:
        return self._by_name[name]

    def has_variable(self, name: str) -> bool:
        return name in self._by_name

    def var(self, name: str) -> Variable:
        return self.variables[self._by_name[name]]

    def value(self, x, name: str) -> float:
        return x[self._by_name[name]]

    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables)
                if v.kind in (BINARY, INTEGER)]

    def stages(self) -> list[int]:
        return sorted({t.stage for t in self.objective})

    def stage_expr(self, stage: int) -> LinExpr:
        """Normalized, weighted affine expression of one objective stage."""
        acc: dict[int, float] = {}
        const = 0.0
        for term in self.objective:
            if term.stage != stage:
                continue
            s = term.weight / term.normalizer
            const += term.expression.const * s
            for idx, coef in term.expression.coeffs:
                acc[idx] = acc.get(idx, 0.0) + coef * s
        return LinExpr(tuple(sorted(acc.items())), const)

    def stage_values(self, x) -> dict[int, float]:
        return {s: self.stage_expr(s).value(x) for s in self.stages()}

    def max_linear_violation(self, x) -> float:
        worst = 0.0
        for row in self.rows:
            worst = max(worst, row.violation(x))
        for i, v in enumerate(self.variables):
            if v.lb > -math.inf:
                worst = max(worst, v.lb - x[i])
            if v.ub < math.inf:
                worst = max(worst, x[i] - v.ub)
        return worst

    def max_cone_violation(self, x) -> float:
        return max((c.violation(x) for c in self.cones), default=0.0)

    def stats(self) -> ProgramStats:
        return ProgramStats(
            n_variables=len(self.variables),
            n_binary=sum(1 for v in self.variables if v.kind == BINARY),
            n_integer=sum(1 for v in self.variables if v.kind == INTEGER),
            n_linear_rows=len(self.rows),
            n_cones=len(self.cones),
            n_sos1=len(self.sos1_groups),
        )


# -- portable text dump ----------------------------------------------------

def _fmt_expr(e: LinExpr) -> str:
    body = ",".join(f"{i}:{c!r}" for i, c in e.coeffs)
    return f"{e.const!r};{body}"


def _parse_expr(text: str) -> LinExpr:
    const_s, _, body = text.partition(";")
    coeffs = []
    if body:
        for part in body.split(","):
            i, _, c = part.partition(":")
            coeffs.append((int(i), float(c)))
    return LinExpr(tuple(coeffs), float(const_s))


def dump_program(program: ConicProgram) -> str:
    """Stable, round-trippable text listing for external cross-checks."""
    out = ["CONICPROGRAM 1"]
    out.append(f"VARIABLES {len(program.variables)}")
    for v in program.variables:
        t = "-" if v.time is None else str(v.time)
        out.append(f"{v.name} {v.kind} {v.lb!r} {v.ub!r} {t}")
    out.append(f"ROWS {len(program.rows)}")
    for r in program.rows:
        body = ",".join(f"{i}:{c!r}" for i, c in r.coeffs)
        out.append(f"{r.tag}|{r.sense}|{r.rhs!r}|{body}")
    out.append(f"CONES {len(program.cones)}")
    for c in program.cones:
        out.append(c.tag + "|" + "|".join(_fmt_expr(e) for e in c.exprs))
    out.append(f"SOS1 {len(program.sos1_groups)}")
    for grp in program.sos1_groups:
        out.append(",".join(str(i) for i in grp))
    out.append(f"OBJECTIVE {len(program.objective)}")
    for t in program.objective:
        out.append(f"{t.name}|{t.stage}|{t.weight!r}|{t.normalizer!r}|"
                   f"{_fmt_expr(t.expression)}")
    out.append("END")
    return "\n".join(out) + "\n"


def parse_program(text: str) -> ConicProgram:
    lines = text.splitlines()
    if not lines or lines[0] != "CONICPROGRAM 1":
        raise ProgramError("not a conic program dump")
    pos = 1
    program = ConicProgram()

    def section(header: str) -> int:
        nonlocal pos
        name, _, count = lines[pos].partition(" ")
        if name != header:
            raise ProgramError(f"expected {header} section at line {pos + 1}")
        pos += 1
        return int(count)

    for _ in range(section("VARIABLES")):
        name, kind, lb, ub, t = lines[pos].rsplit(" ", 4)
        program.add_variable(name, kind, float(lb), float(ub),
                             None if t == "-" else int(t))
        pos += 1
    for _ in range(section("ROWS")):
        tag, sense, rhs, body = lines[pos].split("|")
        coeffs = []
        if body:
            for part in body.split(","):
                i, _, c = part.partition(":")
                coeffs.append((int(i), float(c)))
        program.add_row(coeffs, sense, float(rhs), tag)
        pos += 1
    for _ in range(section("CONES")):
        parts = lines[pos].split("|")
        program.add_cone([_parse_expr(p) for p in parts[1:]], parts[0])
        pos += 1
    for _ in range(section("SOS1")):
        program.add_sos1(int(i) for i in lines[pos].split(",") if i)
        pos += 1
    for _ in range(section("OBJECTIVE")):
        name, stage, weight, norm, exprs = lines[pos].split("|", 4)
        program.add_objective_term(
            name, _parse_expr(exprs), float(norm), int(stage), float(weight))
        pos += 1
    if lines[pos] != "END":
        raise ProgramError("missing END marker")
    return program
