from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple, Union


# Terms: wrap-free integer arithmetic

@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Result:
    pass


@dataclass(frozen=True)
class Old:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Term"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / %
    left: "Term"
    right: "Term"


Term = Union[IntConst, Var, Result, Old, Neg, BinOp]
RESULT = Result()


# Predicates

@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Compare:
    op: str  # one of == != < <= > >=
    left: Term
    right: Term


@dataclass(frozen=True)
class Not:
    operand: "Pred"


@dataclass(frozen=True)
class And:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Or:
    left: "Pred"
    right: "Pred"


@dataclass(frozen=True)
class Implies:
    left: "Pred"
    right: "Pred"


Pred = Union[BoolConst, Compare, Not, And, Or, Implies]
TRUE = BoolConst(True)
FALSE = BoolConst(False)

TERM_TYPES = (IntConst, Var, Result, Old, Neg, BinOp)
PRED_TYPES = (BoolConst, Compare, Not, And, Or, Implies)


class ClauseKind(str, Enum):
    REQUIRES = "requires"
    ENSURES = "ensures"
    ASSERT = "assert"
    LOOP_INVARIANT = "loop invariant"
    LOOP_ASSIGNS = "loop assigns"

    @property
    def is_loop(self) -> bool:
        return self in (ClauseKind.LOOP_INVARIANT, ClauseKind.LOOP_ASSIGNS)

    @property
    def is_contract(self) -> bool:
        return self in (ClauseKind.REQUIRES, ClauseKind.ENSURES)


@dataclass(frozen=True)
class Clause:
    """One specification unit. anchor is the node id of the function, loop or statement it is attached to."""

    kind: ClauseKind
    body: Optional[Pred] = None
    anchor: Optional[int] = None
    label: Optional[str] = None
    variables: Tuple[str, ...] = ()

    def anchored(self, anchor: Optional[int]) -> "Clause":
        return Clause(self.kind, self.body, anchor, self.label, self.variables)

    def same_content(self, other: "Clause") -> bool:
        return (self.kind, self.body, self.label, self.variables) == (
            other.kind, other.body, other.label, other.variables)


@dataclass(frozen=True)
class Contract:
    """Absent lists mean \\true."""

    function: str
    requires: Tuple[Pred, ...] = ()
    ensures: Tuple[Pred, ...] = ()


@dataclass(frozen=True)
class LoopAnnotation:
    invariants: Tuple[Pred, ...] = ()
    assigns: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class ContractEnv:
    """Immutable snapshot of every known contract and loop annotation."""

    contracts: Mapping[str, Contract] = field(default_factory=dict)
    loops: Mapping[int, LoopAnnotation] = field(default_factory=dict)

    def contract(self, function: str) -> Contract:
        return self.contracts.get(function) or Contract(function)

    def loop(self, loop_id: int) -> LoopAnnotation:
        return self.loops.get(loop_id) or LoopAnnotation()

    def with_clauses(self, clauses, anchors: Mapping[int, str]) -> "ContractEnv":
        """Snapshot extended with clauses. anchors maps function node ids to function names."""
        contracts: Dict[str, Contract] = dict(self.contracts)
        loops: Dict[int, LoopAnnotation] = dict(self.loops)
        for clause in clauses:
            if clause.kind.is_contract:
                name = anchors[clause.anchor]
                current = contracts.get(name) or Contract(name)
                if clause.kind == ClauseKind.REQUIRES and clause.body not in current.requires:
                    current = Contract(name, current.requires + (clause.body,), current.ensures)
                elif clause.kind == ClauseKind.ENSURES and clause.body not in current.ensures:
                    current = Contract(name, current.requires, current.ensures + (clause.body,))
                contracts[name] = current
            elif clause.kind == ClauseKind.LOOP_INVARIANT:
                current = loops.get(clause.anchor) or LoopAnnotation()
                if clause.body not in current.invariants:
                    loops[clause.anchor] = LoopAnnotation(current.invariants + (clause.body,), current.assigns)
            elif clause.kind == ClauseKind.LOOP_ASSIGNS:
                current = loops.get(clause.anchor) or LoopAnnotation()
                loops[clause.anchor] = LoopAnnotation(current.invariants, tuple(clause.variables))
        return ContractEnv(contracts, loops)
