from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from preguss.frontend.models import IntWidth
from preguss.specs.models import Clause, Pred
from preguss.specs.utils import implies


class VCStatus(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


class ObligationKind(str, Enum):
    TARGET = "target"
    GUARD = "guard"
    CALLSITE = "callsite"
    ASSERT = "assert"
    ENSURES = "ensures"
    INVARIANT_ESTABLISHED = "invariant established"
    INVARIANT_PRESERVED = "invariant preserved"
    LOOP_ASSIGNS = "loop assigns"


@dataclass(frozen=True)
class Obligation:
    """A proof obligation inside one function body. Inactive obligations are assumed."""

    id: str
    kind: ObligationKind
    function: str
    node_id: int
    description: str
    clause: Optional[Clause] = None


@dataclass(frozen=True)
class VerificationCondition:
    id: str
    hypothesis: Pred
    goal: Pred
    origin: int
    description: str
    kind: ObligationKind
    function: str
    width: IntWidth = IntWidth(32)
    clause: Optional[Clause] = None
    # call results and loop havoc values, mapped to what they stand for
    symbols: Tuple[Tuple[str, str], ...] = ()
    loops_without_invariant: Tuple[int, ...] = ()
    # call result symbols mapped to the callee
    call_results: Tuple[Tuple[str, str], ...] = ()

    @property
    def formula(self) -> Pred:
        return implies(self.hypothesis, self.goal)

    @property
    def abstraction_symbols(self) -> Dict[str, str]:
        return dict(self.symbols)


@dataclass
class VerificationOutcome:
    vc_id: str
    status: VCStatus
    witness: Optional[Dict[str, int]] = None
    reason: Optional[str] = None
    tier: Optional[str] = None
    # free symbols of the failing sequent, and those among them that abstract a call result or a loop
    residual: Tuple[str, ...] = ()
    abstracted: Tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return self.status == VCStatus.VALID

    @property
    def invalid(self) -> bool:
        return self.status == VCStatus.INVALID


class DischargeConfig(BaseModel):
    max_enumeration: int = Field(default=1 << 17, ge=1)
    max_variables: int = Field(default=3, ge=0)
    use_smt: bool = True
    solver_command: Optional[List[str]] = None
    smt_timeout: int = Field(default=10, ge=1)


@dataclass
class UnitVerification:
    """Every VC of a unit with its outcome, keyed by VC id in generation order."""

    vcs: List[VerificationCondition] = field(default_factory=list)
    outcomes: Dict[str, VerificationOutcome] = field(default_factory=dict)

    @property
    def target(self) -> Optional[VerificationCondition]:
        for vc in self.vcs:
            if vc.kind == ObligationKind.TARGET:
                return vc
        return None

    @property
    def target_outcome(self) -> Optional[VerificationOutcome]:
        target = self.target
        return None if target is None else self.outcomes[target.id]

    def failed(self) -> List[VerificationCondition]:
        return [vc for vc in self.vcs if not self.outcomes[vc.id].valid]

    def failing_clauses(self) -> List[Clause]:
        clauses = []
        for vc in self.failed():
            if vc.clause is not None and vc.clause not in clauses:
                clauses.append(vc.clause)
        return clauses
